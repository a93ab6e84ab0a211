//! Physical model: parameters, Ohmic spectral density, bath discretization,
//! and the closed two-qubit eigensystem.
//!
//! Every energy is expressed in units of the qubit frequency `delta` and every
//! time in units of `1/delta`. The qubit computational basis is ordered
//! (↑↑, ↑↓, ↓↑, ↓↓) everywhere in the crate.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// All physical and numerical parameters of the system-environment compound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Qubit frequency Δ, the energy unit.
    pub delta: f64,
    /// Two-qubit coupling J (negative = ferromagnetic).
    pub j_coupling: f64,
    /// Oscillator frequency ω₀.
    pub omega0: f64,
    /// Oscillator-bath strength α (dimensionless).
    pub alpha: f64,
    /// Qubit-oscillator coupling g.
    pub g: f64,
    /// Bath cutoff frequency ω_c.
    pub omega_c: f64,
    /// Symmetry-breaking bias field ε.
    pub bias_epsilon: f64,
    /// Number of discretized bath modes N.
    pub n_modes: usize,
    /// Bosonic truncation n per mode (occupations 0..n-1).
    pub fock_cutoff: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            delta: 1.0,
            j_coupling: -10.0,
            omega0: 1.0,
            alpha: 0.1,
            g: 0.6,
            omega_c: 30.0,
            bias_epsilon: 1e-3,
            n_modes: 6,
            fock_cutoff: 4,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParams("delta must be > 0".into()));
        }
        if !(self.omega0 > 0.0) {
            return Err(Error::InvalidParams("omega0 must be > 0".into()));
        }
        if !(self.omega_c > self.omega0) {
            return Err(Error::InvalidParams("omega_c must exceed omega0".into()));
        }
        if self.alpha < 0.0 || self.g < 0.0 || self.bias_epsilon < 0.0 {
            return Err(Error::InvalidParams(
                "alpha, g and bias_epsilon must be nonnegative".into(),
            ));
        }
        if self.n_modes < 1 {
            return Err(Error::InvalidParams("n_modes must be >= 1".into()));
        }
        if self.fock_cutoff < 2 {
            return Err(Error::InvalidParams("fock_cutoff must be >= 2".into()));
        }
        Ok(())
    }

    /// Parse from JSON, rejecting unknown keys.
    pub fn from_json(text: &str) -> Result<Self> {
        let params: ModelParams = serde_json::from_str(text)?;
        params.validate()?;
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ModelParams serializes")
    }
}

/// Effective bath spectral density at frequency `omega`.
///
/// Zero at and above the cutoff; Ohmic (linear in ω with slope 2g²α/ω₀²)
/// at low frequency.
pub fn spectral_density(omega: f64, params: &ModelParams) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!(
            "spectral density needs omega > 0, got {omega}"
        )));
    }
    if omega >= params.omega_c {
        return Ok(0.0);
    }
    let w0 = params.omega0;
    let wc = params.omega_c;
    let h = params.alpha * w0 * omega * ((wc + omega) / (wc - omega)).ln();
    let num = 2.0 * params.g * params.g * w0 * w0 * params.alpha * omega;
    let re = omega * omega - w0 * w0 - h;
    let im = std::f64::consts::PI * params.alpha * w0 * omega;
    Ok(num / (re * re + im * im))
}

/// Discretized bath: mode frequencies and couplings realizing the spectral
/// density, J(ω) = Σ λ_i² δ(ω − ω_i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedBath {
    /// Mode frequencies ω_i, strictly increasing, all in (0, ω_c).
    pub frequencies: Vec<f64>,
    /// Couplings λ_i >= 0, one per mode.
    pub couplings: Vec<f64>,
}

impl DiscretizedBath {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

/// Midpoint discretization of the spectral density on (0, ω_c):
/// ω_i = (i − ½)ω_c/N, λ_i = √(J(ω_i)·ω_c/N). Deterministic and bit-exact
/// for identical inputs.
pub fn discretize_bath(params: &ModelParams) -> Result<DiscretizedBath> {
    params.validate()?;
    let n = params.n_modes;
    let step = params.omega_c / n as f64;
    let mut frequencies = Vec::with_capacity(n);
    let mut couplings = Vec::with_capacity(n);
    for i in 1..=n {
        let w = (i as f64 - 0.5) * step;
        let j = spectral_density(w, params)?;
        frequencies.push(w);
        couplings.push((j * step).sqrt());
    }
    Ok(DiscretizedBath {
        frequencies,
        couplings,
    })
}

/// Eigensystem of the closed two-qubit Hamiltonian
/// H_S = −Δ/2 (σx¹+σx²) + J/4 σz¹σz².
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedEigensystem {
    /// Energies sorted ascending, units Δ.
    pub energies: [f64; 4],
    /// Superposition coefficient a(J/Δ), fixed positive.
    pub coeff_a: f64,
    /// Superposition coefficient b(J/Δ).
    pub coeff_b: f64,
    /// Eigenvectors in the computational basis (↑↑, ↑↓, ↓↑, ↓↓),
    /// ordered by ascending energy.
    pub eigenvectors: [Vector4<f64>; 4],
}

/// Dense 4×4 system Hamiltonian in the computational basis.
pub fn h_system_matrix(params: &ModelParams) -> Matrix4<f64> {
    let d = params.delta;
    let j = params.j_coupling;
    // -Δ/2 (σx⊗I + I⊗σx) + J/4 σz⊗σz
    let mut h = Matrix4::zeros();
    h[(0, 0)] = j / 4.0;
    h[(1, 1)] = -j / 4.0;
    h[(2, 2)] = -j / 4.0;
    h[(3, 3)] = j / 4.0;
    // σx on qubit 1 swaps the first index, σx on qubit 2 the second.
    let off = -d / 2.0;
    for (r, c) in [(0, 1), (0, 2), (1, 3), (2, 3)] {
        h[(r, c)] += off;
        h[(c, r)] += off;
    }
    h
}

/// Closed-form eigensystem of H_S.
///
/// Phase convention: a > 0 and the singlet is (|↑↓⟩ − |↓↑⟩)/√2.
pub fn closed_eigensystem(params: &ModelParams) -> ClosedEigensystem {
    let d = params.delta;
    let r = params.j_coupling / d;
    let root = (16.0 + r * r).sqrt();
    let denom = (16.0 + (-r + root).powi(2)).sqrt();
    let a = 4.0 / denom;
    let b = -(root - r) / denom;

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let singlet = Vector4::new(0.0, s, -s, 0.0);
    let tafm = Vector4::new(0.0, s, s, 0.0);
    let tfm_plus = Vector4::new(s, 0.0, 0.0, s);
    let tfm_minus = Vector4::new(s, 0.0, 0.0, -s);

    // (energy, eigenvector) pairs before sorting.
    let mut pairs = [
        (-0.25 * root * d, tafm * a - tfm_plus * b),
        (0.25 * r * d, tfm_minus),
        (-0.25 * r * d, singlet),
        (0.25 * root * d, tfm_plus * a + tafm * b),
    ];
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    ClosedEigensystem {
        energies: [pairs[0].0, pairs[1].0, pairs[2].0, pairs[3].0],
        coeff_a: a,
        coeff_b: b,
        eigenvectors: [pairs[0].1, pairs[1].1, pairs[2].1, pairs[3].1],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_g(g: f64) -> ModelParams {
        ModelParams { g, ..Default::default() }
    }

    #[test]
    fn density_zero_at_cutoff() {
        let p = params_g(0.6);
        assert_eq!(spectral_density(30.0, &p).unwrap(), 0.0);
        assert_eq!(spectral_density(31.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn density_rejects_nonpositive_omega() {
        let p = params_g(0.6);
        assert!(spectral_density(0.0, &p).is_err());
        assert!(spectral_density(-1.0, &p).is_err());
    }

    #[test]
    fn density_low_frequency_slope() {
        // J(ω) → 2g²α/ω₀² · ω as ω → 0, slope 0.072 for g = 0.6, α = 0.1.
        let p = params_g(0.6);
        let w = 1e-3;
        let j = spectral_density(w, &p).unwrap();
        let slope = 2.0 * 0.36 * 0.1;
        assert!((j / w - slope).abs() / slope < 0.01, "j/w = {}", j / w);
    }

    #[test]
    fn density_low_frequency_limit_tight() {
        let p = params_g(0.6);
        let w = 1e-4 * p.omega_c;
        let j = spectral_density(w, &p).unwrap();
        let slope = 2.0 * p.g * p.g * p.alpha / (p.omega0 * p.omega0);
        assert!((j / w - slope).abs() / slope < 1e-3);
    }

    #[test]
    fn density_at_resonance() {
        // Closed-form value at ω = ω₀, checked against an independent
        // high-precision evaluation of the same expression.
        let p = params_g(0.6);
        let j = spectral_density(1.0, &p).unwrap();
        assert!((j - 0.729185).abs() < 1e-5, "J(ω₀) = {j}");
    }

    #[test]
    fn bath_single_mode() {
        let p = ModelParams { n_modes: 1, ..params_g(0.6) };
        let bath = discretize_bath(&p).unwrap();
        assert_eq!(bath.frequencies, vec![15.0]);
        let expected = (30.0 * spectral_density(15.0, &p).unwrap()).sqrt();
        assert_eq!(bath.couplings[0], expected);
    }

    #[test]
    fn bath_monotone_grid() {
        let p = ModelParams { n_modes: 37, ..params_g(0.4) };
        let bath = discretize_bath(&p).unwrap();
        for w in bath.frequencies.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!(bath.couplings.iter().all(|&l| l >= 0.0));
        assert!(bath.frequencies.iter().all(|&w| w > 0.0 && w < p.omega_c));
    }

    /// Adaptive Simpson quadrature, test-only oracle for the sum rule.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn recurse(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if depth > 40 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                recurse(f, a, m, left, tol / 2.0, depth + 1)
                    + recurse(f, m, b, right, tol / 2.0, depth + 1)
            }
        }
        let whole = simpson(f, a, b);
        recurse(f, a, b, whole, tol, 0)
    }

    #[test]
    fn bath_sum_rule_n300() {
        let p = ModelParams { n_modes: 300, ..params_g(0.6) };
        let bath = discretize_bath(&p).unwrap();
        let sum: f64 = bath.couplings.iter().map(|l| l * l).sum();
        let f = |w: f64| spectral_density(w, &p).unwrap();
        let integral = adaptive_simpson(&f, 1e-12, p.omega_c - 1e-12, 1e-10);
        assert!(
            (sum - integral).abs() / integral < 0.01,
            "sum {sum} vs integral {integral}"
        );
    }

    #[test]
    fn bath_deterministic() {
        let p = ModelParams { n_modes: 50, ..params_g(0.3) };
        let b1 = discretize_bath(&p).unwrap();
        let b2 = discretize_bath(&p).unwrap();
        assert_eq!(b1, b2);
    }

    #[test]
    fn eigensystem_spectrum_j_minus_10() {
        let eig = closed_eigensystem(&ModelParams::default());
        let expected = [-2.692582, -2.5, 2.5, 2.692582];
        for (e, x) in eig.energies.iter().zip(expected) {
            assert!((e - x).abs() < 1e-6, "{e} vs {x}");
        }
    }

    #[test]
    fn eigensystem_coefficients() {
        let eig = closed_eigensystem(&ModelParams::default());
        assert!((eig.coeff_a - 0.189108).abs() < 1e-6);
        assert!((eig.coeff_b + 0.981956).abs() < 1e-6);
        assert!((eig.coeff_a.powi(2) + eig.coeff_b.powi(2) - 1.0).abs() < 1e-12);
        // J = 0: symmetric superposition.
        let eig0 = closed_eigensystem(&ModelParams { j_coupling: 0.0, ..Default::default() });
        assert!((eig0.coeff_a - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((eig0.coeff_b + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn eigensystem_singlet_slot() {
        let eig = closed_eigensystem(&ModelParams::default());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = Vector4::new(0.0, s, -s, 0.0);
        assert!((eig.eigenvectors[2] - singlet).norm() < 1e-12);
    }

    #[test]
    fn eigensystem_diagonalizes_dense_h() {
        for j in [-10.0, -3.0, 0.0, 2.0, 17.5] {
            let p = ModelParams { j_coupling: j, ..Default::default() };
            let h = h_system_matrix(&p);
            let eig = closed_eigensystem(&p);
            for k in 0..4 {
                let v = eig.eigenvectors[k];
                assert!((v.norm() - 1.0).abs() < 1e-12);
                let resid = (h * v - v * eig.energies[k]).norm();
                assert!(resid < 1e-12, "J={j} k={k} resid={resid}");
            }
        }
    }

    #[test]
    fn normalization_random_j() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let j: f64 = rng.random_range(-50.0..50.0);
            let eig = closed_eigensystem(&ModelParams { j_coupling: j, ..Default::default() });
            assert!((eig.coeff_a.powi(2) + eig.coeff_b.powi(2) - 1.0).abs() < 1e-12);
            assert!(eig.coeff_a > 0.0);
        }
    }

    #[test]
    fn params_json_round_trip_and_unknown_keys() {
        let p = ModelParams::default();
        let text = p.to_json();
        let back = ModelParams::from_json(&text).unwrap();
        assert_eq!(p, back);
        let bad = text.replace("\"delta\"", "\"delta\": 1.0, \"bogus\"");
        assert!(ModelParams::from_json(&bad).is_err());
    }

    #[test]
    fn params_validation() {
        let mut p = ModelParams::default();
        p.fock_cutoff = 1;
        assert!(p.validate().is_err());
        let mut p = ModelParams::default();
        p.omega_c = 0.5;
        assert!(p.validate().is_err());
    }
}
