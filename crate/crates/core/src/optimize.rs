//! Unitary-search strategies for maximizing locally extracted work: the
//! (θ, φ) ferromagnetic-subspace ansatz on a grid, Haar sampling with batch
//! statistics, and Pauli-parameterized gradient-free refinement.

use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{c, cr, expi_hermitian4, sigma_x, sigma_y, sigma_z, I2};
use crate::parallel;
use crate::{C64, Error, Result};

/// 4×4 unitary acting on the qubit pair, computational basis (↑↑,↑↓,↓↑,↓↓).
pub type TwoQubitUnitary = Matrix4<C64>;

/// Angles of the ferromagnetic-subspace rotation ansatz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzAngles {
    /// θ ∈ [0, π].
    pub theta: f64,
    /// φ ∈ [0, 2π).
    pub phi: f64,
}

impl AnsatzAngles {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(Error::Validation(format!("theta {theta} outside [0, π]")));
        }
        if !(0.0..2.0 * std::f64::consts::PI).contains(&phi) {
            return Err(Error::Validation(format!("phi {phi} outside [0, 2π)")));
        }
        Ok(Self { theta, phi })
    }
}

/// The rotation U'_S(θ,φ): acts on the ferromagnetic subspace {↑↑, ↓↓},
/// identity on {↑↓, ↓↑}.
pub fn subspace_rotation(angles: AnsatzAngles) -> TwoQubitUnitary {
    let (s, co) = ((angles.theta / 2.0).sin(), (angles.theta / 2.0).cos());
    let mut u = Matrix4::identity();
    u[(0, 0)] = c(0.0, -angles.phi).exp() * s;
    u[(0, 3)] = cr(co);
    u[(3, 0)] = cr(-co);
    u[(3, 3)] = c(0.0, angles.phi).exp() * s;
    u
}

/// Extraction ansatz U = U'_S(θ,φ)·U^(c)†. At θ=π, φ=0 this is exactly the
/// agnostic gate U^(c)†.
pub fn ansatz_unitary(angles: AnsatzAngles, charging_inverse: &TwoQubitUnitary) -> TwoQubitUnitary {
    subspace_rotation(angles) * charging_inverse
}

/// Search configuration shared by all strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Grid points along θ (inclusive of both endpoints).
    pub grid_theta: usize,
    /// Grid points along φ (φ = 2π excluded).
    pub grid_phi: usize,
    pub haar_count: usize,
    pub refine_restarts: usize,
    pub simplex_tol: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            grid_theta: 41,
            grid_phi: 81,
            haar_count: 100,
            refine_restarts: 16,
            simplex_tol: 1e-8,
            seed: 0x6f71_6261,
        }
    }
}

/// Exhaustive evaluation over the equally spaced (θ, φ) grid.
///
/// Ties break lexicographically on (θ, φ), so the argmax is independent of
/// evaluation order. The grid always contains (θ=π, φ=0).
pub fn grid_search<F>(objective: F, cfg: &OptimizerConfig) -> (AnsatzAngles, f64)
where
    F: Fn(AnsatzAngles) -> f64 + Sync + Send,
{
    let nt = cfg.grid_theta.max(2);
    let np = cfg.grid_phi.max(1);
    let total = nt * np;
    let angles_at = |idx: usize| {
        let it = idx / np;
        let ip = idx % np;
        AnsatzAngles {
            theta: it as f64 * std::f64::consts::PI / (nt - 1) as f64,
            phi: ip as f64 * 2.0 * std::f64::consts::PI / np as f64,
        }
    };
    let values = parallel::build_vec(total, |idx| objective(angles_at(idx)));
    let mut best_idx = 0;
    for idx in 1..total {
        if values[idx] > values[best_idx] {
            best_idx = idx;
        }
    }
    (angles_at(best_idx), values[best_idx])
}

/// Haar-distributed 4×4 unitaries: QR of a complex Ginibre matrix with the
/// R-diagonal phases normalized. Bit-reproducible under a fixed seed.
pub fn haar_sample(count: usize, seed: u64) -> Vec<TwoQubitUnitary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let g = Matrix4::from_fn(|_, _| {
                C64::new(sample_standard_normal(&mut rng), sample_standard_normal(&mut rng))
            });
            let qr = nalgebra::DMatrix::from_fn(4, 4, |i, j| g[(i, j)]).qr();
            let q = qr.q();
            let r = qr.r();
            let mut u = Matrix4::zeros();
            for j in 0..4 {
                let d = r[(j, j)];
                let phase = if d.norm() > 0.0 { d / d.norm() } else { cr(1.0) };
                for i in 0..4 {
                    u[(i, j)] = q[(i, j)] * phase;
                }
            }
            u
        })
        .collect()
}

/// Box-Muller draw; keeps the sampling independent of distribution-crate
/// implementation details so fixed seeds stay stable.
fn sample_standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Best value, sample mean and unbiased standard deviation of the objective
/// over a batch of unitaries.
pub fn haar_statistics<F>(objective: F, samples: &[TwoQubitUnitary]) -> Result<(f64, f64, f64)>
where
    F: Fn(&TwoQubitUnitary) -> f64 + Sync + Send,
{
    if samples.len() < 2 {
        return Err(Error::Validation("Haar statistics need at least 2 samples".into()));
    }
    let values = parallel::map_slice(samples, |u| objective(u));
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    Ok((best, mean, var.sqrt()))
}

/// 15 real coefficients x_ij, (i,j) ≠ (0,0), each in [−2, 2], parameterizing
/// U = exp(i Σ x_ij σ_i⊗σ_j).
#[derive(Debug, Clone, PartialEq)]
pub struct PauliCoefficients {
    pub x: [f64; 15],
}

pub const PAULI_BOX: f64 = 2.0;

impl PauliCoefficients {
    pub fn zeros() -> Self {
        Self { x: [0.0; 15] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.iter().any(|v| v.abs() > PAULI_BOX) {
            return Err(Error::Validation("Pauli coefficient outside [-2, 2]".into()));
        }
        Ok(())
    }
}

fn pauli(i: usize) -> Matrix4<C64> {
    // Single-qubit basis {I, σx, σy, σz} indexed 0..3.
    let single = |k: usize| match k {
        0 => I2,
        1 => sigma_x(),
        2 => sigma_y(),
        _ => sigma_z(),
    };
    crate::linalg::kron2(&single(i / 4), &single(i % 4))
}

/// U = exp(i Σ x_ij σ_i⊗σ_j) via Hermitian eigendecomposition of the 4×4
/// generator.
pub fn pauli_unitary(coeffs: &PauliCoefficients) -> TwoQubitUnitary {
    let mut gen = Matrix4::zeros();
    for (slot, ij) in (1..16).enumerate() {
        gen += pauli(ij) * cr(coeffs.x[slot]);
    }
    expi_hermitian4(&gen)
}

/// Outcome of a gradient-free refinement.
#[derive(Debug, Clone)]
pub struct RefineResult {
    pub best: PauliCoefficients,
    pub best_value: f64,
    pub converged: bool,
}

/// Random-restart Nelder-Mead maximization over the Pauli-coefficient box.
///
/// The start point is always included, so the returned value never drops
/// below the start's objective. Non-convergence returns best-so-far with the
/// flag cleared.
pub fn refine_local<F>(objective: F, start: &PauliCoefficients, cfg: &OptimizerConfig) -> Result<RefineResult>
where
    F: Fn(&PauliCoefficients) -> f64 + Sync + Send,
{
    start.validate()?;
    let mut starts = vec![start.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5157_9d1e);
    for _ in 1..cfg.refine_restarts.max(1) {
        let mut x = [0.0; 15];
        for v in &mut x {
            *v = rng.random_range(-PAULI_BOX..PAULI_BOX);
        }
        starts.push(PauliCoefficients { x });
    }

    let runs = parallel::map_slice(&starts, |s| nelder_mead(&objective, s, cfg.simplex_tol));
    let mut best = RefineResult {
        best: start.clone(),
        best_value: objective(start),
        converged: true,
    };
    for run in runs {
        if run.best_value > best.best_value {
            best = run;
        }
    }
    Ok(best)
}

/// Nelder-Mead on a clamped box, maximizing `objective`.
fn nelder_mead<F>(objective: &F, start: &PauliCoefficients, tol: f64) -> RefineResult
where
    F: Fn(&PauliCoefficients) -> f64,
{
    const DIM: usize = 15;
    const MAX_ITERS: usize = 2000;
    let clamp = |x: &mut [f64; 15]| {
        for v in x.iter_mut() {
            *v = v.clamp(-PAULI_BOX, PAULI_BOX);
        }
    };
    let f = |x: &[f64; 15]| -objective(&PauliCoefficients { x: *x });

    // Initial simplex: start plus axis steps.
    let mut simplex: Vec<([f64; 15], f64)> = Vec::with_capacity(DIM + 1);
    simplex.push((start.x, f(&start.x)));
    for i in 0..DIM {
        let mut x = start.x;
        x[i] += if x[i] < PAULI_BOX - 0.25 { 0.25 } else { -0.25 };
        clamp(&mut x);
        simplex.push((x, f(&x)));
    }

    let mut converged = false;
    for _ in 0..MAX_ITERS {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let spread = simplex[DIM].1 - simplex[0].1;
        if spread.abs() < tol {
            converged = true;
            break;
        }
        // Centroid of all but the worst.
        let mut centroid = [0.0; 15];
        for (x, _) in &simplex[..DIM] {
            for i in 0..DIM {
                centroid[i] += x[i] / DIM as f64;
            }
        }
        let worst = simplex[DIM];
        let point = |alpha: f64| {
            let mut x = [0.0; 15];
            for i in 0..DIM {
                x[i] = centroid[i] + alpha * (centroid[i] - worst.0[i]);
            }
            clamp(&mut x);
            x
        };

        let xr = point(1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = point(2.0);
            let fe = f(&xe);
            simplex[DIM] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[DIM - 1].1 {
            simplex[DIM] = (xr, fr);
        } else {
            let xc = point(if fr < worst.1 { 0.5 } else { -0.5 });
            let fc = f(&xc);
            if fc < worst.1.min(fr) {
                simplex[DIM] = (xc, fc);
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    for i in 0..DIM {
                        entry.0[i] = best[i] + 0.5 * (entry.0[i] - best[i]);
                    }
                    entry.1 = f(&entry.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    RefineResult {
        best: PauliCoefficients { x: simplex[0].0 },
        best_value: -simplex[0].1,
        converged,
    }
}
