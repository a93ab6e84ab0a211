//! Structured Hamiltonian of the compound: matrix-vector products without
//! materializing the dense matrix.
//!
//! H = H_S + H_E + V_SE (− ε(σz¹+σz²) when the bias is enabled) with
//! H_S = −Δ/2(σx¹+σx²) + J/4 σz¹σz², H_E = Σ ω_i b†_i b_i and
//! V_SE = (σz¹+σz²) ⊗ Σ λ_i (b_i + b†_i). The Fock cutoff is hard:
//! b†|n−1⟩ = 0.

use crate::exact::state::{state_dim, PureStateVector};
use crate::model::{DiscretizedBath, ModelParams};
use crate::parallel;
use crate::{C64, Error, Result};

/// Which part of the Hamiltonian a product should apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Full,
    System,
    Bath,
    Interaction,
}

#[derive(Debug, Clone)]
pub struct HamiltonianTerms {
    pub delta: f64,
    pub j_coupling: f64,
    pub bias_epsilon: f64,
    pub bias_enabled: bool,
    pub bath: DiscretizedBath,
    pub n_modes: usize,
    pub fock_cutoff: usize,
    dim: usize,
    /// √m for m = 0..n, shared by the ladder terms.
    sqrt_table: Vec<f64>,
}

/// σz¹+σz² eigenvalue for computational index q.
#[inline]
fn sz_sum(q: usize) -> f64 {
    match q {
        0 => 2.0,
        3 => -2.0,
        _ => 0.0,
    }
}

/// σz¹σz² eigenvalue for computational index q.
#[inline]
fn szz(q: usize) -> f64 {
    if q == 0 || q == 3 {
        1.0
    } else {
        -1.0
    }
}

pub fn assemble_hamiltonian(params: &ModelParams, bath: &DiscretizedBath) -> Result<HamiltonianTerms> {
    params.validate()?;
    if bath.len() != params.n_modes {
        return Err(Error::Shape(format!(
            "bath has {} modes, params expect {}",
            bath.len(),
            params.n_modes
        )));
    }
    let dim = state_dim(params.n_modes, params.fock_cutoff)?;
    let sqrt_table = (0..=params.fock_cutoff).map(|m| (m as f64).sqrt()).collect();
    Ok(HamiltonianTerms {
        delta: params.delta,
        j_coupling: params.j_coupling,
        bias_epsilon: params.bias_epsilon,
        bias_enabled: false,
        bath: bath.clone(),
        n_modes: params.n_modes,
        fock_cutoff: params.fock_cutoff,
        dim,
        sqrt_table,
    })
}

impl HamiltonianTerms {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Copy with the bias field −ε(σz¹+σz²) switched on or off.
    pub fn with_bias(&self, enabled: bool) -> Self {
        let mut h = self.clone();
        h.bias_enabled = enabled;
        h
    }

    /// H|v⟩ for the configured part of the Hamiltonian.
    pub fn apply_part(&self, v: &[C64], part: Part) -> Vec<C64> {
        self.apply_impl(v, part, false)
    }

    fn apply_impl(&self, v: &[C64], part: Part, sequential: bool) -> Vec<C64> {
        assert_eq!(v.len(), self.dim, "state dimension mismatch");
        let n = self.fock_cutoff;
        let half_delta = 0.5 * self.delta;
        let quarter_j = 0.25 * self.j_coupling;
        let eps = if self.bias_enabled { self.bias_epsilon } else { 0.0 };
        let freqs = &self.bath.frequencies;
        let lambdas = &self.bath.couplings;
        let sqrt_t = &self.sqrt_table;
        let n_modes = self.n_modes;
        let (system, bath_e, inter) = match part {
            Part::Full => (true, true, true),
            Part::System => (true, false, false),
            Part::Bath => (false, true, false),
            Part::Interaction => (false, false, true),
        };

        let entry = |i: usize| {
            let q = i % 4;
            let sz = sz_sum(q);
            let mut acc = C64::new(0.0, 0.0);
            let mut diag = 0.0;

            if system {
                diag += quarter_j * szz(q) - eps * sz;
                // σx flips: qubit 1 toggles bit 1 of q, qubit 2 bit 0.
                let base = i - q;
                acc -= half_delta * (v[base + (q ^ 2)] + v[base + (q ^ 1)]);
            }

            if bath_e || (inter && sz != 0.0) {
                let mut rest = i / 4;
                let mut stride = 4;
                for k in 0..n_modes {
                    let m = rest % n;
                    rest /= n;
                    if bath_e {
                        diag += freqs[k] * m as f64;
                    }
                    if inter && sz != 0.0 {
                        let mut ladder = C64::new(0.0, 0.0);
                        if m + 1 < n {
                            ladder += sqrt_t[m + 1] * v[i + stride];
                        }
                        if m > 0 {
                            ladder += sqrt_t[m] * v[i - stride];
                        }
                        acc += sz * lambdas[k] * ladder;
                    }
                    stride *= n;
                }
            }

            acc + diag * v[i]
        };

        if sequential {
            parallel::build_vec_seq(self.dim, entry)
        } else {
            parallel::build_vec(self.dim, entry)
        }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.apply_part(v, Part::Full)
    }

    /// Sequential full product, the benchmark baseline for the parallel path.
    pub fn apply_seq(&self, v: &[C64]) -> Vec<C64> {
        self.apply_impl(v, Part::Full, true)
    }

    /// ⟨ψ|H_part|ψ⟩ (real for Hermitian parts).
    pub fn expectation_part(&self, state: &PureStateVector, part: Part) -> f64 {
        let hv = self.apply_part(&state.amplitudes, part);
        state
            .amplitudes
            .iter()
            .zip(&hv)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    pub fn expectation(&self, state: &PureStateVector) -> f64 {
        self.expectation_part(state, Part::Full)
    }
}
