//! Work statistics of a local extraction gate: mean, second moment, variance
//! and relative fluctuation of the two-point work distribution.
//!
//! For a pure compound state ψ and extraction gate u, the work operator in
//! the Heisenberg picture is D = (u⊗I)†H(u⊗I) − H with w = −D, so
//! ⟨w⟩ = ⟨ψ|H|ψ⟩ − ⟨φ|H|φ⟩ and ⟨w²⟩ = ‖Dψ‖² with φ = (u⊗I)ψ.

use nalgebra::Matrix4;
use serde::Serialize;

use crate::ergotropy::validate_unitary;
use crate::exact::{HamiltonianTerms, PureStateVector};
use crate::{C64, Error, Result};

/// Below this fraction of Δ the mean work is treated as zero and the relative
/// fluctuation is reported as undefined.
pub const REL_FLUCT_FLOOR: f64 = 1e-6;

/// Moments of the extracted-work distribution for one gate at one time.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WorkStatistics {
    /// ⟨w⟩.
    pub mean: f64,
    /// ⟨w²⟩.
    pub second_moment: f64,
    /// σ² = ⟨w²⟩ − ⟨w⟩².
    pub variance: f64,
    /// σ/⟨w⟩; `None` when ⟨w⟩ ≤ 1e-6·Δ.
    pub rel_fluct: Option<f64>,
}

impl WorkStatistics {
    /// Assemble from the first two moments; `delta` sets the energy unit for
    /// the defined-ness floor.
    pub fn from_moments(mean: f64, second_moment: f64, delta: f64) -> Result<Self> {
        let variance = second_moment - mean * mean;
        if variance < -1e-8 {
            return Err(Error::Validation(format!(
                "negative work variance {variance:.3e}"
            )));
        }
        let variance = variance.max(0.0);
        let rel_fluct = if mean > REL_FLUCT_FLOOR * delta {
            Some(variance.sqrt() / mean)
        } else {
            None
        };
        Ok(Self { mean, second_moment, variance, rel_fluct })
    }
}

/// Work moments on the exact engine.
///
/// `h` must be the unbiased Hamiltonian. The mean returned here equals the
/// `LocalObjective` route by construction of the same H; the two paths stay
/// independent so they can cross-check each other in tests.
pub fn work_moments_exact(
    state: &PureStateVector,
    h: &HamiltonianTerms,
    u: &Matrix4<C64>,
    delta: f64,
) -> Result<WorkStatistics> {
    validate_unitary(u)?;
    let n = state.norm();
    if (n - 1.0).abs() > 1e-8 {
        return Err(Error::Validation(format!("state norm {n} is not 1")));
    }
    let h_psi = h.apply(&state.amplitudes);
    let phi = state.apply_local_unitary(u);
    let h_phi = h.apply(&phi.amplitudes);

    let e_before: f64 = dot_re(&state.amplitudes, &h_psi);
    let e_after: f64 = dot_re(&phi.amplitudes, &h_phi);
    let mean = e_before - e_after;

    // Dψ = (u†⊗I)Hφ − Hψ; ⟨w²⟩ = ⟨Dψ|Dψ⟩ for the pure state.
    let mut d_psi = PureStateVector {
        amplitudes: h_phi,
        n_modes: state.n_modes,
        fock_cutoff: state.fock_cutoff,
    }
    .apply_local_unitary(&u.adjoint());
    for (d, hp) in d_psi.amplitudes.iter_mut().zip(&h_psi) {
        *d -= hp;
    }
    let second_moment: f64 = d_psi.amplitudes.iter().map(|x| x.norm_sqr()).sum();

    WorkStatistics::from_moments(mean, second_moment, delta)
}

fn dot_re(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum::<f64>()
}
