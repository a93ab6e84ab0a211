//! Dense state vector of the system-environment compound.
//!
//! Basis ordering (fixed; binary snapshot fixtures depend on it):
//! `index = q + 4·(m₁ + n·m₂ + n²·m₃ + …)` where `q ∈ {0..3}` enumerates the
//! computational qubit basis (↑↑, ↑↓, ↓↑, ↓↓) and `m_i ∈ {0..n-1}` is the Fock
//! occupation of mode i.

use nalgebra::Matrix4;

use crate::parallel;
use crate::{C64, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PureStateVector {
    pub amplitudes: Vec<C64>,
    pub n_modes: usize,
    pub fock_cutoff: usize,
}

/// Total Hilbert-space dimension 4·n^N, or a capacity error if it does not
/// fit comfortably in memory.
pub fn state_dim(n_modes: usize, fock_cutoff: usize) -> Result<usize> {
    let mut dim: usize = 4;
    for _ in 0..n_modes {
        dim = dim
            .checked_mul(fock_cutoff)
            .filter(|&d| d <= 1 << 31)
            .ok_or_else(|| {
                Error::Capacity(format!(
                    "4·{fock_cutoff}^{n_modes} exceeds the exact engine's capacity"
                ))
            })?;
    }
    Ok(dim)
}

impl PureStateVector {
    pub fn zeros(n_modes: usize, fock_cutoff: usize) -> Result<Self> {
        let dim = state_dim(n_modes, fock_cutoff)?;
        Ok(Self {
            amplitudes: vec![C64::new(0.0, 0.0); dim],
            n_modes,
            fock_cutoff,
        })
    }

    /// Product state: a 4-component qubit vector tensored with the bath vacuum.
    pub fn product_with_vacuum(
        qubits: &[C64; 4],
        n_modes: usize,
        fock_cutoff: usize,
    ) -> Result<Self> {
        let mut state = Self::zeros(n_modes, fock_cutoff)?;
        state.amplitudes[..4].copy_from_slice(qubits);
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for a in &mut self.amplitudes {
                *a /= n;
            }
        }
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// |⟨self|other⟩|².
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Apply a unitary on the qubit pair, identity on the bath.
    pub fn apply_local_unitary(&self, u: &Matrix4<C64>) -> Self {
        let dim = self.dim();
        let amps = &self.amplitudes;
        let amplitudes = parallel::build_vec(dim, |i| {
            let q = i % 4;
            let base = i - q;
            let mut acc = C64::new(0.0, 0.0);
            for qp in 0..4 {
                acc += u[(q, qp)] * amps[base + qp];
            }
            acc
        });
        Self {
            amplitudes,
            n_modes: self.n_modes,
            fock_cutoff: self.fock_cutoff,
        }
    }

    /// Partial trace over the bath: 4×4 reduced qubit density matrix.
    pub fn reduce_to_qubits(&self) -> Matrix4<C64> {
        let mut rho = Matrix4::zeros();
        for chunk in self.amplitudes.chunks_exact(4) {
            for q in 0..4 {
                for qp in 0..4 {
                    rho[(q, qp)] += chunk[q] * chunk[qp].conj();
                }
            }
        }
        rho
    }
}

/// tr(ρ²) of a qubit density matrix.
pub fn purity(rho: &Matrix4<C64>) -> f64 {
    (rho * rho).trace().re
}
