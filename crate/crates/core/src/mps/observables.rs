//! MPS-side reductions: the 4×4 local extraction objective and work-moment
//! statistics, computed without ever leaving the tensor-network
//! representation.

use nalgebra::{DMatrix, Matrix4};

use super::env::{apply_mpo, expectation_mpo};
use super::mpo::{displacement_op, number_op, MatrixProductOperator};
use super::tensor::MatrixProductState;
use crate::ergotropy::LocalObjective;
use crate::linalg::cr;
use crate::model::{h_system_matrix, DiscretizedBath, ModelParams};
use crate::stats::WorkStatistics;
use crate::{C64, Error, Result};

/// Exact reduction of an MPS to the local objective (ρ_S, χ, e_const).
///
/// χ = tr_E[(I⊗Σλₖ(bₖ+bₖ†))|ψ⟩⟨ψ|] is accumulated with an operator-inserted
/// right-environment sweep: R_B(j) = T_j^op(R_id(j+1)) + T_j^id(R_B(j+1)).
pub fn mps_local_objective(
    mps: &MatrixProductState,
    mpo: &MatrixProductOperator,
    params: &ModelParams,
    bath: &DiscretizedBath,
) -> Result<LocalObjective> {
    if mps.n_modes() != bath.len() {
        return Err(Error::Shape(format!(
            "MPS has {} modes, bath has {}",
            mps.n_modes(),
            bath.len()
        )));
    }
    let n = mps.fock_cutoff;
    let x_op = displacement_op(n);

    let mut r_id = DMatrix::<C64>::identity(1, 1);
    let mut r_b = DMatrix::<C64>::zeros(1, 1);
    for (k, site) in mps.sites.iter().enumerate().skip(2).rev() {
        let lambda = bath.couplings[k - 2];
        let dl = site.left_dim();
        let mut id_next = DMatrix::<C64>::zeros(dl, dl);
        let mut b_next = DMatrix::<C64>::zeros(dl, dl);
        for (p, mp) in site.mats.iter().enumerate() {
            id_next += mp.conjugate() * &r_id * mp.transpose();
            b_next += mp.conjugate() * &r_b * mp.transpose();
            for (pp, mpp) in site.mats.iter().enumerate() {
                let coeff = x_op[(p, pp)] * cr(lambda);
                if coeff != C64::new(0.0, 0.0) {
                    b_next += (mp.conjugate() * &r_id * mpp.transpose()) * coeff;
                }
            }
        }
        r_id = id_next;
        r_b = b_next;
    }

    let v: Vec<DMatrix<C64>> =
        (0..4).map(|q| &mps.sites[0].mats[q / 2] * &mps.sites[1].mats[q % 2]).collect();
    let rho_s = Matrix4::from_fn(|q, qp| (v[qp].conjugate() * &r_id * v[q].transpose())[(0, 0)]);
    let chi = Matrix4::from_fn(|q, qp| (v[qp].conjugate() * &r_b * v[q].transpose())[(0, 0)]);

    let hm = h_system_matrix(params);
    let h_s = Matrix4::from_fn(|i, j| cr(hm[(i, j)]));
    let nop = number_op(n);
    let mut e_const = 0.0;
    for (k, &omega) in bath.frequencies.iter().enumerate() {
        e_const += omega * mps.expect_site_op(2 + k, &nop)?.re;
    }
    let energy = expectation_mpo(mps, mpo)?.re;
    Ok(LocalObjective { rho_s, chi, h_s, e_const, energy })
}

/// Work moments on the MPS engine via exact MPO application:
/// ⟨w²⟩ = ⟨φ|H²|φ⟩ + ⟨ψ|H²|ψ⟩ − 2Re⟨Hφ|(u⊗I)Hψ⟩ with φ = (u⊗I)ψ.
pub fn work_moments_mps(
    mps: &MatrixProductState,
    mpo: &MatrixProductOperator,
    u: &Matrix4<C64>,
    delta: f64,
) -> Result<WorkStatistics> {
    let phi = mps.apply_two_site_gate(u)?;
    let h_psi = apply_mpo(mpo, mps)?;
    let h_phi = apply_mpo(mpo, &phi)?;

    let e_before = mps.inner(&h_psi).re;
    let e_after = phi.inner(&h_phi).re;
    let mean = e_before - e_after;

    let u_h_psi = h_psi.apply_two_site_gate(u)?;
    let second = h_phi.inner(&h_phi).re + h_psi.inner(&h_psi).re
        - 2.0 * h_phi.inner(&u_h_psi).re;
    WorkStatistics::from_moments(mean, second, delta)
}
