//! Two-site DMRG ground-state search.

use nalgebra::DMatrix;

use super::env::{
    apply_heff2, boundary_env, contract_left, contract_right, expectation_mpo, flatten, unflatten,
    Env,
};
use super::mpo::{build_mpo, MatrixProductOperator};
use super::tensor::{MatrixProductState, SiteTensor, TruncationPolicy};
use crate::exact::krylov;
use crate::linalg::svd_truncated;
use crate::model::{DiscretizedBath, ModelParams};
use crate::{C64, Error, Result};

#[derive(Debug, Clone)]
pub struct DmrgConfig {
    pub policy: TruncationPolicy,
    pub max_sweeps: usize,
    /// Stop when the energy changes by less than this between sweeps.
    pub energy_tol: f64,
    /// Lanczos subspace for the local eigenproblem.
    pub krylov_dim: usize,
    pub seed: u64,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        Self {
            policy: TruncationPolicy::default(),
            max_sweeps: 40,
            energy_tol: 1e-11,
            krylov_dim: 20,
            seed: 0x646d_7267,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DmrgReport {
    pub energy: f64,
    /// ⟨H²⟩ − ⟨H⟩² of the converged state (exact MPO-squared route).
    pub variance: f64,
    pub sweeps_run: usize,
    pub converged: bool,
    pub max_discarded_weight: f64,
}

/// Two-site DMRG on the given MPO starting from `initial`.
///
/// Energy must be non-increasing between sweeps; an increase beyond 1e-10 is
/// reported as an internal-consistency error.
pub fn dmrg_sweeps(
    mpo: &MatrixProductOperator,
    initial: &MatrixProductState,
    cfg: &DmrgConfig,
) -> Result<(DmrgReport, MatrixProductState)> {
    cfg.policy.validate()?;
    if cfg.max_sweeps == 0 {
        return Err(Error::InvalidParams("max_sweeps must be ≥ 1".into()));
    }
    let mut mps = initial.clone();
    mps.canonicalize_right();
    let l = mps.len();

    // Right environments: r_envs[i] covers sites i..L (so r_envs[L] is the
    // boundary); valid for right-canonical tensors to the right of the center.
    let mut r_envs: Vec<Env> = vec![boundary_env(); l + 1];
    for i in (1..l).rev() {
        r_envs[i] = contract_right(&r_envs[i + 1], &mps.sites[i], &mpo.sites[i]);
    }

    let mut last_energy = f64::INFINITY;
    let mut max_disc: f64 = 0.0;
    let mut sweeps_run = 0;
    let mut converged = false;

    for sweep in 0..cfg.max_sweeps {
        sweeps_run = sweep + 1;
        let mut l_envs: Vec<Env> = vec![boundary_env(); l + 1];
        let mut energy = last_energy;

        // Left-to-right half sweep over bonds (i, i+1).
        for i in 0..l - 1 {
            let (e, disc) = optimize_pair(&mut mps, mpo, &l_envs[i], &r_envs[i + 2], i, cfg, true)?;
            energy = e;
            max_disc = max_disc.max(disc);
            l_envs[i + 1] = contract_left(&l_envs[i], &mps.sites[i], &mpo.sites[i]);
        }
        // Right-to-left half sweep.
        for i in (0..l - 1).rev() {
            let (e, disc) = optimize_pair(&mut mps, mpo, &l_envs[i], &r_envs[i + 2], i, cfg, false)?;
            energy = e;
            max_disc = max_disc.max(disc);
            r_envs[i + 1] = contract_right(&r_envs[i + 2], &mps.sites[i + 1], &mpo.sites[i + 1]);
        }

        if energy > last_energy + 1e-10 && sweep > 0 {
            return Err(Error::Convergence(
                format!("DMRG energy rose from {last_energy} to {energy} between sweeps"),
                energy - last_energy,
            ));
        }
        if (last_energy - energy).abs() < cfg.energy_tol {
            converged = true;
            break;
        }
        last_energy = energy;
    }

    mps.canonicalize_right();
    let energy = expectation_mpo(&mps, mpo)?.re;
    let hpsi = super::env::apply_mpo(mpo, &mps)?;
    let h2 = hpsi.inner(&hpsi).re;
    let variance = (h2 - energy * energy).max(0.0);
    Ok((
        DmrgReport {
            energy,
            variance,
            sweeps_run,
            converged,
            max_discarded_weight: max_disc,
        },
        mps,
    ))
}

/// Optimize the two-site block (i, i+1); returns (Ritz energy, discarded
/// weight). `left_to_right` decides where the orthogonality center lands.
#[allow(clippy::too_many_arguments)]
fn optimize_pair(
    mps: &mut MatrixProductState,
    mpo: &MatrixProductOperator,
    l_env: &Env,
    r_env: &Env,
    i: usize,
    cfg: &DmrgConfig,
    left_to_right: bool,
) -> Result<(f64, f64)> {
    let (d1, d2) = (mps.sites[i].phys_dim(), mps.sites[i + 1].phys_dim());
    let (dl, dr) = (mps.sites[i].left_dim(), mps.sites[i + 1].right_dim());
    let block: Vec<DMatrix<C64>> = (0..d1 * d2)
        .map(|q| &mps.sites[i].mats[q / d2] * &mps.sites[i + 1].mats[q % d2])
        .collect();
    let x0 = flatten(&block);
    let dim = x0.len();
    let apply = |v: &[C64]| {
        let mats = unflatten(v, d1 * d2, dl, dr);
        let y = apply_heff2(l_env, &mpo.sites[i], &mpo.sites[i + 1], r_env, &mats);
        flatten(&y)
    };
    let m = cfg.krylov_dim.min(dim);
    let (theta, x) = krylov::lowest_ritz_pair(apply, &x0, m);

    // Split by truncated SVD: rows (a, p1), cols (p2, b).
    let mats = unflatten(&x, d1 * d2, dl, dr);
    let merged = DMatrix::from_fn(dl * d1, d2 * dr, |row, col| {
        let (a, p1) = (row / d1, row % d1);
        let (p2, b) = (col / dr, col % dr);
        mats[p1 * d2 + p2][(a, b)]
    });
    let svd = svd_truncated(&merged, cfg.policy.max_bond, cfg.policy.disc_weight);
    let k = svd.singular_values.len();
    // Renormalize the kept weight so the state stays normalized.
    let kept: f64 = svd.singular_values.iter().map(|s| s * s).sum::<f64>().sqrt();
    if left_to_right {
        let mut right = DMatrix::<C64>::zeros(k, d2 * dr);
        for r in 0..k {
            let s = svd.singular_values[r] / kept;
            for c in 0..d2 * dr {
                right[(r, c)] = svd.vt[(r, c)] * s;
            }
        }
        mps.sites[i] = SiteTensor::from_merged_lp_r(&svd.u, d1);
        mps.sites[i + 1] = SiteTensor::from_merged_l_pr(&right, d2);
    } else {
        let mut left = DMatrix::<C64>::zeros(dl * d1, k);
        for r in 0..dl * d1 {
            for c in 0..k {
                left[(r, c)] = svd.u[(r, c)] * (svd.singular_values[c] / kept);
            }
        }
        mps.sites[i] = SiteTensor::from_merged_lp_r(&left, d1);
        mps.sites[i + 1] = SiteTensor::from_merged_l_pr(&svd.vt, d2);
    }
    Ok((theta, svd.discarded_weight))
}

/// Spec-shaped entry point: DMRG with the bias handled as in the exact engine
/// (solve biased to select the ↑↑ branch, refine and report unbiased).
pub fn dmrg_ground_state(
    mpo: &MatrixProductOperator,
    mpo_biased: &MatrixProductOperator,
    policy: TruncationPolicy,
    sweeps: usize,
    seed: u64,
) -> Result<(DmrgReport, MatrixProductState)> {
    if sweeps == 0 {
        return Err(Error::InvalidParams("sweeps must be ≥ 1".into()));
    }
    let n_modes = mpo.len() - 2;
    let fock = mpo.sites[2].phys_dim();
    let cfg = DmrgConfig { policy, max_sweeps: sweeps, seed, ..Default::default() };
    // Random start with a corner bias toward ↑↑⊗vacuum keeps the search off
    // symmetry-trapped manifolds.
    let mut init = MatrixProductState::random(n_modes, fock, 8.min(policy.max_bond), seed)?;
    let (_, biased_state) = dmrg_sweeps(mpo_biased, &init, &cfg)?;
    init = biased_state;
    dmrg_sweeps(mpo, &init, &cfg)
}

/// Convenience: ground state straight from model parameters.
pub fn mps_ground_state(
    params: &ModelParams,
    bath: &DiscretizedBath,
    policy: TruncationPolicy,
    sweeps: usize,
    seed: u64,
) -> Result<(DmrgReport, MatrixProductState)> {
    let mpo = build_mpo(params, bath, 0.0)?;
    let mpo_biased = build_mpo(params, bath, params.bias_epsilon)?;
    dmrg_ground_state(&mpo, &mpo_biased, policy, sweeps, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{assemble_hamiltonian, ground_state_lanczos, KrylovConfig};
    use crate::model::discretize_bath;

    fn params(g: f64) -> ModelParams {
        ModelParams { n_modes: 3, fock_cutoff: 3, g, ..Default::default() }
    }

    #[test]
    fn decoupled_ground_matches_closed_formula() {
        let p = params(0.0);
        let bath = discretize_bath(&p).unwrap();
        let (report, mps) = mps_ground_state(&p, &bath, TruncationPolicy::default(), 12, 1).unwrap();
        assert!((report.energy - (-2.692582)).abs() < 1e-6, "{}", report.energy);
        assert!(report.variance < 1e-8, "variance {}", report.variance);
        assert!((mps.norm() - 1.0).abs() < 1e-8);
        // Bias selected the ↑↑ branch.
        let rho = mps.reduce_to_qubits();
        assert!(rho[(0, 0)].re > 0.4, "ρ₀₀ = {}", rho[(0, 0)].re);
    }

    #[test]
    fn coupled_ground_matches_lanczos() {
        for g in [0.2, 0.6] {
            let p = params(g);
            let bath = discretize_bath(&p).unwrap();
            let (report, mps) =
                mps_ground_state(&p, &bath, TruncationPolicy::default(), 14, 3).unwrap();
            let h = assemble_hamiltonian(&p, &bath).unwrap();
            let (e_exact, psi) = ground_state_lanczos(&h, &KrylovConfig::default()).unwrap();
            let rel = (report.energy - e_exact).abs() / e_exact.abs();
            assert!(rel < 1e-6, "g={g}: {} vs {e_exact}", report.energy);
            // Variational bound.
            assert!(report.energy >= e_exact - 1e-9);
            // Same physical state (up to phase).
            let fid = mps.to_dense().unwrap().fidelity(&psi);
            assert!(fid > 1.0 - 1e-6, "fidelity {fid}");
        }
    }

    #[test]
    fn more_sweeps_never_hurt() {
        let p = params(0.4);
        let bath = discretize_bath(&p).unwrap();
        let mpo = build_mpo(&p, &bath, 0.0).unwrap();
        let init = MatrixProductState::random(3, 3, 4, 5).unwrap();
        let cfg1 = DmrgConfig { max_sweeps: 1, ..Default::default() };
        let cfg10 = DmrgConfig { max_sweeps: 10, ..Default::default() };
        let (r1, _) = dmrg_sweeps(&mpo, &init, &cfg1).unwrap();
        let (r10, _) = dmrg_sweeps(&mpo, &init, &cfg10).unwrap();
        assert!(r10.energy <= r1.energy + 1e-10);
    }

    #[test]
    fn rejects_zero_sweeps() {
        let p = params(0.2);
        let bath = discretize_bath(&p).unwrap();
        let mpo = build_mpo(&p, &bath, 0.0).unwrap();
        assert!(dmrg_ground_state(&mpo, &mpo, TruncationPolicy::default(), 0, 1).is_err());
    }
}
