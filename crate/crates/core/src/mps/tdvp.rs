//! TDVP time evolution: single-site sweeps once the bond dimensions have
//! saturated, two-site catch-up sweeps while they still grow.
//!
//! Sign convention: every local propagator helper applies exp(−i·dt·H_eff),
//! so dt > 0 is forward evolution and the backward sub-steps of the
//! projector-splitting integrator pass −dt.

use nalgebra::DMatrix;

use super::env::{
    apply_heff0, apply_heff1, apply_heff2, boundary_env, contract_left, contract_right, flatten,
    unflatten, Env,
};
use super::mpo::MatrixProductOperator;
use super::tensor::{MatrixProductState, SiteTensor, TruncationPolicy};
use crate::exact::krylov;
use crate::linalg::svd_truncated;
use crate::{C64, Error, Result};

#[derive(Debug, Clone)]
pub struct TdvpConfig {
    pub dt: f64,
    pub policy: TruncationPolicy,
    /// Krylov subspace for the local exponentials.
    pub krylov_dim: usize,
    /// Local propagation error tolerance per exponential.
    pub tol: f64,
}

impl Default for TdvpConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            policy: TruncationPolicy::default(),
            krylov_dim: 25,
            tol: 1e-9,
        }
    }
}

impl TdvpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.krylov_dim < 2 || !(self.tol > 0.0) {
            return Err(Error::InvalidParams("TDVP needs dt > 0, krylov_dim ≥ 2, tol > 0".into()));
        }
        self.policy.validate()
    }
}

/// Truncation telemetry for the run manifest.
#[derive(Debug, Clone, Default)]
pub struct TdvpReport {
    pub steps: usize,
    pub max_discarded_weight: f64,
    /// Splits whose discarded weight exceeded the policy threshold while the
    /// bond cap was saturated (warning, not fatal).
    pub truncation_warnings: usize,
}

/// Local exponential with automatic step halving when the Krylov subspace
/// cannot meet the error target in one go.
fn local_expm<F>(apply: &F, v: &[C64], dt: f64, m: usize, tol: f64, depth: u32) -> Result<Vec<C64>>
where
    F: Fn(&[C64]) -> Vec<C64>,
{
    match krylov::expm_multiply(apply, v, dt, m, tol) {
        Err(Error::StepSize(_)) if depth < 12 => {
            let half = local_expm(apply, v, dt / 2.0, m, tol, depth + 1)?;
            local_expm(apply, &half, dt / 2.0, m, tol, depth + 1)
        }
        other => other,
    }
}

struct Sweeper<'a> {
    mpo: &'a MatrixProductOperator,
    cfg: &'a TdvpConfig,
    l_envs: Vec<Env>,
    r_envs: Vec<Env>,
    report: TdvpReport,
}

impl<'a> Sweeper<'a> {
    /// Expects `mps` right-canonical (center at 0).
    fn new(mps: &MatrixProductState, mpo: &'a MatrixProductOperator, cfg: &'a TdvpConfig) -> Self {
        let l = mps.len();
        let mut r_envs: Vec<Env> = vec![boundary_env(); l + 1];
        for i in (1..l).rev() {
            r_envs[i] = contract_right(&r_envs[i + 1], &mps.sites[i], &mpo.sites[i]);
        }
        Self {
            mpo,
            cfg,
            l_envs: vec![boundary_env(); l + 1],
            r_envs,
            report: TdvpReport::default(),
        }
    }

    /// A_i ← exp(−i·dt·H_eff1)·A_i.
    fn evolve_site(&self, mps: &mut MatrixProductState, i: usize, dt: f64) -> Result<()> {
        let site = &mps.sites[i];
        let (d, dl, dr) = (site.phys_dim(), site.left_dim(), site.right_dim());
        let v0 = flatten(&site.mats);
        let apply = |v: &[C64]| {
            let mats = unflatten(v, d, dl, dr);
            flatten(&apply_heff1(&self.l_envs[i], &self.mpo.sites[i], &self.r_envs[i + 1], &mats))
        };
        let m = self.cfg.krylov_dim.min(v0.len());
        let v = local_expm(&apply, &v0, dt, m, self.cfg.tol, 0)?;
        mps.sites[i] = SiteTensor { mats: unflatten(&v, d, dl, dr) };
        Ok(())
    }

    /// C ← exp(−i·dt·K_eff)·C for the bond matrix between sites i and i+1.
    /// Requires l_envs[i+1] and r_envs[i+1] to be current.
    fn evolve_bond(&self, c: &DMatrix<C64>, i: usize, dt: f64) -> Result<DMatrix<C64>> {
        let (dl, dr) = (c.nrows(), c.ncols());
        let v0 = flatten(std::slice::from_ref(c));
        let apply = |v: &[C64]| {
            let mats = unflatten(v, 1, dl, dr);
            flatten(std::slice::from_ref(&apply_heff0(
                &self.l_envs[i + 1],
                &self.r_envs[i + 1],
                &mats[0],
            )))
        };
        let m = self.cfg.krylov_dim.min(v0.len());
        let v = local_expm(&apply, &v0, dt, m, self.cfg.tol, 0)?;
        Ok(unflatten(&v, 1, dl, dr).pop().unwrap())
    }

    /// Merged pair block after exp(−i·dt·H_eff2).
    fn evolved_pair_merged(&self, mps: &MatrixProductState, i: usize, dt: f64) -> Result<DMatrix<C64>> {
        let (d1, d2) = (mps.sites[i].phys_dim(), mps.sites[i + 1].phys_dim());
        let (dl, dr) = (mps.sites[i].left_dim(), mps.sites[i + 1].right_dim());
        let block: Vec<DMatrix<C64>> = (0..d1 * d2)
            .map(|q| &mps.sites[i].mats[q / d2] * &mps.sites[i + 1].mats[q % d2])
            .collect();
        let v0 = flatten(&block);
        let apply = |v: &[C64]| {
            let mats = unflatten(v, d1 * d2, dl, dr);
            flatten(&apply_heff2(
                &self.l_envs[i],
                &self.mpo.sites[i],
                &self.mpo.sites[i + 1],
                &self.r_envs[i + 2],
                &mats,
            ))
        };
        let m = self.cfg.krylov_dim.min(v0.len());
        let v = local_expm(&apply, &v0, dt, m, self.cfg.tol, 0)?;
        let mats = unflatten(&v, d1 * d2, dl, dr);
        Ok(DMatrix::from_fn(dl * d1, d2 * dr, |row, col| {
            let (a, p1) = (row / d1, row % d1);
            let (p2, b) = (col / dr, col % dr);
            mats[p1 * d2 + p2][(a, b)]
        }))
    }

    fn record_split(&mut self, discarded: f64, at_cap: bool) {
        self.report.max_discarded_weight = self.report.max_discarded_weight.max(discarded);
        if at_cap && discarded > self.cfg.policy.disc_weight {
            self.report.truncation_warnings += 1;
        }
    }

    /// Evolve pair (i, i+1) by dt and split; `left_to_right` picks which side
    /// keeps the singular weights (the new center).
    fn evolve_pair(
        &mut self,
        mps: &mut MatrixProductState,
        i: usize,
        dt: f64,
        left_to_right: bool,
    ) -> Result<()> {
        let merged = self.evolved_pair_merged(mps, i, dt)?;
        let (d1, d2) = (mps.sites[i].phys_dim(), mps.sites[i + 1].phys_dim());
        let svd = svd_truncated(&merged, self.cfg.policy.max_bond, self.cfg.policy.disc_weight);
        let k = svd.singular_values.len();
        self.record_split(svd.discarded_weight, k == self.cfg.policy.max_bond);
        let kept: f64 = svd.singular_values.iter().map(|s| s * s).sum::<f64>().sqrt();
        if left_to_right {
            let mut sv = DMatrix::<C64>::zeros(k, merged.ncols());
            for r in 0..k {
                let s = svd.singular_values[r] / kept;
                for c in 0..merged.ncols() {
                    sv[(r, c)] = svd.vt[(r, c)] * s;
                }
            }
            mps.sites[i] = SiteTensor::from_merged_lp_r(&svd.u, d1);
            mps.sites[i + 1] = SiteTensor::from_merged_l_pr(&sv, d2);
        } else {
            let mut us = DMatrix::<C64>::zeros(merged.nrows(), k);
            for r in 0..merged.nrows() {
                for c in 0..k {
                    us[(r, c)] = svd.u[(r, c)] * (svd.singular_values[c] / kept);
                }
            }
            mps.sites[i] = SiteTensor::from_merged_lp_r(&us, d1);
            mps.sites[i + 1] = SiteTensor::from_merged_l_pr(&svd.vt, d2);
        }
        Ok(())
    }

    /// Left-to-right half sweep by dt/2. Enters with center at 0 and current
    /// r_envs; leaves with center at the last site and l_envs current.
    fn half_sweep_lr(&mut self, mps: &mut MatrixProductState, half: f64, two_site: bool) -> Result<()> {
        let l = mps.len();
        self.l_envs = vec![boundary_env(); l + 1];
        if two_site {
            for i in 0..l - 1 {
                self.evolve_pair(mps, i, half, true)?;
                self.l_envs[i + 1] = contract_left(&self.l_envs[i], &mps.sites[i], &self.mpo.sites[i]);
                if i + 1 < l - 1 {
                    self.evolve_site(mps, i + 1, -half)?;
                }
            }
        } else {
            for i in 0..l {
                self.evolve_site(mps, i, half)?;
                if i + 1 < l {
                    let d = mps.sites[i].phys_dim();
                    let qr = mps.sites[i].merged_lp_r().qr();
                    let q = qr.q();
                    let c = qr.r();
                    mps.sites[i] = SiteTensor::from_merged_lp_r(&q, d);
                    self.l_envs[i + 1] =
                        contract_left(&self.l_envs[i], &mps.sites[i], &self.mpo.sites[i]);
                    let c = self.evolve_bond(&c, i, -half)?;
                    for m in &mut mps.sites[i + 1].mats {
                        *m = &c * &*m;
                    }
                }
            }
        }
        Ok(())
    }

    /// Right-to-left half sweep by dt/2 (mirror); leaves center at site 0 and
    /// r_envs current for the next step.
    fn half_sweep_rl(&mut self, mps: &mut MatrixProductState, half: f64, two_site: bool) -> Result<()> {
        let l = mps.len();
        if two_site {
            for i in (0..l - 1).rev() {
                self.evolve_pair(mps, i, half, false)?;
                self.r_envs[i + 1] =
                    contract_right(&self.r_envs[i + 2], &mps.sites[i + 1], &self.mpo.sites[i + 1]);
                if i > 0 {
                    self.evolve_site(mps, i, -half)?;
                }
            }
        } else {
            for i in (0..l).rev() {
                self.evolve_site(mps, i, half)?;
                if i > 0 {
                    let d = mps.sites[i].phys_dim();
                    let m = mps.sites[i].merged_l_pr();
                    let qr = m.adjoint().qr();
                    let q = qr.q().adjoint();
                    let c = qr.r().adjoint();
                    mps.sites[i] = SiteTensor::from_merged_l_pr(&q, d);
                    self.r_envs[i] =
                        contract_right(&self.r_envs[i + 1], &mps.sites[i], &self.mpo.sites[i]);
                    let c = self.evolve_bond(&c, i - 1, -half)?;
                    for mm in &mut mps.sites[i - 1].mats {
                        *mm = &*mm * &c;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Are all internal bonds at their policy/representability cap?
fn bonds_saturated(mps: &MatrixProductState, policy: &TruncationPolicy) -> bool {
    let dims = mps.phys_dims();
    let l = dims.len();
    for b in 1..l {
        let left: usize = dims[..b].iter().take(12).product();
        let right: usize = dims[b..].iter().take(12).product();
        let cap = policy.max_bond.min(left).min(right);
        if mps.sites[b].left_dim() < cap {
            return false;
        }
    }
    true
}

/// Evolve `mps` under the MPO Hamiltonian for `horizon` time units in steps of
/// `cfg.dt`, calling `observe(step, t, state)` at t = 0 and after every step.
///
/// Uses two-site (catch-up) sweeps while the bond dimensions still grow and
/// switches to single-site sweeps once saturated. Returns truncation
/// telemetry.
pub fn tdvp_evolve<F>(
    mps: &MatrixProductState,
    mpo: &MatrixProductOperator,
    cfg: &TdvpConfig,
    horizon: f64,
    mut observe: F,
) -> Result<TdvpReport>
where
    F: FnMut(usize, f64, &MatrixProductState) -> Result<()>,
{
    cfg.validate()?;
    let norm = mps.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Validation(format!("state norm {norm} is not 1")));
    }
    let mut state = mps.clone();
    state.canonicalize_right();
    let n_steps = (horizon / cfg.dt).round() as usize;
    observe(0, 0.0, &state)?;

    let mut sweeper = Sweeper::new(&state, mpo, cfg);
    for step in 1..=n_steps {
        let two_site = !bonds_saturated(&state, &cfg.policy);
        let half = cfg.dt / 2.0;
        sweeper.half_sweep_lr(&mut state, half, two_site)?;
        sweeper.half_sweep_rl(&mut state, half, two_site)?;
        observe(step, step as f64 * cfg.dt, &state)?;
    }
    sweeper.report.steps = n_steps;
    Ok(sweeper.report)
}

/// Collect the trajectory; for tests and small instances.
pub fn tdvp_collect(
    mps: &MatrixProductState,
    mpo: &MatrixProductOperator,
    cfg: &TdvpConfig,
    horizon: f64,
) -> Result<(TdvpReport, Vec<(f64, MatrixProductState)>)> {
    let mut out = Vec::new();
    let report = tdvp_evolve(mps, mpo, cfg, horizon, |_, t, s| {
        out.push((t, s.clone()));
        Ok(())
    })?;
    Ok((report, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{assemble_hamiltonian, evolve_collect, KrylovConfig};
    use crate::linalg::cr;
    use crate::model::{discretize_bath, ModelParams};
    use crate::mps::mpo::build_mpo;

    fn params(g: f64) -> ModelParams {
        ModelParams { n_modes: 2, fock_cutoff: 3, g, ..Default::default() }
    }

    fn singlet_vacuum(p: &ModelParams) -> MatrixProductState {
        let s = 1.0 / 2.0_f64.sqrt();
        MatrixProductState::product_with_vacuum(
            &[cr(0.0), cr(s), cr(-s), cr(0.0)],
            p.n_modes,
            p.fock_cutoff,
        )
        .unwrap()
    }

    #[test]
    fn singlet_reduced_state_is_stationary() {
        let p = params(0.6);
        let bath = discretize_bath(&p).unwrap();
        let mpo = build_mpo(&p, &bath, 0.0).unwrap();
        let mps = singlet_vacuum(&p);
        let rho0 = mps.reduce_to_qubits();
        let cfg = TdvpConfig { dt: 0.05, ..Default::default() };
        tdvp_evolve(&mps, &mpo, &cfg, 2.0, |_, _, s| {
            let rho = s.reduce_to_qubits();
            assert!((rho - rho0).norm() < 1e-6);
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn matches_krylov_oracle() {
        let p = params(0.4);
        let bath = discretize_bath(&p).unwrap();
        let mpo = build_mpo(&p, &bath, 0.0).unwrap();
        // A non-trivial product start: (|↑↑⟩+|↓↑⟩)/√2 ⊗ vacuum.
        let s = 1.0 / 2.0_f64.sqrt();
        let mps = MatrixProductState::product_with_vacuum(
            &[cr(s), cr(0.0), cr(s), cr(0.0)],
            p.n_modes,
            p.fock_cutoff,
        )
        .unwrap();
        let cfg = TdvpConfig { dt: 0.02, ..Default::default() };
        let horizon = 5.0;
        let (_, traj) = tdvp_collect(&mps, &mpo, &cfg, horizon).unwrap();

        let h = assemble_hamiltonian(&p, &bath).unwrap();
        let kcfg = KrylovConfig { dt: 0.02, ..Default::default() };
        let dense0 = mps.to_dense().unwrap();
        let oracle = evolve_collect(&dense0, &h, &kcfg, horizon).unwrap();
        assert_eq!(traj.len(), oracle.len());
        for ((t, m), (to, psi)) in traj.iter().zip(&oracle).skip(1).step_by(50) {
            assert!((t - to).abs() < 1e-12);
            let rho = m.reduce_to_qubits();
            let rho_o = psi.reduce_to_qubits();
            assert!((rho - rho_o).norm() < 1e-3, "t={t}: {}", (rho - rho_o).norm());
        }
        // Norm and energy drift.
        let last = &traj.last().unwrap().1;
        assert!((last.norm() - 1.0).abs() < 1e-8);
        let e0 = crate::mps::env::expectation_mpo(&traj[0].1, &mpo).unwrap().re;
        let e1 = crate::mps::env::expectation_mpo(last, &mpo).unwrap().re;
        assert!((e1 - e0).abs() < 1e-6, "energy drift {}", e1 - e0);
    }

    #[test]
    fn halving_dt_improves_accuracy() {
        let p = params(0.5);
        let bath = discretize_bath(&p).unwrap();
        let mpo = build_mpo(&p, &bath, 0.0).unwrap();
        let s = 1.0 / 2.0_f64.sqrt();
        let mps = MatrixProductState::product_with_vacuum(
            &[cr(s), cr(s), cr(0.0), cr(0.0)],
            p.n_modes,
            p.fock_cutoff,
        )
        .unwrap();
        // Bond-limited so the single-site splitting error is what we measure;
        // the reference is the same TDVP flow at a much finer step, which
        // shares the manifold-projection floor.
        let policy = TruncationPolicy { max_bond: 4, disc_weight: 1e-14 };
        let horizon = 1.0;
        let run = |dt: f64| {
            let cfg = TdvpConfig { dt, policy, tol: 1e-11, ..Default::default() };
            let (_, traj) = tdvp_collect(&mps, &mpo, &cfg, horizon).unwrap();
            traj.last().unwrap().1.reduce_to_qubits()
        };
        let reference = run(0.0125);
        let errs: Vec<f64> = [0.2, 0.1].iter().map(|&dt| (run(dt) - reference).norm()).collect();
        assert!(errs[0] / errs[1] >= 2.0, "errors {errs:?}");
    }

    #[test]
    fn rejects_unnormalized_state() {
        let p = params(0.2);
        let bath = discretize_bath(&p).unwrap();
        let mpo = build_mpo(&p, &bath, 0.0).unwrap();
        let mut mps = singlet_vacuum(&p);
        for m in &mut mps.sites[0].mats {
            *m *= cr(2.0);
        }
        assert!(tdvp_evolve(&mps, &mpo, &TdvpConfig::default(), 1.0, |_, _, _| Ok(())).is_err());
    }
}
