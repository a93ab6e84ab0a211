//! Charging-and-extraction protocol: the instantaneous charging gate, time
//! evolution under the open Hamiltonian, and per-time extraction policies.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::ergotropy::{
    subsystem_ergotropy, switchoff_ergotropy, switchoff_price, EngineTag, ErgotropyReport,
    LocalObjective,
};
use crate::exact::{
    assemble_hamiltonian, effective_local_objective, evolve_krylov, expect_sz_total,
    ground_state_lanczos, purity, KrylovConfig, PureStateVector,
};
use crate::io::{
    write_ergotropy_csv, write_timings, write_trajectory_csv, write_work_csv, RunManifest,
    TrajectoryRow,
};
use crate::linalg::{cr, sz_total};
use crate::model::{closed_eigensystem, discretize_bath, ClosedEigensystem, ModelParams};
use crate::mps::{
    build_mpo, expectation_mpo, mps_ground_state, mps_local_objective, tdvp_evolve,
    work_moments_mps, MatrixProductState, TdvpConfig, TruncationPolicy,
};
use crate::optimize::{
    ansatz_unitary, grid_search, haar_sample, haar_statistics, pauli_unitary, refine_local,
    OptimizerConfig, PauliCoefficients, TwoQubitUnitary,
};
use crate::stats::{work_moments_exact, WorkStatistics};
use crate::{parallel, C64, Error, Result};

/// The charging gate U_S^(c): the change of basis taking the computational
/// basis to the closed eigenbasis, ↑↑→|2⟩ (singlet), ↑↓→|0⟩, ↓↑→|1⟩, ↓↓→|3⟩.
/// Applied to the decoupled ground state it produces a state dominated by the
/// decoherence-free singlet.
pub fn charging_unitary(eig: &ClosedEigensystem) -> TwoQubitUnitary {
    let (a, b) = (eig.coeff_a, eig.coeff_b);
    let s = 1.0 / 2.0_f64.sqrt();
    Matrix4::new(
        cr(0.0), cr(-b), cr(1.0), cr(a),
        cr(1.0), cr(a), cr(0.0), cr(b),
        cr(-1.0), cr(a), cr(0.0), cr(b),
        cr(0.0), cr(-b), cr(-1.0), cr(a),
    ) * cr(s)
}

/// Apply the charging gate locally to a compound pure state (exact engine).
pub fn charge_exact(
    state: &crate::exact::PureStateVector,
    eig: &ClosedEigensystem,
) -> crate::exact::PureStateVector {
    state.apply_local_unitary(&charging_unitary(eig))
}

/// σz-basis vector of the k-th closed eigenstate as complex amplitudes.
pub fn eigenstate_c64(eig: &ClosedEigensystem, k: usize) -> [C64; 4] {
    let v = eig.eigenvectors[k];
    [cr(v[0]), cr(v[1]), cr(v[2]), cr(v[3])]
}

// --- Run configuration ------------------------------------------------------

/// Seed used when the caller does not supply one; fixed so default runs are
/// reproducible.
pub const DEFAULT_SEED: u64 = 0x6f71_6261;

/// Which engine(s) a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineSelection {
    Exact,
    Mps,
    Both,
}

impl std::str::FromStr for EngineSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "mps" => Ok(Self::Mps),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!(
                "unknown engine {other:?} (expected exact|mps|both)"
            ))),
        }
    }
}

/// Extraction strategies evaluated at each sampled time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractionPolicy {
    /// The inverse charging gate U^(c)†, blind to the evolved state.
    Agnostic,
    /// Grid search over the ferromagnetic-subspace (θ, φ) ansatz.
    AnsatzGrid,
    /// Batch of Haar-random gates; the batch is drawn once per run.
    Haar,
    /// Pauli-coefficient refinement seeded at the best gate found so far.
    Refined,
}

/// MPS-engine knobs used when the run involves the MPS engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpsSettings {
    pub max_bond: usize,
    pub disc_weight: f64,
    pub dmrg_sweeps: usize,
    pub krylov_dim: usize,
    pub tol: f64,
}

impl Default for MpsSettings {
    fn default() -> Self {
        Self {
            max_bond: 64,
            disc_weight: 1e-9,
            dmrg_sweeps: 14,
            krylov_dim: 25,
            tol: 1e-9,
        }
    }
}

impl MpsSettings {
    fn policy(&self) -> TruncationPolicy {
        TruncationPolicy { max_bond: self.max_bond, disc_weight: self.disc_weight }
    }
}

/// Full description of a charge/store/extract run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub params: ModelParams,
    pub engine: EngineSelection,
    /// Evolution horizon, units 1/Δ.
    pub horizon: f64,
    /// Evolution step, units 1/Δ.
    pub dt: f64,
    /// Extraction policies run every `sample_stride`-th step (t = 0 included).
    pub sample_stride: usize,
    pub policies: Vec<ExtractionPolicy>,
    pub optimizer: OptimizerConfig,
    pub mps: MpsSettings,
    pub seed: u64,
    /// When set, CSVs, the manifest and stage timings are written here.
    pub out_dir: Option<PathBuf>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::default(),
            engine: EngineSelection::Exact,
            horizon: 20.0,
            dt: 0.02,
            sample_stride: 50,
            policies: vec![
                ExtractionPolicy::Agnostic,
                ExtractionPolicy::AnsatzGrid,
                ExtractionPolicy::Haar,
                ExtractionPolicy::Refined,
            ],
            optimizer: OptimizerConfig::default(),
            mps: MpsSettings::default(),
            seed: DEFAULT_SEED,
            out_dir: None,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidParams("horizon must be > 0".into()));
        }
        if !(self.dt > 0.0) || self.dt > self.horizon {
            return Err(Error::InvalidParams("dt must be in (0, horizon]".into()));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidParams("sample_stride must be ≥ 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::InvalidParams("at least one extraction policy is required".into()));
        }
        Ok(())
    }

    /// Parse from JSON, rejecting unknown keys.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ProtocolConfig = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("protocol config: {e}"))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ProtocolConfig serializes")
    }

    fn engines(&self) -> Vec<EngineTag> {
        match self.engine {
            EngineSelection::Exact => vec![EngineTag::Exact],
            EngineSelection::Mps => vec![EngineTag::Mps],
            EngineSelection::Both => vec![EngineTag::Exact, EngineTag::Mps],
        }
    }
}

// --- Orchestration ----------------------------------------------------------

/// Everything one engine produced for one run.
#[derive(Debug, Clone)]
pub struct EngineRun {
    pub engine: EngineTag,
    pub ground_energy: f64,
    /// E_c, the energy right after charging.
    pub charged_energy: f64,
    /// One row per evolution step.
    pub trajectory: Vec<TrajectoryRow>,
    /// One row per sampled time.
    pub reports: Vec<ErgotropyReport>,
    /// Agnostic-gate work statistics per sampled time.
    pub work: Vec<(f64, WorkStatistics)>,
    pub warnings: Vec<String>,
}

/// Result of [`run_protocol`]: per-engine series plus the manifest that was
/// (or would be) written.
#[derive(Debug)]
pub struct ProtocolOutput {
    pub runs: Vec<EngineRun>,
    pub manifest: RunManifest,
    /// Files written when the config carries an output directory.
    pub written: Vec<PathBuf>,
}

/// Execute the full charge → store → extract pipeline for every selected
/// engine. Deterministic under a fixed config and seed.
pub fn run_protocol(cfg: &ProtocolConfig) -> Result<ProtocolOutput> {
    cfg.validate()?;
    let config_json = serde_json::to_value(cfg).expect("ProtocolConfig serializes");
    let mut manifest = RunManifest::new(config_json, cfg.seed);
    let mut timings: Vec<(String, f64)> = Vec::new();
    let mut runs = Vec::new();

    for engine in cfg.engines() {
        let started = Instant::now();
        let run = match engine {
            EngineTag::Exact => {
                manifest.tolerance("krylov_tol", KrylovConfig::default().tol);
                run_exact(cfg)?
            }
            EngineTag::Mps => {
                manifest.tolerance("tdvp_tol", cfg.mps.tol);
                manifest.tolerance("disc_weight", cfg.mps.disc_weight);
                run_mps(cfg)?
            }
        };
        manifest.stage(&format!("run_{engine}"));
        for w in &run.warnings {
            manifest.warn(w.clone());
        }
        timings.push((format!("run_{engine}"), started.elapsed().as_secs_f64()));
        runs.push(run);
    }

    let mut written = Vec::new();
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        for run in &runs {
            for (name, writer) in [
                ("trajectory", 0usize),
                ("ergotropy", 1),
                ("work", 2),
            ] {
                let path = dir.join(format!("{name}_{}.csv", run.engine));
                match writer {
                    0 => write_trajectory_csv(&path, &run.trajectory)?,
                    1 => write_ergotropy_csv(&path, &run.reports)?,
                    _ => write_work_csv(&path, &run.work)?,
                }
                manifest.output(&path);
                written.push(path);
            }
        }
        let manifest_path = dir.join("manifest.json");
        manifest.write(&manifest_path)?;
        written.push(manifest_path);
        // Wall-clock timings live beside the manifest so the manifest itself
        // stays byte-identical across repeated runs.
        let timings_path = dir.join("timings.json");
        write_timings(&timings_path, &timings)?;
        written.push(timings_path);
    }

    Ok(ProtocolOutput { runs, manifest, written })
}

fn run_exact(cfg: &ProtocolConfig) -> Result<EngineRun> {
    let p = &cfg.params;
    let bath = discretize_bath(p)?;
    let h = assemble_hamiltonian(p, &bath)?;
    let kcfg = KrylovConfig { dt: cfg.dt, seed: cfg.seed, ..Default::default() };
    let (ground_energy, ground) = ground_state_lanczos(&h, &kcfg)?;

    let eig = closed_eigensystem(p);
    let uc = charging_unitary(&eig);
    let charged = charge_exact(&ground, &eig);
    let h_free = h.with_bias(false);
    let charged_energy = h_free.expectation(&charged);
    if charged_energy <= ground_energy {
        return Err(Error::Validation(format!(
            "charging failed to raise the energy: E_c = {charged_energy} vs E_GS = {ground_energy}"
        )));
    }
    let e_total = charged_energy - ground_energy;
    let uc_inv = uc.adjoint();
    let haar = haar_batch(cfg);

    let mut trajectory = Vec::new();
    let mut reports = Vec::new();
    let mut work = Vec::new();
    evolve_krylov(&charged, &h_free, &kcfg, cfg.horizon, |step, t, state: &PureStateVector| {
        let rho = state.reduce_to_qubits();
        trajectory.push(TrajectoryRow {
            t,
            energy: h_free.expectation(state),
            norm: state.norm(),
            sz_total: expect_sz_total(state),
            purity: purity(&rho),
        });
        if step % cfg.sample_stride != 0 {
            return Ok(());
        }
        let obj = effective_local_objective(state, &h_free);
        reports.push(evaluate_policies(cfg, &obj, &eig, &uc_inv, &haar, t, e_total, EngineTag::Exact)?);
        work.push((t, work_moments_exact(state, &h_free, &uc_inv, p.delta)?));
        Ok(())
    })?;

    Ok(EngineRun {
        engine: EngineTag::Exact,
        ground_energy,
        charged_energy,
        trajectory,
        reports,
        work,
        warnings: Vec::new(),
    })
}

fn run_mps(cfg: &ProtocolConfig) -> Result<EngineRun> {
    let p = &cfg.params;
    let bath = discretize_bath(p)?;
    let mpo = build_mpo(p, &bath, 0.0)?;
    let policy = cfg.mps.policy();
    let (dmrg_report, ground) = mps_ground_state(p, &bath, policy, cfg.mps.dmrg_sweeps, cfg.seed)?;
    let ground_energy = dmrg_report.energy;

    let eig = closed_eigensystem(p);
    let uc = charging_unitary(&eig);
    let charged = ground.apply_two_site_gate(&uc)?;
    let charged_energy = expectation_mpo(&charged, &mpo)?.re;
    if charged_energy <= ground_energy {
        return Err(Error::Validation(format!(
            "charging failed to raise the energy: E_c = {charged_energy} vs E_GS = {ground_energy}"
        )));
    }
    let e_total = charged_energy - ground_energy;
    let uc_inv = uc.adjoint();
    let haar = haar_batch(cfg);

    let tcfg = TdvpConfig {
        dt: cfg.dt,
        policy,
        krylov_dim: cfg.mps.krylov_dim,
        tol: cfg.mps.tol,
    };
    let sz = sz_total();
    let mut trajectory = Vec::new();
    let mut reports = Vec::new();
    let mut work = Vec::new();
    let tdvp_report = tdvp_evolve(&charged, &mpo, &tcfg, cfg.horizon, |step, t, state: &MatrixProductState| {
        let rho = state.reduce_to_qubits();
        trajectory.push(TrajectoryRow {
            t,
            energy: expectation_mpo(state, &mpo)?.re,
            norm: state.norm(),
            sz_total: (rho * sz).trace().re,
            purity: purity(&rho),
        });
        if step % cfg.sample_stride != 0 {
            return Ok(());
        }
        let obj = mps_local_objective(state, &mpo, p, &bath)?;
        reports.push(evaluate_policies(cfg, &obj, &eig, &uc_inv, &haar, t, e_total, EngineTag::Mps)?);
        work.push((t, work_moments_mps(state, &mpo, &uc_inv, p.delta)?));
        Ok(())
    })?;

    let mut warnings = Vec::new();
    if tdvp_report.truncation_warnings > 0 {
        warnings.push(format!(
            "TDVP exceeded the discarded-weight target {} times at the bond cap (max weight {:.3e})",
            tdvp_report.truncation_warnings, tdvp_report.max_discarded_weight
        ));
    }

    Ok(EngineRun {
        engine: EngineTag::Mps,
        ground_energy,
        charged_energy,
        trajectory,
        reports,
        work,
        warnings,
    })
}

/// Haar batch shared by every sampled time of a run, drawn once per run so the
/// per-time statistics are comparable.
fn haar_batch(cfg: &ProtocolConfig) -> Vec<TwoQubitUnitary> {
    if cfg.policies.contains(&ExtractionPolicy::Haar) {
        haar_sample(cfg.optimizer.haar_count, cfg.seed ^ 0x6861_6172)
    } else {
        Vec::new()
    }
}

/// Score every configured policy against one reduced objective.
#[allow(clippy::too_many_arguments)]
fn evaluate_policies(
    cfg: &ProtocolConfig,
    obj: &LocalObjective,
    eig: &ClosedEigensystem,
    uc_inv: &TwoQubitUnitary,
    haar: &[TwoQubitUnitary],
    t: f64,
    e_total: f64,
    engine: EngineTag,
) -> Result<ErgotropyReport> {
    let mut row = ErgotropyReport {
        t,
        e_agnostic: None,
        e_ansatz: None,
        theta_bar: None,
        phi_bar: None,
        e_haar_best: None,
        e_refined: None,
        e_subsystem: subsystem_ergotropy(&obj.rho_s, eig)?,
        delta_so: switchoff_price(obj),
        e_switchoff: switchoff_ergotropy(obj, eig)?,
        e_total,
        engine,
    };
    // The refinement composes a Pauli-exponential correction onto the best
    // gate found by the cheaper policies, so it can only improve on them.
    let mut refine_base = *uc_inv;
    for policy in &cfg.policies {
        match policy {
            ExtractionPolicy::Agnostic => {
                row.e_agnostic = Some(obj.extracted_work_unchecked(uc_inv));
            }
            ExtractionPolicy::AnsatzGrid => {
                let (angles, value) = grid_search(
                    |a| obj.extracted_work_unchecked(&ansatz_unitary(a, uc_inv)),
                    &cfg.optimizer,
                );
                row.e_ansatz = Some(value);
                row.theta_bar = Some(angles.theta);
                row.phi_bar = Some(angles.phi);
                refine_base = ansatz_unitary(angles, uc_inv);
            }
            ExtractionPolicy::Haar => {
                let (best, _, _) = haar_statistics(|u| obj.extracted_work_unchecked(u), haar)?;
                row.e_haar_best = Some(best);
            }
            ExtractionPolicy::Refined => {}
        }
    }
    if cfg.policies.contains(&ExtractionPolicy::Refined) {
        let result = refine_local(
            |p: &PauliCoefficients| {
                obj.extracted_work_unchecked(&(pauli_unitary(p) * refine_base))
            },
            &PauliCoefficients::zeros(),
            &cfg.optimizer,
        )?;
        row.e_refined = Some(result.best_value);
    }
    Ok(row)
}

// --- g sweep ----------------------------------------------------------------

/// Fresh ground state, charge, and report the t = 0 quantities for each g.
/// Independent g points run concurrently.
pub fn sweep_g(cfg: &ProtocolConfig, gs: &[f64]) -> Result<Vec<crate::io::SweepRow>> {
    cfg.params.validate()?;
    if gs.is_empty() {
        return Err(Error::InvalidParams("g grid must be non-empty".into()));
    }
    if let Some(bad) = gs.iter().find(|g| !(**g >= 0.0)) {
        return Err(Error::InvalidParams(format!("g must be ≥ 0, got {bad}")));
    }
    let rows = parallel::map_slice(gs, |&g| sweep_point(cfg, g));
    rows.into_iter().collect()
}

fn sweep_point(cfg: &ProtocolConfig, g: f64) -> Result<crate::io::SweepRow> {
    let p = ModelParams { g, ..cfg.params.clone() };
    let eig = closed_eigensystem(&p);
    let uc = charging_unitary(&eig);
    let uc_inv = uc.adjoint();
    let bath = discretize_bath(&p)?;

    let use_mps = cfg.engine == EngineSelection::Mps;
    let (obj, stats) = if use_mps {
        let mpo = build_mpo(&p, &bath, 0.0)?;
        let (_, ground) =
            mps_ground_state(&p, &bath, cfg.mps.policy(), cfg.mps.dmrg_sweeps, cfg.seed)?;
        let charged = ground.apply_two_site_gate(&uc)?;
        let obj = mps_local_objective(&charged, &mpo, &p, &bath)?;
        let stats = work_moments_mps(&charged, &mpo, &uc_inv, p.delta)?;
        (obj, stats)
    } else {
        let h = assemble_hamiltonian(&p, &bath)?;
        let kcfg = KrylovConfig { seed: cfg.seed, ..Default::default() };
        let (_, ground) = ground_state_lanczos(&h, &kcfg)?;
        let charged = charge_exact(&ground, &eig);
        let h_free = h.with_bias(false);
        let obj = effective_local_objective(&charged, &h_free);
        let stats = work_moments_exact(&charged, &h_free, &uc_inv, p.delta)?;
        (obj, stats)
    };

    Ok(crate::io::SweepRow {
        g,
        e_local: obj.extracted_work_unchecked(&uc_inv),
        e_subsystem: subsystem_ergotropy(&obj.rho_s, &eig)?,
        delta_so: switchoff_price(&obj),
        e_switchoff: switchoff_ergotropy(&obj, &eig)?,
        rel_fluct: stats.rel_fluct,
    })
}

/// Write sweep rows plus manifest into `dir`; shared by the CLI and tests.
pub fn write_sweep_outputs(
    cfg: &ProtocolConfig,
    rows: &[crate::io::SweepRow],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let config_json = serde_json::to_value(cfg).expect("ProtocolConfig serializes");
    let mut manifest = RunManifest::new(config_json, cfg.seed);
    manifest.stage("sweep");
    let csv = dir.join("sweep.csv");
    crate::io::write_sweep_csv(&csv, rows)?;
    manifest.output(&csv);
    let manifest_path = dir.join("manifest.json");
    manifest.write(&manifest_path)?;
    Ok(vec![csv, manifest_path])
}
