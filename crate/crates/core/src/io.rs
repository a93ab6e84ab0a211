//! Output formats: schema-tagged CSV, binary state snapshots, hand-rolled SVG
//! line charts, and the run manifest.
//!
//! Every CSV starts with its schema string as the first comment line. Floats
//! are printed with a fixed `{:.12e}` format so identical runs produce
//! byte-identical files.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::ergotropy::ErgotropyReport;
use crate::exact::PureStateVector;
use crate::mps::{MatrixProductState, SiteTensor};
use crate::stats::WorkStatistics;
use crate::{C64, Error, Result};

pub const TRAJECTORY_SCHEMA: &str = "# schema: oqb.trajectory.v1";
pub const WORK_SCHEMA: &str = "# schema: oqb.work.v1";
pub const ERGOTROPY_SCHEMA: &str = "# schema: oqb.ergotropy.v1";
pub const SWEEP_SCHEMA: &str = "# schema: oqb.sweep.v1";

fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut body = lines.join("\n");
    body.push('\n');
    atomic_write(path, body.as_bytes())
}

/// Write `bytes` to `path` via a temp file + rename in the same directory.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// One sampled point of a time evolution, identical schema in both engines.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryRow {
    pub t: f64,
    pub energy: f64,
    pub norm: f64,
    pub sz_total: f64,
    pub purity: f64,
}

pub fn write_trajectory_csv(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let mut lines = vec![TRAJECTORY_SCHEMA.into(), "t,energy,norm,sz_total,purity".into()];
    for r in rows {
        lines.push(format!(
            "{},{},{},{},{}",
            fmt(r.t),
            fmt(r.energy),
            fmt(r.norm),
            fmt(r.sz_total),
            fmt(r.purity)
        ));
    }
    write_lines(path, &lines)
}

pub fn write_work_csv(path: &Path, rows: &[(f64, WorkStatistics)]) -> Result<()> {
    let mut lines = vec![
        WORK_SCHEMA.into(),
        "t,work,second_moment,variance,rel_fluct,rel_fluct_defined".into(),
    ];
    for (t, s) in rows {
        lines.push(format!(
            "{},{},{},{},{},{}",
            fmt(*t),
            fmt(s.mean),
            fmt(s.second_moment),
            fmt(s.variance),
            fmt_opt(s.rel_fluct),
            s.rel_fluct.is_some()
        ));
    }
    write_lines(path, &lines)
}

pub fn write_ergotropy_csv(path: &Path, rows: &[ErgotropyReport]) -> Result<()> {
    let mut lines = vec![
        ERGOTROPY_SCHEMA.into(),
        "t,e_agnostic,e_ansatz,theta_bar,phi_bar,e_haar_best,e_refined,e_subsystem,delta_so,e_switchoff,e_total,engine"
            .into(),
    ];
    for r in rows {
        lines.push(format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt(r.t),
            fmt_opt(r.e_agnostic),
            fmt_opt(r.e_ansatz),
            fmt_opt(r.theta_bar),
            fmt_opt(r.phi_bar),
            fmt_opt(r.e_haar_best),
            fmt_opt(r.e_refined),
            fmt(r.e_subsystem),
            fmt(r.delta_so),
            fmt(r.e_switchoff),
            fmt(r.e_total),
            r.engine
        ));
    }
    write_lines(path, &lines)
}

/// One g point of a coupling sweep at t = 0.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub g: f64,
    pub e_local: f64,
    pub e_subsystem: f64,
    pub delta_so: f64,
    pub e_switchoff: f64,
    pub rel_fluct: Option<f64>,
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut lines = vec![
        SWEEP_SCHEMA.into(),
        "g,e_local,e_subsystem,delta_so,e_switchoff,rel_fluct".into(),
    ];
    for r in rows {
        lines.push(format!(
            "{},{},{},{},{},{}",
            fmt(r.g),
            fmt(r.e_local),
            fmt(r.e_subsystem),
            fmt(r.delta_so),
            fmt(r.e_switchoff),
            fmt_opt(r.rel_fluct)
        ));
    }
    write_lines(path, &lines)
}

// --- Binary snapshots -------------------------------------------------------
//
// State snapshot layout (all integers u64 little-endian, all floats f64
// little-endian):
//   magic "OQBSTATE" | n_modes | fock_cutoff | dim | dim × (re, im)
//
// MPS snapshot layout:
//   magic "OQBMPS01" | fock_cutoff | site_count |
//   per site: phys_dim | left_dim | right_dim |
//             phys_dim × left_dim × right_dim × (re, im), p-major row-major

const STATE_MAGIC: &[u8; 8] = b"OQBSTATE";
const MPS_MAGIC: &[u8; 8] = b"OQBMPS01";

fn push_u64(buf: &mut Vec<u8>, x: usize) {
    buf.extend_from_slice(&(x as u64).to_le_bytes());
}

fn push_c64(buf: &mut Vec<u8>, z: C64) {
    buf.extend_from_slice(&z.re.to_le_bytes());
    buf.extend_from_slice(&z.im.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Validation("snapshot truncated".into()));
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u64(&mut self) -> Result<usize> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()) as usize)
    }

    fn c64(&mut self) -> Result<C64> {
        let b = self.take(16)?;
        Ok(C64::new(
            f64::from_le_bytes(b[..8].try_into().unwrap()),
            f64::from_le_bytes(b[8..].try_into().unwrap()),
        ))
    }
}

pub fn write_state_snapshot(path: &Path, state: &PureStateVector) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + 16 * state.dim());
    buf.extend_from_slice(STATE_MAGIC);
    push_u64(&mut buf, state.n_modes);
    push_u64(&mut buf, state.fock_cutoff);
    push_u64(&mut buf, state.dim());
    for &z in &state.amplitudes {
        push_c64(&mut buf, z);
    }
    atomic_write(path, &buf)
}

pub fn read_state_snapshot(path: &Path) -> Result<PureStateVector> {
    let bytes = fs::read(path)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(8)? != STATE_MAGIC {
        return Err(Error::Validation("not a state snapshot".into()));
    }
    let n_modes = r.u64()?;
    let fock_cutoff = r.u64()?;
    let dim = r.u64()?;
    if dim != crate::exact::state_dim(n_modes, fock_cutoff)? {
        return Err(Error::Validation("snapshot dimension mismatch".into()));
    }
    let mut amplitudes = Vec::with_capacity(dim);
    for _ in 0..dim {
        amplitudes.push(r.c64()?);
    }
    Ok(PureStateVector { amplitudes, n_modes, fock_cutoff })
}

pub fn write_mps_snapshot(path: &Path, mps: &MatrixProductState) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MPS_MAGIC);
    push_u64(&mut buf, mps.fock_cutoff);
    push_u64(&mut buf, mps.sites.len());
    for site in &mps.sites {
        push_u64(&mut buf, site.phys_dim());
        push_u64(&mut buf, site.left_dim());
        push_u64(&mut buf, site.right_dim());
        for m in &site.mats {
            for row in 0..m.nrows() {
                for col in 0..m.ncols() {
                    push_c64(&mut buf, m[(row, col)]);
                }
            }
        }
    }
    atomic_write(path, &buf)
}

pub fn read_mps_snapshot(path: &Path) -> Result<MatrixProductState> {
    let bytes = fs::read(path)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(8)? != MPS_MAGIC {
        return Err(Error::Validation("not an MPS snapshot".into()));
    }
    let fock_cutoff = r.u64()?;
    let site_count = r.u64()?;
    if site_count < 3 {
        return Err(Error::Validation("MPS snapshot needs ≥ 3 sites".into()));
    }
    let mut sites = Vec::with_capacity(site_count);
    for _ in 0..site_count {
        let d = r.u64()?;
        let dl = r.u64()?;
        let dr = r.u64()?;
        let mut mats = Vec::with_capacity(d);
        for _ in 0..d {
            let mut m = nalgebra::DMatrix::<C64>::zeros(dl, dr);
            for row in 0..dl {
                for col in 0..dr {
                    m[(row, col)] = r.c64()?;
                }
            }
            mats.push(m);
        }
        sites.push(SiteTensor { mats });
    }
    Ok(MatrixProductState { sites, fock_cutoff })
}

// --- SVG line charts --------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Static line chart of (x, y) series with labeled axes and a legend.
pub fn write_svg_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<()> {
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if pts.is_empty() {
        return Err(Error::Validation("SVG chart needs at least one point".into()));
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 - x0 < 1e-300 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-300 {
        let pad = 0.5 * y0.abs().max(1.0);
        y0 -= pad;
        y1 += pad;
    }
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (SVG_W - MARGIN_L - MARGIN_R);
    let py = |y: f64| SVG_H - MARGIN_B - (y - y0) / (y1 - y0) * (SVG_H - MARGIN_T - MARGIN_B);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" \
         viewBox=\"0 0 {SVG_W} {SVG_H}\" font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        SVG_W / 2.0,
        xml_escape(title)
    ));
    // Axes.
    out.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        SVG_H - MARGIN_B,
        SVG_W - MARGIN_R,
        SVG_H - MARGIN_B
    ));
    out.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        SVG_H - MARGIN_B
    ));
    // Ticks.
    for k in 0..=5 {
        let f = k as f64 / 5.0;
        let x = x0 + f * (x1 - x0);
        let y = y0 + f * (y1 - y0);
        out.push_str(&format!(
            "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{0:.1}\" y2=\"{2:.1}\" stroke=\"black\"/>\n\
             <text x=\"{0:.1}\" y=\"{3:.1}\" text-anchor=\"middle\">{4}</text>\n",
            px(x),
            SVG_H - MARGIN_B,
            SVG_H - MARGIN_B + 6.0,
            SVG_H - MARGIN_B + 22.0,
            tick_label(x)
        ));
        out.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{0:.1}\" x2=\"{1:.1}\" y2=\"{0:.1}\" stroke=\"black\"/>\n\
             <text x=\"{2:.1}\" y=\"{3:.1}\" text-anchor=\"end\">{4}</text>\n",
            py(y),
            MARGIN_L - 6.0,
            MARGIN_L - 10.0,
            py(y) + 4.0,
            tick_label(y)
        ));
    }
    // Axis labels.
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        (MARGIN_L + SVG_W - MARGIN_R) / 2.0,
        SVG_H - 10.0,
        xml_escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">{}</text>\n",
        (MARGIN_T + SVG_H - MARGIN_B) / 2.0,
        (MARGIN_T + SVG_H - MARGIN_B) / 2.0,
        xml_escape(y_label)
    ));
    // Series.
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path_pts: Vec<String> =
            s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path_pts.join(" ")
        ));
        let ly = MARGIN_T + 16.0 * k as f64 + 8.0;
        out.push_str(&format!(
            "<line x1=\"{0:.1}\" y1=\"{ly:.1}\" x2=\"{1:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{2:.1}\" y=\"{3:.1}\">{4}</text>\n",
            SVG_W - MARGIN_R - 150.0,
            SVG_W - MARGIN_R - 125.0,
            SVG_W - MARGIN_R - 118.0,
            ly + 4.0,
            xml_escape(&s.label)
        ));
    }
    out.push_str("</svg>\n");
    atomic_write(path, out.as_bytes())
}

fn tick_label(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 1e-2 && x.abs() < 1e4 {
        format!("{x:.3}")
    } else {
        format!("{x:.2e}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

// --- Run manifest -----------------------------------------------------------

/// Deterministic record of a run: config snapshot, version, seeds, tolerances,
/// warnings, stage names, and the output files produced.
///
/// Wall-clock timings are written to a separate `timings.json` so the manifest
/// itself stays byte-identical across repeated seeded runs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub engine_tolerances: Vec<(String, f64)>,
    pub stages: Vec<String>,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(config: serde_json::Value, seed: u64) -> Self {
        Self {
            version: format!("oqb-{}", env!("CARGO_PKG_VERSION")),
            config,
            seed,
            engine_tolerances: Vec::new(),
            stages: Vec::new(),
            warnings: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn tolerance(&mut self, name: &str, value: f64) {
        self.engine_tolerances.push((name.into(), value));
    }

    pub fn stage(&mut self, name: &str) {
        self.stages.push(name.into());
    }

    pub fn warn(&mut self, message: String) {
        self.warnings.push(message);
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_string_lossy().into_owned());
    }

    /// Atomic JSON write; every listed output must already exist.
    pub fn write(&self, path: &Path) -> Result<()> {
        for out in &self.outputs {
            if !Path::new(out).exists() {
                return Err(Error::Validation(format!("manifest lists missing output {out}")));
            }
        }
        let body = serde_json::to_string_pretty(self)?;
        atomic_write(path, body.as_bytes())
    }
}

/// Companion wall-clock record, deliberately outside the determinism contract.
pub fn write_timings(path: &Path, stage_seconds: &[(String, f64)]) -> Result<()> {
    let body = serde_json::to_string_pretty(&stage_seconds)?;
    atomic_write(path, body.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cr;
    use crate::stats::WorkStatistics;

    #[test]
    fn state_snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.bin");
        let mut state = PureStateVector::product_with_vacuum(
            &[cr(0.5), cr(0.5), cr(0.5), cr(0.5)],
            2,
            3,
        )
        .unwrap();
        state.amplitudes[3] = crate::linalg::c(0.1, -0.2);
        write_state_snapshot(&path, &state).unwrap();
        let back = read_state_snapshot(&path).unwrap();
        assert_eq!(back.n_modes, 2);
        assert_eq!(back.fock_cutoff, 3);
        assert_eq!(back.amplitudes, state.amplitudes);
    }

    #[test]
    fn mps_snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mps.bin");
        let mps = MatrixProductState::random(3, 3, 4, 7).unwrap();
        write_mps_snapshot(&path, &mps).unwrap();
        let back = read_mps_snapshot(&path).unwrap();
        assert!((back.fidelity(&mps) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_has_schema_line_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![(
            0.5,
            WorkStatistics::from_moments(2.0, 5.0, 1.0).unwrap(),
        )];
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        write_work_csv(&p1, &rows).unwrap();
        write_work_csv(&p2, &rows).unwrap();
        let b1 = fs::read(&p1).unwrap();
        assert_eq!(b1, fs::read(&p2).unwrap());
        let text = String::from_utf8(b1).unwrap();
        assert!(text.starts_with(WORK_SCHEMA));
        assert!(text.lines().nth(1).unwrap().starts_with("t,work"));
    }

    #[test]
    fn svg_chart_smoke() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chart.svg");
        let series = vec![Series {
            label: "energy".into(),
            points: (0..50).map(|k| (k as f64 * 0.1, (k as f64 * 0.3).sin())).collect(),
        }];
        write_svg_chart(&path, "test", "t", "E", &series).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.contains("<polyline"));
        assert!(text.contains("energy"));
    }

    #[test]
    fn manifest_rejects_missing_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new(serde_json::json!({"g": 0.6}), 1);
        m.output(Path::new("/nonexistent/file.csv"));
        assert!(m.write(&dir.path().join("manifest.json")).is_err());
    }

    #[test]
    fn manifest_writes_valid_json() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("out.csv");
        fs::write(&csv, "# schema\n").unwrap();
        let mut m = RunManifest::new(serde_json::json!({"g": 0.6}), 1);
        m.tolerance("krylov_tol", 1e-10);
        m.stage("ground");
        m.output(&csv);
        let path = dir.path().join("manifest.json");
        m.write(&path).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(v["seed"], 1);
        assert_eq!(v["outputs"][0].as_str().unwrap(), csv.to_string_lossy());
    }
}
