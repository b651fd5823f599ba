//! Scenario runner behind the `drdcbf` binary: loading configs, simulating and
//! sweeping, verification reports and SVG plots.

pub mod io;
pub mod plot;

use std::fs;
use std::path::{Path, PathBuf};

use drdcbf_core::scenario::{run_single, Built, Scenario};
use drdcbf_core::sim::Trajectory;
use drdcbf_core::verify::{run_suites, VerifyReport};
use rayon::prelude::*;

use crate::io::{RunSummary, Sidecar};
use crate::plot::Boundary;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    /// Bad config, unreadable input or schema mismatch (exit 2).
    #[error("{0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    /// A safety monitor or verification check failed (exit 1).
    #[error("{0}")]
    Check(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Check(_) => 1,
            Failure::Config(_) | Failure::Io(_) => 2,
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Config(format!("trajectory schema mismatch: {e}"))
    }
}

impl From<drdcbf_core::Error> for Failure {
    fn from(e: drdcbf_core::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

/// Scenario files shipped with the binary.
pub const BUNDLED: [(&str, &str); 4] = [
    ("unicycle_ellipse", include_str!("../scenarios/unicycle_ellipse.json")),
    ("unicycle_obstacle", include_str!("../scenarios/unicycle_obstacle.json")),
    ("planar_quad_obstacle", include_str!("../scenarios/planar_quad_obstacle.json")),
    ("quad3d_geofence", include_str!("../scenarios/quad3d_geofence.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
}

pub fn parse_scenario(text: &str) -> Result<Scenario, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::Config(format!("invalid scenario: {e}")))
}

/// Reads a scenario from a path, falling back to a bundled name, applies
/// overrides and validates it (parameter condition included).
pub fn load_scenario(path: &Path, ov: Overrides) -> Result<Scenario, Failure> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => match path.to_str().and_then(bundled) {
            Some(t) => t.to_string(),
            None => return Err(Failure::Config(format!("{}: {e}", path.display()))),
        },
    };
    let mut sc = parse_scenario(&text)?;
    if let Some(s) = ov.seed {
        sc.sim.seed = s;
    }
    if let Some(dt) = ov.dt {
        sc.sim.dt = dt;
    }
    if let Some(h) = ov.horizon {
        sc.sim.horizon = h;
    }
    sc.validate()?;
    Ok(sc)
}

/// In-memory result of a simulate or sweep command.
pub struct Outcome {
    pub filtered: Vec<(RunSummary, Trajectory)>,
    pub unfiltered: Vec<(RunSummary, Trajectory)>,
}

impl Outcome {
    pub fn monitors_pass(&self) -> bool {
        self.filtered.iter().all(|(s, _)| s.monitor.passed)
    }
}

fn file_name(sc: &Scenario, runs: usize, i: usize, suffix: &str) -> String {
    if runs == 1 {
        format!("{}{suffix}.csv", sc.name)
    } else {
        format!("{}_{i:03}{suffix}.csv", sc.name)
    }
}

/// Runs every initial state (concurrently when `parallel`), merging results in
/// run order.
pub fn run(sc: &Scenario, parallel: bool) -> Result<Outcome, Failure> {
    let built: Built = sc.build()?;
    let count = built.initial.len();
    let one = |i: usize| run_single(sc, &built, i);
    let results = if parallel {
        (0..count).into_par_iter().map(one).collect::<Result<Vec<_>, _>>()?
    } else {
        (0..count).map(one).collect::<Result<Vec<_>, _>>()?
    };
    let mut out = Outcome { filtered: Vec::new(), unfiltered: Vec::new() };
    for r in results {
        let name = file_name(sc, count, r.index, "");
        out.filtered.push((RunSummary::new(r.index, name, &r.filtered), r.filtered));
        if let Some(u) = r.unfiltered {
            let name = file_name(sc, count, r.index, "_unfiltered");
            out.unfiltered.push((RunSummary::new(r.index, name, &u), u));
        }
    }
    Ok(out)
}

/// Writes one CSV per run and the `<name>.json` sidecar into `dir`.
pub fn write_outcome(sc: &Scenario, outcome: &Outcome, dir: &Path) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    for (s, tr) in outcome.filtered.iter().chain(&outcome.unfiltered) {
        io::write_csv(&dir.join(&s.file), tr)?;
    }
    let sidecar = Sidecar {
        scenario: sc,
        runs: outcome.filtered.iter().map(|(s, _)| s.clone()).collect(),
        unfiltered: outcome.unfiltered.iter().map(|(s, _)| s.clone()).collect(),
    };
    let path = dir.join(format!("{}.json", sc.name));
    io::write_json(&path, &sidecar)?;
    Ok(path)
}

pub fn summary_line(s: &RunSummary) -> String {
    format!(
        "{}: h(0) = {:+.4}, min h = {:+.4}, min h0 = {:+.4}, infeasible = {}, monitor {}",
        s.file,
        s.h_initial,
        s.min_h,
        s.min_h0,
        s.infeasible,
        if s.monitor.passed { "pass" } else { "FAIL" }
    )
}

/// Simulate (or sweep) a scenario into `dir`; a failed safety monitor is a `Check` failure.
pub fn cmd_simulate(sc: &Scenario, dir: &Path, parallel: bool) -> Result<Outcome, Failure> {
    let outcome = run(sc, parallel)?;
    write_outcome(sc, &outcome, dir)?;
    Ok(outcome)
}

/// Verification report written to `<dir>/<name>_verify.json`.
pub fn cmd_verify(sc: &Scenario, dir: &Path) -> Result<(VerifyReport, PathBuf), Failure> {
    let report = run_suites(sc)?;
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("{}_verify.json", sc.name));
    io::write_json(&path, &report)?;
    Ok((report, path))
}

/// Reads trajectory CSVs and writes `path.svg` and `channels.svg` into `dir`.
pub fn cmd_plot(files: &[PathBuf], boundary: Option<&Boundary>, dir: &Path) -> Result<[PathBuf; 2], Failure> {
    if files.is_empty() {
        return Err(Failure::Config("no trajectory files given".into()));
    }
    let runs = files.iter().map(|f| io::read_csv(f)).collect::<Result<Vec<_>, _>>()?;
    if runs.iter().any(|r| r.state_dim() < 2) {
        return Err(Failure::Config("trajectory schema mismatch: need at least two state columns".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join("path.svg");
    let channels = dir.join("channels.svg");
    fs::write(&path, plot::path_svg(&runs, boundary)).map_err(|e| Failure::Io(e.to_string()))?;
    fs::write(&channels, plot::channels_svg(&runs)).map_err(|e| Failure::Io(e.to_string()))?;
    Ok([path, channels])
}
