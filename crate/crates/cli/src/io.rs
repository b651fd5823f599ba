//! Trajectory CSV files and JSON sidecars.

use std::fs;
use std::path::Path;

use drdcbf_core::scenario::Scenario;
use drdcbf_core::sim::{Certificate, Trajectory};
use drdcbf_core::verify::{safety_monitor, MonitorReport, TOL_H};
use drdcbf_core::Vector;
use serde::{Deserialize, Serialize};

use crate::Failure;

const TAIL: [&str; 7] = ["h", "h0", "V", "e_norm", "slack", "active", "region"];

/// `t,x0..,u0..,h,h0,V,e_norm,slack,active,region`. Infeasibility flags are
/// only counted in the sidecar.
pub fn header(n: usize, m: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..n).map(|i| format!("x{i}")));
    cols.extend((0..m).map(|i| format!("u{i}")));
    cols.extend(TAIL.iter().map(|s| s.to_string()));
    cols
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// CSV text; floats use the shortest representation that parses back exactly.
pub fn to_csv(traj: &Trajectory) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(traj.state_dim(), traj.input_dim()))?;
    for k in 0..traj.len() {
        let c = &traj.cert[k];
        let mut row = vec![traj.t[k].to_string()];
        row.extend(traj.x[k].iter().map(f64::to_string));
        row.extend(traj.u[k].iter().map(f64::to_string));
        row.extend([c.h, c.h0, c.v, c.e_norm, c.slack].iter().map(f64::to_string));
        row.extend([flag(c.active), flag(c.region)].map(String::from));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Failure::Io(e.to_string()))
}

pub fn write_csv(path: &Path, traj: &Trajectory) -> Result<(), Failure> {
    fs::write(path, to_csv(traj)?).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn schema(msg: impl Into<String>) -> Failure {
    Failure::Config(format!("trajectory schema mismatch: {}", msg.into()))
}

pub fn parse_csv(bytes: &[u8]) -> Result<Trajectory, Failure> {
    let mut r = csv::Reader::from_reader(bytes);
    let head: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let n = head.iter().filter(|c| c.starts_with('x')).count();
    let m = head.iter().filter(|c| c.starts_with('u')).count();
    if head != header(n, m) {
        return Err(schema(format!("unexpected header {}", head.join(","))));
    }
    let mut traj = Trajectory { t: Vec::new(), x: Vec::new(), u: Vec::new(), cert: Vec::new() };
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| schema(format!("row {}: {e}", line + 1)))?;
        if vals.len() != head.len() {
            return Err(schema(format!("row {} has {} fields", line + 1, vals.len())));
        }
        let tail = &vals[1 + n + m..];
        traj.t.push(vals[0]);
        traj.x.push(Vector::from_column_slice(&vals[1..1 + n]));
        traj.u.push(Vector::from_column_slice(&vals[1 + n..1 + n + m]));
        traj.cert.push(Certificate {
            h: tail[0],
            h0: tail[1],
            v: tail[2],
            e_norm: tail[3],
            slack: tail[4],
            active: tail[5] != 0.0,
            region: tail[6] != 0.0,
            infeasible: false,
        });
    }
    if traj.is_empty() {
        return Err(schema("no rows"));
    }
    Ok(traj)
}

pub fn read_csv(path: &Path) -> Result<Trajectory, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    parse_csv(&bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub file: String,
    pub initial_state: Vec<f64>,
    pub h_initial: f64,
    pub min_h: f64,
    pub min_h0: f64,
    pub infeasible: usize,
    /// Earliest time after which `h > 0` for the rest of the run.
    pub t_star: Option<f64>,
    pub monitor: MonitorReport,
}

impl RunSummary {
    pub fn new(run: usize, file: String, traj: &Trajectory) -> Self {
        RunSummary {
            run,
            file,
            initial_state: traj.x[0].iter().copied().collect(),
            h_initial: traj.cert[0].h,
            min_h: traj.min_h(),
            min_h0: traj.min_h0(),
            infeasible: traj.infeasible_count(),
            t_star: t_star(traj),
            monitor: safety_monitor(traj, TOL_H),
        }
    }
}

pub fn t_star(traj: &Trajectory) -> Option<f64> {
    let last_bad = traj.cert.iter().rposition(|c| c.h <= 0.0);
    match last_bad {
        None => Some(traj.t[0]),
        Some(k) if k + 1 < traj.len() => Some(traj.t[k + 1]),
        Some(_) => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Sidecar<'a> {
    pub scenario: &'a Scenario,
    pub runs: Vec<RunSummary>,
    pub unfiltered: Vec<RunSummary>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        let c = Certificate {
            h: 0.1,
            h0: 0.2,
            v: 0.003,
            e_norm: 1e-300,
            slack: -0.0,
            active: true,
            region: false,
            infeasible: false,
        };
        Trajectory {
            t: vec![0.0, 0.001],
            x: vec![Vector::from_column_slice(&[0.1, 1.0 / 3.0, -2.5e-17]); 2],
            u: vec![Vector::from_column_slice(&[std::f64::consts::PI, 7.0]); 2],
            cert: vec![c, Certificate { active: false, region: true, ..c }],
        }
    }

    #[test]
    fn header_layout() {
        assert_eq!(header(2, 1).join(","), "t,x0,x1,u0,h,h0,V,e_norm,slack,active,region");
    }

    #[test]
    fn round_trip_is_exact() {
        let tr = sample();
        let bytes = to_csv(&tr).unwrap();
        assert_eq!(parse_csv(&bytes).unwrap(), tr);
        assert_eq!(to_csv(&parse_csv(&bytes).unwrap()).unwrap(), bytes);
    }

    #[test]
    fn rejects_bad_schema() {
        assert!(matches!(parse_csv(b"t,x0,h\n0,1,2\n"), Err(Failure::Config(_))));
        let empty = header(1, 1).join(",") + "\n";
        assert!(matches!(parse_csv(empty.as_bytes()), Err(Failure::Config(_))));
    }

    #[test]
    fn t_star_examples() {
        let mut tr = sample();
        assert_eq!(t_star(&tr), Some(0.0));
        tr.cert[0].h = -1.0;
        assert_eq!(t_star(&tr), Some(0.001));
        tr.cert[1].h = 0.0;
        assert_eq!(t_star(&tr), None);
    }
}
