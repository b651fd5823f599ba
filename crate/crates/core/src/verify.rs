//! Sampled falsification of everything the safety guarantee rests on:
//! gradients, the tracking-error bound, CLF decay, the QP closed form and
//! recorded trajectories.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chain::{issf_margin, Barrier, ChainController};
use crate::drd::{
    check_corollary_condition, check_parameter_condition, geometric_clf_2d, geometric_clf_3d, BacksteppingClf,
    CorollaryOutcome, DesiredAttitude, DrdCbf, ParameterSlack, DEFAULT_ETA, REGION_TOLERANCE,
};
use crate::error::Error;
use crate::filter::{cbf_qp_filter, grid_cost, qp_oracle, FilterProblem};
use crate::math::{cos, quat_to_rot, rot_to_quat, rot_x, sin, sqrt, uniform_quaternion, zxz_euler, SampleBox, PI};
use crate::models::{check_dual_relative_degree, DrdReport};
use crate::scenario::{default_chain_box, default_state_box, ClfSpec, Scenario, Suite};
use crate::sim::Trajectory;
use crate::{Result, Vector};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Discretization allowance of the safety monitor.
pub const TOL_H: f64 = 1e-3;
/// Tolerance of `V ≥ ½‖e‖²`.
pub const LEMMA_BOUND_TOL: f64 = 1e-12;
/// Tolerance of `‖e‖ = ‖k̃‖|sin θ|`.
pub const LEMMA_SINE_TOL: f64 = 1e-9;
/// Roundoff allowance on the ISSf margin. Where the nominal violates the
/// constraint badly the margin is `ψ + softplus(−ψ)`, a cancellation of two
/// large terms.
pub const ISSF_ROUNDOFF: f64 = 1e-9;

fn to_vec(x: &Vector) -> Vec<f64> {
    x.iter().copied().collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GradReport {
    pub name: String,
    pub points: usize,
    /// Points where the function or its gradient could not be evaluated.
    pub skipped: usize,
    /// `max ‖∇f − ∇_fd f‖∞ / max(‖∇_fd f‖∞, 1)`.
    pub max_rel_error: f64,
    pub worst_point: Vec<f64>,
    pub tol: f64,
    pub passed: bool,
}

/// Analytic gradient against central differences.
pub fn grad_check(
    name: &str,
    f: impl Fn(&Vector) -> Result<f64>,
    grad: impl Fn(&Vector) -> Result<Vector>,
    points: &[Vector],
    step: f64,
    tol: f64,
) -> GradReport {
    assert!(step > 0.0, "grad_check: step must be positive");
    let mut report = GradReport {
        name: name.into(),
        points: points.len(),
        skipped: 0,
        max_rel_error: 0.0,
        worst_point: Vec::new(),
        tol,
        passed: true,
    };
    for x in points {
        let Ok(g) = grad(x) else {
            report.skipped += 1;
            continue;
        };
        let fd = crate::math::fd_gradient(|z| f(z).unwrap_or(f64::NAN), x, step);
        if fd.iter().any(|v| !v.is_finite()) {
            report.skipped += 1;
            continue;
        }
        let err = (&g - &fd).amax() / fd.amax().max(1.0);
        if err > report.max_rel_error || report.worst_point.is_empty() || err.is_nan() {
            report.max_rel_error = err;
            report.worst_point = to_vec(x);
        }
    }
    report.passed = report.max_rel_error <= tol && report.skipped < report.points;
    report
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LemmaReport {
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    /// Samples where the desired attitude is undefined (`k̃` along the yaw axis).
    pub degenerate: usize,
    pub bound_violations: usize,
    pub sine_violations: usize,
    /// `min (V − ½‖e‖²)`.
    pub min_bound_margin: f64,
    pub max_sine_error: f64,
    pub worst_point: Vec<f64>,
    pub passed: bool,
}

/// Tracking-error bound `V ≥ ½‖e‖²` for the geometric CLFs, with `e` from the
/// projector and `‖e‖ = ‖k̃‖|sin θ|` (θ the Z-X-Z middle angle of `RᵀR_des` in 3D).
pub fn lemma_bound_sampler(dim: usize, n: usize, seed: u64) -> Result<LemmaReport> {
    if !(dim == 2 || dim == 3) {
        return Err(Error::invalid("dim", format!("must be 2 or 3, got {dim}")));
    }
    if n == 0 {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = LemmaReport {
        dim,
        samples: n,
        seed,
        degenerate: 0,
        bound_violations: 0,
        sine_violations: 0,
        min_bound_margin: f64::INFINITY,
        max_sine_error: 0.0,
        worst_point: Vec::new(),
        passed: false,
    };
    for _ in 0..n {
        let norm = 10.0 * rng.random::<f64>();
        let (v, e_norm, sine, point) = if dim == 2 {
            let phi = PI * (2.0 * rng.random::<f64>() - 1.0);
            let theta = PI * (2.0 * rng.random::<f64>() - 1.0);
            let k = [norm * cos(phi), norm * sin(phi)];
            let clf = geometric_clf_2d(k, theta, 0.0, DEFAULT_ETA);
            let b = [cos(theta), sin(theta)];
            let kb = k[0] * b[0] + k[1] * b[1];
            let e = [b[0] * kb - k[0], b[1] * kb - k[1]];
            let e_norm = sqrt(e[0] * e[0] + e[1] * e[1]);
            let rel = clf.theta_des.map_or(0.0, |d| theta - d);
            (clf.value, e_norm, norm * sin(rel).abs(), alloc::vec![k[0], k[1], theta])
        } else {
            let q = uniform_quaternion(rng.random(), rng.random(), rng.random());
            let r = quat_to_rot(&q);
            let z = 2.0 * rng.random::<f64>() - 1.0;
            let az = 2.0 * PI * rng.random::<f64>();
            let s = sqrt(1.0 - z * z);
            let k = Vector3::new(s * cos(az), s * sin(az), z) * norm;
            let yaw = PI * (2.0 * rng.random::<f64>() - 1.0);
            let clf = geometric_clf_3d(&k, &r, yaw, DEFAULT_ETA);
            let r3 = r.column(2).into_owned();
            let e = r3 * r3.dot(&k) - k;
            let sine = match clf.rotation_des {
                Some(rd) => norm * sin(zxz_euler(&(r.transpose() * rd)).1).abs(),
                None if norm > DEFAULT_ETA => {
                    report.degenerate += 1;
                    continue;
                }
                None => e.norm(),
            };
            (clf.value, e.norm(), sine, alloc::vec![k[0], k[1], k[2], q[0], q[1], q[2], q[3], yaw])
        };
        let margin = v - 0.5 * e_norm * e_norm;
        let sine_err = (e_norm - sine).abs();
        if margin < -LEMMA_BOUND_TOL {
            report.bound_violations += 1;
        }
        if sine_err > LEMMA_SINE_TOL {
            report.sine_violations += 1;
        }
        report.max_sine_error = report.max_sine_error.max(sine_err);
        if margin < report.min_bound_margin {
            report.min_bound_margin = margin;
            report.worst_point = point;
        }
    }
    report.passed = report.bound_violations == 0 && report.sine_violations == 0;
    Ok(report)
}

/// Structured states added to the random ones, placed where the second
/// channel cannot act on `V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayProbe {
    None,
    /// Heading state at `index`: probes `θ = θ_des` and `θ = θ_des + π`.
    Heading {
        index: usize,
    },
    /// Backstepping rate: probes `ω = k_ω(x)`.
    Rate(BacksteppingClf),
    /// Quaternion at `index`: probes `R = R_des` and `R = R_des R_x(π)`.
    Attitude {
        index: usize,
    },
}

impl DecayProbe {
    pub fn for_clf(spec: &ClfSpec, sc_clf: Option<BacksteppingClf>) -> Self {
        match (spec, sc_clf) {
            (ClfSpec::Backstepping { .. }, Some(c)) => DecayProbe::Rate(c),
            (ClfSpec::Geometric { .. }, _) => DecayProbe::Heading { index: 2 },
            (ClfSpec::So3 { .. }, _) => DecayProbe::Attitude { index: 6 },
            _ => DecayProbe::None,
        }
    }

    fn expand(&self, drd: &DrdCbf, x: &Vector) -> Vec<Vector> {
        let Ok(eval) = drd.evaluate(x, None) else { return Vec::new() };
        let with = |i: usize, v: f64| {
            let mut z = x.clone();
            z[i] = v;
            drd.system.normalize(&mut z);
            z
        };
        match (self, eval.clf.attitude) {
            (DecayProbe::Heading { index }, DesiredAttitude::Heading(th)) => {
                alloc::vec![with(*index, th), with(*index, th + PI)]
            }
            (DecayProbe::Rate(clf), _) => clf
                .rate_target(drd.system.as_ref(), drd.khat.as_ref(), x, None)
                .map(|(rate, _, _)| alloc::vec![with(clf.rate_index, rate.k_omega)])
                .unwrap_or_default(),
            (DecayProbe::Attitude { index }, DesiredAttitude::Rotation(rd)) => [rd, rd * rot_x(PI)]
                .iter()
                .map(|r| {
                    let q = rot_to_quat(r);
                    let mut z = x.clone();
                    for k in 0..4 {
                        z[index + k] = q[k];
                    }
                    z
                })
                .collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DecayReport {
    pub samples: usize,
    pub probes: usize,
    pub skipped: usize,
    /// The second channel can push `V̇` arbitrarily low.
    pub second_channel: usize,
    /// `L_{g₂}V = 0` but `L_{f₁}V ≤ −λV` along `f₁ = f + g₁k₁`.
    pub drift_decays: usize,
    /// No decay on the region, but the first channel can raise `h`.
    pub region_vacuous: usize,
    /// No decay on the region, drift alone keeps `ḣ ≥ −γh`.
    pub region_checked: usize,
    pub counterexamples: usize,
    /// Up to 32 states with no decay on the region.
    pub region_states: Vec<Vec<f64>>,
    pub worst_counterexample: Option<Vec<f64>>,
    pub passed: bool,
}

/// Classifies each state by how the tracking CLF's decay is obtained, and
/// where it is not, by the drift condition on `h`.
pub fn clf_decay_sampler(
    drd: &DrdCbf,
    bounds: &SampleBox,
    n: usize,
    seed: u64,
    probe: DecayProbe,
) -> Result<DecayReport> {
    if n == 0 {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    let sys = drd.system.as_ref();
    let lambda = drd.clf.lambda();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = bounds.uniform_points(n, &mut rng);
    for x in points.iter_mut() {
        sys.normalize(x);
    }
    let probes: Vec<Vector> = points.iter().flat_map(|x| probe.expand(drd, x)).collect();
    let mut report = DecayReport {
        samples: n,
        probes: probes.len(),
        skipped: 0,
        second_channel: 0,
        drift_decays: 0,
        region_vacuous: 0,
        region_checked: 0,
        counterexamples: 0,
        region_states: Vec::new(),
        worst_counterexample: None,
        passed: false,
    };
    let mut worst = 0.0;
    for x in points.iter().chain(&probes) {
        let Ok(eval) = drd.evaluate(x, None) else {
            report.skipped += 1;
            continue;
        };
        let grad_v = &eval.clf.gradient;
        if (sys.g2(x).transpose() * grad_v).amax() > REGION_TOLERANCE {
            report.second_channel += 1;
            continue;
        }
        let f1 = sys.drift(x) + sys.g1(x) * &eval.clf.target.k1;
        let vdot = grad_v.dot(&f1);
        if vdot <= -lambda * eval.v + 1e-9 * eval.v.abs().max(1.0) {
            report.drift_decays += 1;
            continue;
        }
        if report.region_states.len() < 32 {
            report.region_states.push(to_vec(x));
        }
        match check_corollary_condition(drd, x, REGION_TOLERANCE)? {
            CorollaryOutcome::Vacuous | CorollaryOutcome::NotApplicable => report.region_vacuous += 1,
            CorollaryOutcome::Holds { .. } => report.region_checked += 1,
            CorollaryOutcome::Violated { residual } => {
                report.counterexamples += 1;
                if residual < worst {
                    worst = residual;
                    report.worst_counterexample = Some(to_vec(x));
                }
            }
        }
    }
    report.passed = report.counterexamples == 0 && report.skipped < n + report.probes;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AuditReport {
    pub rows: usize,
    pub gamma: f64,
    pub tol: f64,
    /// Steps violating `h_{k+1} − h_k ≥ −γh_kΔt − tol·Δt`.
    pub decay_violations: usize,
    /// `min (h_{k+1} − h_k + γh_kΔt)/Δt`.
    pub min_decay_margin: f64,
    pub worst_time: f64,
    /// Rows with `h ≥ 0` but `h₀ < −tol`.
    pub membership_violations: usize,
    /// Rows with `h ≥ 0` but `h₀ < h − 1e−12`.
    pub inclusion_violations: usize,
    pub passed: bool,
}

/// Discrete check of `ḣ ≥ −γh` and of `h ≥ 0 ⇒ h₀ ≥ h` along a recorded run.
pub fn audit_trajectory(traj: &Trajectory, gamma: f64, tol: f64) -> AuditReport {
    let c = &traj.cert;
    let mut report = AuditReport {
        rows: traj.len(),
        gamma,
        tol,
        decay_violations: 0,
        min_decay_margin: f64::INFINITY,
        worst_time: 0.0,
        membership_violations: 0,
        inclusion_violations: 0,
        passed: false,
    };
    for k in 0..traj.len().saturating_sub(1) {
        let dt = traj.t[k + 1] - traj.t[k];
        let margin = (c[k + 1].h - c[k].h + gamma * c[k].h * dt) / dt;
        if margin < -tol {
            report.decay_violations += 1;
        }
        if margin < report.min_decay_margin {
            report.min_decay_margin = margin;
            report.worst_time = traj.t[k];
        }
    }
    for row in c.iter().filter(|r| r.h >= 0.0) {
        if row.h0 < -tol {
            report.membership_violations += 1;
        }
        if row.h0 < row.h - 1e-12 {
            report.inclusion_violations += 1;
        }
    }
    report.passed =
        report.decay_violations == 0 && report.membership_violations == 0 && report.inclusion_violations == 0;
    report
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MonitorReport {
    pub starts_safe: bool,
    pub min_h: f64,
    pub min_h0: f64,
    pub infeasible: usize,
    pub passed: bool,
}

/// Runs starting in `h ≥ 0` keep `h ≥ −tol`; wherever `h ≥ 0`, `h₀ ≥ −tol`.
pub fn safety_monitor(traj: &Trajectory, tol: f64) -> MonitorReport {
    let starts_safe = traj.cert.first().is_some_and(|c| c.h >= 0.0);
    let min_h = traj.min_h();
    let contained = traj.cert.iter().all(|c| c.h < 0.0 || c.h0 >= -tol);
    MonitorReport {
        starts_safe,
        min_h,
        min_h0: traj.min_h0(),
        infeasible: traj.infeasible_count(),
        passed: contained && (!starts_safe || min_h >= -tol),
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct QpReport {
    pub problems: usize,
    pub seed: u64,
    pub mismatches: usize,
    /// Largest distance between the closed form and the grid minimiser,
    /// relative to the grid resolution bound.
    pub max_distance_ratio: f64,
    pub min_residual: f64,
    pub passed: bool,
}

/// Closed-form filter against the exhaustive grid on seeded random problems
/// with one to three inputs.
pub fn qp_equivalence(n: usize, seed: u64) -> QpReport {
    const STEPS: [f64; 3] = [0.005, 0.02, 0.08];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = QpReport {
        problems: n,
        seed,
        mismatches: 0,
        max_distance_ratio: 0.0,
        min_residual: f64::INFINITY,
        passed: false,
    };
    for i in 0..n {
        let m = 1 + i % 3;
        let step = STEPS[m - 1];
        let nominal = Vector::from_fn(m, |_, _| 2.0 * rng.random::<f64>() - 1.0);
        // One problem in ten has a vanishing row.
        let degenerate = i % 10 == 9;
        let row = if degenerate {
            Vector::zeros(m)
        } else {
            loop {
                let a = Vector::from_fn(m, |_, _| 2.0 * rng.random::<f64>() - 1.0);
                if a.norm() >= 0.1 {
                    break a;
                }
            }
        };
        // Signed distance from the nominal to the constraint boundary in [−1, 2].
        let depth = 3.0 * rng.random::<f64>() - 1.0;
        let offset = if degenerate { depth } else { -depth * row.norm() - row.dot(&nominal) };
        let p = FilterProblem { nominal, row, offset };
        let out = cbf_qp_filter(&p);
        if !degenerate {
            report.min_residual = report.min_residual.min(out.residual);
        }
        let delta = step * sqrt(m as f64);
        let d = depth.max(0.0);
        match qp_oracle(&p, d + 3.0 * step, step) {
            None => {
                if !out.infeasible {
                    report.mismatches += 1;
                }
            }
            Some(u) => {
                let bound = sqrt(2.0 * d * delta + delta * delta) + 1e-12;
                let ratio = (&u - &out.input).norm() / bound;
                let ok = !out.infeasible && ratio <= 1.0 && grid_cost(&p, &out.input) <= grid_cost(&p, &u) + 1e-12;
                report.max_distance_ratio = report.max_distance_ratio.max(ratio);
                if !ok {
                    report.mismatches += 1;
                }
            }
        }
    }
    report.passed = report.mismatches == 0 && report.min_residual >= -1e-10;
    report
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct IssfSample {
    pub samples: usize,
    /// Points inside the output safe set that were actually checked.
    pub checked: usize,
    pub min_margin: f64,
    pub worst_point: Vec<f64>,
    pub passed: bool,
}

/// Input-to-state-safe inequality for the chain feedback on the part of the
/// box inside the output safe set `h₀ ≥ 0`.
pub fn issf_on_safe_set(
    barrier: &dyn Barrier,
    khat: &dyn ChainController,
    gamma: f64,
    epsilon: f64,
    bounds: &SampleBox,
    n: usize,
) -> IssfSample {
    let mut out =
        IssfSample { samples: n, checked: 0, min_margin: f64::INFINITY, worst_point: Vec::new(), passed: false };
    for yh in bounds.halton_points(n) {
        if barrier.value(&yh) < 0.0 {
            continue;
        }
        out.checked += 1;
        let m = issf_margin(barrier, gamma, epsilon, &yh, &khat.eval(&yh));
        if m < out.min_margin {
            out.min_margin = m;
            out.worst_point = to_vec(&yh);
        }
    }
    out.passed = out.checked > 0 && out.min_margin > -ISSF_ROUNDOFF;
    out
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RunAudit {
    pub run: usize,
    pub audit: AuditReport,
    pub monitor: MonitorReport,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "suite", content = "report", rename_all = "snake_case"))]
pub enum SuiteDetail {
    DualRelativeDegree(DrdReport),
    ParameterCondition(ParameterSlack),
    Issf(IssfSample),
    Gradients(Vec<GradReport>),
    Lemma(Vec<LemmaReport>),
    ClfDecay(DecayReport),
    QpEquivalence(QpReport),
    TrajectoryAudit(Vec<RunAudit>),
}

impl SuiteDetail {
    pub fn passed(&self) -> bool {
        match self {
            SuiteDetail::DualRelativeDegree(r) => r.passed,
            SuiteDetail::ParameterCondition(r) => r.passed,
            SuiteDetail::Issf(r) => r.passed,
            SuiteDetail::Gradients(r) => r.iter().all(|g| g.passed),
            SuiteDetail::Lemma(r) => r.iter().all(|l| l.passed),
            SuiteDetail::ClfDecay(r) => r.passed,
            SuiteDetail::QpEquivalence(r) => r.passed,
            SuiteDetail::TrajectoryAudit(r) => r.iter().all(|a| a.audit.passed && a.monitor.passed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct VerifyReport {
    pub scenario: String,
    pub seed: u64,
    pub samples: usize,
    pub suites: Vec<SuiteDetail>,
    pub passed: bool,
}

/// Runs the suites named in the scenario's `verify` block.
pub fn run_suites(sc: &Scenario) -> Result<VerifyReport> {
    let spec = sc.verify.as_ref().ok_or_else(|| Error::invalid("verify", "scenario has no verify block"))?;
    if spec.suites.is_empty() {
        return Err(Error::invalid("verify.suites", "suite list is empty"));
    }
    if spec.samples == 0 {
        return Err(Error::invalid("verify.samples", "need at least one sample"));
    }
    let built = sc.build()?;
    let drd = &built.drd;
    let sys = built.system.as_ref();
    let chain = drd.barrier.chain();
    let state_box = spec.state_box.clone().unwrap_or_else(|| default_state_box(sc));
    let chain_box = spec.chain_box.clone().unwrap_or_else(|| default_chain_box(sc, chain.p, chain.r));
    if state_box.dim() != sys.state_dim() || chain_box.dim() != chain.dim() {
        return Err(Error::Dimension("verify box does not match the model".into()));
    }
    let seed = sc.sim.seed;
    let n = spec.samples;
    let states = || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = state_box.uniform_points(n, &mut rng);
        for x in pts.iter_mut() {
            sys.normalize(x);
        }
        pts
    };

    let mut suites = Vec::new();
    for suite in &spec.suites {
        let detail = match suite {
            Suite::DualRelativeDegree => {
                SuiteDetail::DualRelativeDegree(check_dual_relative_degree(sys, &states(), 1e-6))
            }
            Suite::ParameterCondition => SuiteDetail::ParameterCondition(check_parameter_condition(
                drd.gamma,
                drd.epsilon,
                drd.mu,
                drd.clf.beta(),
                drd.clf.lambda(),
            )?),
            Suite::Issf => SuiteDetail::Issf(issf_on_safe_set(
                drd.barrier.as_ref(),
                drd.khat.as_ref(),
                drd.gamma,
                drd.epsilon,
                &chain_box,
                n,
            )),
            Suite::Gradients => {
                let pts = states();
                let chain_pts = chain_box.halton_points(n);
                let b = drd.barrier.as_ref();
                let clf_value = |x: &Vector| drd.evaluate(x, None).map(|e| e.v);
                let clf_grad = |x: &Vector| drd.evaluate(x, None).map(|e| e.clf.gradient);
                SuiteDetail::Gradients(alloc::vec![
                    grad_check("h0", |y| Ok(b.value(y)), |y| Ok(b.gradient(y)), &chain_pts, 1e-6, 1e-4),
                    grad_check("V", clf_value, clf_grad, &pts, 1e-6, 1e-4),
                    grad_check("h", |x| drd.value(x), |x| drd.gradient(x), &pts, 1e-6, 1e-4),
                ])
            }
            Suite::Lemma => {
                SuiteDetail::Lemma(alloc::vec![lemma_bound_sampler(2, n, seed)?, lemma_bound_sampler(3, n, seed)?])
            }
            Suite::ClfDecay => {
                let probe = DecayProbe::for_clf(&sc.clf, built.backstepping());
                SuiteDetail::ClfDecay(clf_decay_sampler(drd, &state_box, n, seed, probe)?)
            }
            Suite::QpEquivalence => SuiteDetail::QpEquivalence(qp_equivalence(n, seed)),
            Suite::TrajectoryAudit => {
                let mut runs = Vec::new();
                for (i, x0) in built.initial.iter().enumerate() {
                    let traj = built.simulate(x0, true)?;
                    runs.push(RunAudit {
                        run: i,
                        audit: audit_trajectory(&traj, drd.gamma, spec.audit_tol),
                        monitor: safety_monitor(&traj, TOL_H),
                    });
                }
                SuiteDetail::TrajectoryAudit(runs)
            }
        };
        suites.push(detail);
    }
    let passed = suites.iter().all(SuiteDetail::passed);
    Ok(VerifyReport { scenario: sc.name.clone(), seed, samples: n, suites, passed })
}
