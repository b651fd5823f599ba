//! The composite certificate `h = h₀(ŷ) − V/μ`: least-squares pullback of the
//! chain input, the unrealisable part of it, tracking Lyapunov functions for
//! the actuation direction, and the parameter condition tying them together.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};

use crate::chain::{Barrier, ChainController};
use crate::error::Error;
use crate::math::{
    atan2, cos, fd_jacobian, quat_to_rot, quat_to_rot_partials, sin, singular_values, skew, sqrt, wrap_angle,
};
use crate::models::ControlAffineSystem;
use crate::{Matrix, Result, Vector};

/// Largest condition number of `GᵀG` accepted by the pullback.
pub const MAX_CONDITION: f64 = 1e12;
/// `‖k̃‖` below which the desired attitude is undefined and held.
pub const DEFAULT_ETA: f64 = 1e-8;
/// Tolerance for `L_{g₂}V = 0`.
pub const REGION_TOLERANCE: f64 = 1e-9;

/// `(GᵀG)⁻¹Gᵀ`, refusing ill-conditioned `G`.
pub fn left_pseudo_inverse(g: &Matrix, x: &Vector) -> Result<Matrix> {
    if g.ncols() == 1 {
        // single input: GᵀG is the scalar ‖G‖²
        let s = g.norm_squared();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::RankViolation { condition: f64::INFINITY, state: x.iter().copied().collect() });
        }
        return Ok(g.transpose() * (1.0 / s));
    }
    let gram = g.transpose() * g;
    let sv = singular_values(&gram);
    let (hi, lo) = (sv.first().copied().unwrap_or(0.0), sv.last().copied().unwrap_or(0.0));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::RankViolation { condition, state: x.iter().copied().collect() });
    }
    let inv =
        gram.try_inverse().ok_or_else(|| Error::RankViolation { condition, state: x.iter().copied().collect() })?;
    Ok(inv * g.transpose())
}

/// Everything derived from `k̂` at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct ActuationTarget {
    /// Output coordinates `ŷ`.
    pub yh: Vector,
    /// `k̂(ŷ)`.
    pub khat: Vector,
    /// `k̃ = k̂(ŷ) − L_f^r y`, the acceleration the first channel should supply.
    pub ktilde: Vector,
    /// `∂k̃/∂x`, `p × n`.
    pub ktilde_jacobian: Matrix,
    /// `G = L_{g₁}L_f^{r−1}y`.
    pub decoupling: Matrix,
    /// `u₁ = G†k̃`.
    pub k1: Vector,
    /// `e = (GG† − I)k̃`.
    pub error: Vector,
}

pub fn actuation_target(
    sys: &dyn ControlAffineSystem,
    khat: &dyn ChainController,
    x: &Vector,
) -> Result<ActuationTarget> {
    let (r, _) = sys.dual_relative_degree();
    let yh = sys.output_coordinates(x);
    let (k, dk) = khat.eval_with_jacobian(&yh);
    if k.len() != sys.output_dim() {
        return Err(Error::Dimension(format!("k̂ returned {} entries for {} outputs", k.len(), sys.output_dim())));
    }
    let ktilde = &k - sys.lie_drift(x, r);
    let ktilde_jacobian = dk * sys.output_coordinates_jacobian(x) - sys.lie_drift_top_jacobian(x);
    let decoupling = sys.decoupling(x);
    let pinv = left_pseudo_inverse(&decoupling, x)?;
    let k1 = &pinv * &ktilde;
    let error = &decoupling * &k1 - &ktilde;
    Ok(ActuationTarget { yh, khat: k, ktilde, ktilde_jacobian, decoupling, k1, error })
}

/// `u₁ = (L_{g₁}L_f^{r−1}y)† (k̂(ŷ) − L_f^r y)`.
pub fn k1_pullback(sys: &dyn ControlAffineSystem, khat: &dyn ChainController, x: &Vector) -> Result<Vector> {
    Ok(actuation_target(sys, khat, x)?.k1)
}

/// `e = (GG† − I)(k̂(ŷ) − L_f^r y)`.
pub fn tracking_error(sys: &dyn ControlAffineSystem, khat: &dyn ChainController, x: &Vector) -> Result<Vector> {
    Ok(actuation_target(sys, khat, x)?.error)
}

/// Desired orientation of the first actuation channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DesiredAttitude {
    Heading(f64),
    Rotation(Matrix3<f64>),
}

impl DesiredAttitude {
    fn heading(held: Option<&DesiredAttitude>) -> f64 {
        match held {
            Some(DesiredAttitude::Heading(h)) => *h,
            _ => 0.0,
        }
    }
}

/// A tracking CLF evaluated at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct ClfEval {
    pub value: f64,
    pub gradient: Vector,
    pub attitude: DesiredAttitude,
    pub target: ActuationTarget,
}

/// `V(x) ≥ β‖e(x)‖²` with a second-channel input that can force `V̇ ≤ −λV`.
pub trait TrackingClf: Send + Sync {
    fn beta(&self) -> f64;
    fn lambda(&self) -> f64;
    /// `held` is the previous desired attitude, reused where `‖k̃‖ ≤ η`.
    fn evaluate(
        &self,
        sys: &dyn ControlAffineSystem,
        khat: &dyn ChainController,
        x: &Vector,
        held: Option<&DesiredAttitude>,
    ) -> Result<ClfEval>;
}

/// Planar geometric CLF `‖k̃‖²(1 − cos(θ − θ_des))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clf2d {
    pub value: f64,
    /// `∂V/∂k̃`.
    pub d_ktilde: [f64; 2],
    /// `∂V/∂θ`.
    pub d_theta: f64,
    /// `None` when `‖k̃‖ ≤ η`.
    pub theta_des: Option<f64>,
}

/// The actuation direction at heading `θ` is `(cos(θ + offset), sin(θ + offset))`.
///
/// Written as `V = ‖k̃‖² − ‖k̃‖ k̃·b(θ)` so no angle difference is ever wrapped.
pub fn geometric_clf_2d(ktilde: [f64; 2], theta: f64, offset: f64, eta: f64) -> Clf2d {
    let [kx, ky] = ktilde;
    let n = sqrt(kx * kx + ky * ky);
    if n <= eta {
        return Clf2d { value: 0.0, d_ktilde: [0.0; 2], d_theta: 0.0, theta_des: None };
    }
    let (b, db) = ([cos(theta + offset), sin(theta + offset)], [-sin(theta + offset), cos(theta + offset)]);
    let kb = kx * b[0] + ky * b[1];
    Clf2d {
        value: n * n - n * kb,
        d_ktilde: [2.0 * kx - kx / n * kb - n * b[0], 2.0 * ky - ky / n * kb - n * b[1]],
        d_theta: -n * (kx * db[0] + ky * db[1]),
        theta_des: Some(wrap_angle(atan2(ky, kx) - offset)),
    }
}

/// [`geometric_clf_2d`] on a state with a heading angle at `heading_index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadingClf {
    pub heading_index: usize,
    pub offset: f64,
    pub beta: f64,
    pub lambda: f64,
    pub eta: f64,
}

impl HeadingClf {
    /// Unicycle: the first channel pushes along the heading.
    pub fn unicycle(lambda: f64) -> Self {
        HeadingClf { heading_index: 2, offset: 0.0, beta: 0.5, lambda, eta: DEFAULT_ETA }
    }

    /// Planar quadrotor: thrust acts along `(−sin θ, cos θ)`.
    pub fn planar_quad(lambda: f64) -> Self {
        HeadingClf { heading_index: 2, offset: core::f64::consts::FRAC_PI_2, beta: 0.5, lambda, eta: DEFAULT_ETA }
    }

    fn parts(&self, target: &ActuationTarget, x: &Vector) -> Result<Clf2d> {
        if target.ktilde.len() != 2 {
            return Err(Error::Dimension(format!("heading CLF needs 2 outputs, got {}", target.ktilde.len())));
        }
        Ok(geometric_clf_2d([target.ktilde[0], target.ktilde[1]], x[self.heading_index], self.offset, self.eta))
    }

    fn gradient(&self, target: &ActuationTarget, parts: &Clf2d) -> Vector {
        let dk = Vector::from_column_slice(&parts.d_ktilde);
        let mut g = target.ktilde_jacobian.transpose() * dk;
        g[self.heading_index] += parts.d_theta;
        g
    }

    /// `∇_x θ_des`, zero where the target is degenerate.
    fn heading_gradient(&self, target: &ActuationTarget) -> Vector {
        let k = &target.ktilde;
        let n2 = k.norm_squared();
        if sqrt(n2) <= self.eta {
            return Vector::zeros(target.ktilde_jacobian.ncols());
        }
        let j = &target.ktilde_jacobian;
        (j.row(1).transpose() * k[0] - j.row(0).transpose() * k[1]) / n2
    }
}

impl TrackingClf for HeadingClf {
    fn beta(&self) -> f64 {
        self.beta
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn evaluate(
        &self,
        sys: &dyn ControlAffineSystem,
        khat: &dyn ChainController,
        x: &Vector,
        held: Option<&DesiredAttitude>,
    ) -> Result<ClfEval> {
        let target = actuation_target(sys, khat, x)?;
        let parts = self.parts(&target, x)?;
        let heading = parts.theta_des.unwrap_or_else(|| DesiredAttitude::heading(held));
        Ok(ClfEval {
            value: parts.value,
            gradient: self.gradient(&target, &parts),
            attitude: DesiredAttitude::Heading(heading),
            target,
        })
    }
}

/// Backstepping through the angular rate of a heading CLF:
/// `V = V₀ + (ω − k_ω)²/(2μ₂)` with `k_ω = θ̇_des − k_θ sin(θ − θ_des)`.
///
/// `θ̇_des` is taken along the partial closed loop `f + g₁k₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacksteppingClf {
    pub heading: HeadingClf,
    pub rate_index: usize,
    pub mu2: f64,
    pub k_theta: f64,
}

/// Rate-level quantities of [`BacksteppingClf`] at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTarget {
    pub theta_des: f64,
    pub theta_des_rate: f64,
    pub k_omega: f64,
    pub v0: f64,
}

impl BacksteppingClf {
    pub fn planar_quad(lambda: f64, mu2: f64, k_theta: f64) -> Self {
        BacksteppingClf { heading: HeadingClf::planar_quad(lambda), rate_index: 5, mu2, k_theta }
    }

    fn theta_des_rate(&self, sys: &dyn ControlAffineSystem, target: &ActuationTarget, x: &Vector) -> f64 {
        let f1 = sys.drift(x) + sys.g1(x) * &target.k1;
        self.heading.heading_gradient(target).dot(&f1)
    }

    pub fn rate_target(
        &self,
        sys: &dyn ControlAffineSystem,
        khat: &dyn ChainController,
        x: &Vector,
        held: Option<&DesiredAttitude>,
    ) -> Result<(RateTarget, ActuationTarget, Clf2d)> {
        let target = actuation_target(sys, khat, x)?;
        let parts = self.heading.parts(&target, x)?;
        let theta_des = parts.theta_des.unwrap_or_else(|| DesiredAttitude::heading(held));
        let theta_des_rate = self.theta_des_rate(sys, &target, x);
        let theta = x[self.heading.heading_index];
        let k_omega = theta_des_rate - self.k_theta * sin(theta - theta_des);
        Ok((RateTarget { theta_des, theta_des_rate, k_omega, v0: parts.value }, target, parts))
    }
}

impl TrackingClf for BacksteppingClf {
    fn beta(&self) -> f64 {
        self.heading.beta
    }

    fn lambda(&self) -> f64 {
        self.heading.lambda
    }

    fn evaluate(
        &self,
        sys: &dyn ControlAffineSystem,
        khat: &dyn ChainController,
        x: &Vector,
        held: Option<&DesiredAttitude>,
    ) -> Result<ClfEval> {
        let (rate, target, parts) = self.rate_target(sys, khat, x, held)?;
        let theta = x[self.heading.heading_index];
        let s = x[self.rate_index] - rate.k_omega;

        // ∂θ̇_des/∂x numerically; a rank failure nearby surfaces as NaN.
        let rate_of = |z: &Vector| -> Vector {
            let v = actuation_target(sys, khat, z).map_or(f64::NAN, |t| self.theta_des_rate(sys, &t, z));
            Vector::from_element(1, v)
        };
        let d_rate = fd_jacobian(rate_of, x, 1e-6).row(0).transpose();
        if d_rate.iter().any(|v| !v.is_finite()) {
            return Err(Error::RankViolation { condition: f64::INFINITY, state: x.iter().copied().collect() });
        }
        let mut d_heading_err = -self.heading.heading_gradient(&target);
        d_heading_err[self.heading.heading_index] += 1.0;
        let d_k_omega = d_rate - d_heading_err * (self.k_theta * cos(theta - rate.theta_des));

        let mut gradient = self.heading.gradient(&target, &parts) - d_k_omega * (s / self.mu2);
        gradient[self.rate_index] += s / self.mu2;
        Ok(ClfEval {
            value: rate.v0 + s * s / (2.0 * self.mu2),
            gradient,
            attitude: DesiredAttitude::Heading(rate.theta_des),
            target,
        })
    }
}

/// Desired body frame with body-z along `k̃` and heading completed from `yaw`.
/// `None` when `‖k̃‖ ≤ η` or `k̃` is horizontal along the yaw direction.
pub fn desired_rotation(ktilde: &Vector3<f64>, yaw: f64, eta: f64) -> Option<Matrix3<f64>> {
    let n = ktilde.norm();
    if n <= eta {
        return None;
    }
    let b3 = ktilde / n;
    let c = Vector3::new(cos(yaw), sin(yaw), 0.0);
    let w = b3.cross(&c);
    if w.norm() <= 1e-9 {
        return None;
    }
    let b2 = w / w.norm();
    let b1 = b2.cross(&b3);
    Some(Matrix3::from_columns(&[b1, b2, b3]))
}

/// Rotation-matrix CLF `(‖k̃‖²/2) tr(I − RᵀR_des)` and its partials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clf3d {
    pub value: f64,
    pub d_ktilde: Vector3<f64>,
    /// `∂V/∂R` (entrywise), so `∂V/∂q_k = Σ (∂V/∂R) ∘ ∂R/∂q_k`.
    pub d_rotation: Matrix3<f64>,
    pub rotation_des: Option<Matrix3<f64>>,
}

pub fn geometric_clf_3d(ktilde: &Vector3<f64>, rotation: &Matrix3<f64>, yaw: f64, eta: f64) -> Clf3d {
    let Some(rd) = desired_rotation(ktilde, yaw, eta) else {
        return Clf3d { value: 0.0, d_ktilde: Vector3::zeros(), d_rotation: Matrix3::zeros(), rotation_des: None };
    };
    let n = ktilde.norm();
    let n2 = n * n;
    let tr = (rotation.transpose() * rd).trace();

    let b3 = rd.column(2).into_owned();
    let b2 = rd.column(1).into_owned();
    let c = Vector3::new(cos(yaw), sin(yaw), 0.0);
    let w = b3.cross(&c);
    let j_b3 = (Matrix3::identity() - b3 * b3.transpose()) / n;
    let j_w = -skew(&c) * j_b3;
    let j_b2 = (Matrix3::identity() - b2 * b2.transpose()) / w.norm() * j_w;
    let j_b1 = -skew(&b3) * j_b2 + skew(&b2) * j_b3;
    let d_tr = j_b1.transpose() * rotation.column(0)
        + j_b2.transpose() * rotation.column(1)
        + j_b3.transpose() * rotation.column(2);

    Clf3d {
        value: 0.5 * n2 * (3.0 - tr),
        d_ktilde: ktilde * (3.0 - tr) - d_tr * (0.5 * n2),
        d_rotation: -rd * (0.5 * n2),
        rotation_des: Some(rd),
    }
}

/// [`geometric_clf_3d`] on a state carrying a scalar-first quaternion at `quat_index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct So3Clf {
    pub quat_index: usize,
    pub yaw: f64,
    pub beta: f64,
    pub lambda: f64,
    pub eta: f64,
}

impl So3Clf {
    pub fn quadrotor(lambda: f64, yaw: f64) -> Self {
        So3Clf { quat_index: 6, yaw, beta: 0.5, lambda, eta: DEFAULT_ETA }
    }
}

impl TrackingClf for So3Clf {
    fn beta(&self) -> f64 {
        self.beta
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn evaluate(
        &self,
        sys: &dyn ControlAffineSystem,
        khat: &dyn ChainController,
        x: &Vector,
        held: Option<&DesiredAttitude>,
    ) -> Result<ClfEval> {
        let target = actuation_target(sys, khat, x)?;
        if target.ktilde.len() != 3 {
            return Err(Error::Dimension(format!("attitude CLF needs 3 outputs, got {}", target.ktilde.len())));
        }
        let i = self.quat_index;
        let q = [x[i], x[i + 1], x[i + 2], x[i + 3]];
        let kt = Vector3::new(target.ktilde[0], target.ktilde[1], target.ktilde[2]);
        let parts = geometric_clf_3d(&kt, &quat_to_rot(&q), self.yaw, self.eta);
        let mut gradient = target.ktilde_jacobian.transpose() * Vector::from_column_slice(parts.d_ktilde.as_slice());
        for (k, p) in quat_to_rot_partials(&q).iter().enumerate() {
            gradient[i + k] += parts.d_rotation.component_mul(p).sum();
        }
        let attitude = match (parts.rotation_des, held) {
            (Some(r), _) => DesiredAttitude::Rotation(r),
            (None, Some(DesiredAttitude::Rotation(r))) => DesiredAttitude::Rotation(*r),
            (None, _) => DesiredAttitude::Rotation(Matrix3::identity()),
        };
        Ok(ClfEval { value: parts.value, gradient, attitude, target })
    }
}

/// Slack of `λ ≥ γ + εμ/(4β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParameterSlack {
    pub required: f64,
    pub slack: f64,
    pub passed: bool,
}

pub fn check_parameter_condition(gamma: f64, epsilon: f64, mu: f64, beta: f64, lambda: f64) -> Result<ParameterSlack> {
    for (name, v) in [("gamma", gamma), ("epsilon", epsilon), ("mu", mu), ("beta", beta), ("lambda", lambda)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
        }
    }
    let required = gamma + epsilon * mu / (4.0 * beta);
    let slack = lambda - required;
    Ok(ParameterSlack { required, slack, passed: slack >= 0.0 })
}

/// `h(x) = h₀(ŷ(x)) − V(x)/μ`.
#[derive(Clone)]
pub struct DrdCbf {
    pub system: Arc<dyn ControlAffineSystem>,
    pub barrier: Arc<dyn Barrier>,
    pub khat: Arc<dyn ChainController>,
    pub clf: Arc<dyn TrackingClf>,
    pub mu: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrdEval {
    pub h: f64,
    pub h0: f64,
    pub v: f64,
    pub grad_h: Vector,
    /// `∇_x h₀(ŷ(x))`.
    pub grad_h0: Vector,
    pub clf: ClfEval,
}

impl DrdCbf {
    /// Rejects mismatched dimensions and parameters violating `λ ≥ γ + εμ/(4β)`.
    pub fn new(
        system: Arc<dyn ControlAffineSystem>,
        barrier: Arc<dyn Barrier>,
        khat: Arc<dyn ChainController>,
        clf: Arc<dyn TrackingClf>,
        mu: f64,
        gamma: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let chain = barrier.chain();
        let (r, _) = system.dual_relative_degree();
        if chain.p != system.output_dim() || chain.r != r {
            return Err(Error::Dimension(format!(
                "certificate lives on a (p = {}, r = {}) chain, model has p = {}, r = {}",
                chain.p,
                chain.r,
                system.output_dim(),
                r
            )));
        }
        let slack = check_parameter_condition(gamma, epsilon, mu, clf.beta(), clf.lambda())?;
        if !slack.passed {
            return Err(Error::ParameterCondition { lambda: clf.lambda(), required: slack.required });
        }
        Ok(DrdCbf { system, barrier, khat, clf, mu, gamma, epsilon })
    }

    pub fn evaluate(&self, x: &Vector, held: Option<&DesiredAttitude>) -> Result<DrdEval> {
        let clf = self.clf.evaluate(self.system.as_ref(), self.khat.as_ref(), x, held)?;
        let yh = &clf.target.yh;
        let h0 = self.barrier.value(yh);
        let grad_h0 = self.system.output_coordinates_jacobian(x).transpose() * self.barrier.gradient(yh);
        let grad_h = &grad_h0 - &clf.gradient / self.mu;
        Ok(DrdEval { h: h0 - clf.value / self.mu, h0, v: clf.value, grad_h, grad_h0, clf })
    }

    pub fn value(&self, x: &Vector) -> Result<f64> {
        Ok(self.evaluate(x, None)?.h)
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(self.evaluate(x, None)?.grad_h)
    }

    /// `(L_f h, L_g h)` for the full input `u = (u₁, u₂)`.
    pub fn lie(&self, x: &Vector, eval: &DrdEval) -> (f64, Vector) {
        let lf = eval.grad_h.dot(&self.system.drift(x));
        let lg = self.system.actuation(x).transpose() * &eval.grad_h;
        (lf, lg)
    }
}

/// Result of the drift inequality required where `L_{g₂}V = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "outcome", rename_all = "snake_case"))]
pub enum CorollaryOutcome {
    /// `L_{g₂}V ≠ 0`: the second channel can always decrease `V`.
    NotApplicable,
    /// `L_{g₁}h ≠ 0`: the first channel can always raise `h`.
    Vacuous,
    Holds {
        residual: f64,
    },
    Violated {
        residual: f64,
    },
}

impl CorollaryOutcome {
    pub fn passed(&self) -> bool {
        !matches!(self, CorollaryOutcome::Violated { .. })
    }
}

/// On states where the second channel cannot move `V`, checks that
/// `L_{g₁}h = 0` implies `L_f h ≥ −γh`.
pub fn check_corollary_condition(drd: &DrdCbf, x: &Vector, tol: f64) -> Result<CorollaryOutcome> {
    let eval = drd.evaluate(x, None)?;
    let sys = drd.system.as_ref();
    let lg2v = sys.g2(x).transpose() * &eval.clf.gradient;
    if lg2v.amax() > REGION_TOLERANCE {
        return Ok(CorollaryOutcome::NotApplicable);
    }
    let lg1h = sys.g1(x).transpose() * &eval.grad_h;
    if lg1h.amax() > tol {
        return Ok(CorollaryOutcome::Vacuous);
    }
    let residual = eval.grad_h.dot(&sys.drift(x)) + drd.gamma * eval.h;
    Ok(if residual >= 0.0 { CorollaryOutcome::Holds { residual } } else { CorollaryOutcome::Violated { residual } })
}

/// States of a grid that fall in the region `L_{g₂}V = 0`, used by samplers.
pub fn second_channel_blind(drd: &DrdCbf, x: &Vector) -> Result<bool> {
    let eval = drd.evaluate(x, None)?;
    let lg2v: Vec<f64> = (drd.system.g2(x).transpose() * &eval.clf.gradient).iter().copied().collect();
    Ok(lg2v.iter().all(|v| v.abs() <= REGION_TOLERANCE))
}
