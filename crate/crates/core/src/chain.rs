//! Output integrator chains, barrier certificates on their coordinates and
//! smooth input-to-state-safe controllers for them.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::Error;
use crate::math::{fd_jacobian, softplus, softplus_slope, sqrt, SampleBox};
use crate::{Matrix, Result, Vector};

/// `d/dt ŷ = Aŷ + Bv` for `p` outputs differentiated `r` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OutputChainSpec {
    pub p: usize,
    pub r: usize,
}

impl OutputChainSpec {
    pub fn new(p: usize, r: usize) -> Result<Self> {
        if p == 0 || r == 0 {
            return Err(Error::invalid("chain", format!("p and r must be positive, got p = {p}, r = {r}")));
        }
        Ok(OutputChainSpec { p, r })
    }

    pub fn dim(&self) -> usize {
        self.p * self.r
    }

    /// Block shift: identity blocks above the diagonal, zero last block-row.
    pub fn a(&self) -> Matrix {
        let mut a = Matrix::zeros(self.dim(), self.dim());
        for i in 0..self.dim() - self.p {
            a[(i, i + self.p)] = 1.0;
        }
        a
    }

    /// Selects the last block-row.
    pub fn b(&self) -> Matrix {
        let mut b = Matrix::zeros(self.dim(), self.p);
        b.view_mut((self.dim() - self.p, 0), (self.p, self.p)).fill_with_identity();
        b
    }

    /// `Aŷ` without forming `A`.
    pub fn shift(&self, yh: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim());
        let n = self.dim() - self.p;
        out.rows_mut(0, n).copy_from(&yh.rows(self.p, n));
        out
    }

    /// `Aŷ + Bv`.
    pub fn flow(&self, yh: &Vector, v: &Vector) -> Vector {
        let mut out = self.shift(yh);
        out.rows_mut(self.dim() - self.p, self.p).copy_from(v);
        out
    }

    /// `Bᵀz`: the last block of `z`.
    pub fn last_block(&self, z: &Vector) -> Vector {
        z.rows(self.dim() - self.p, self.p).into_owned()
    }
}

/// A scalar certificate `h₀` on output coordinates.
pub trait Barrier: Send + Sync {
    fn chain(&self) -> OutputChainSpec;
    fn value(&self, yh: &Vector) -> f64;
    fn gradient(&self, yh: &Vector) -> Vector;
    fn hessian(&self, yh: &Vector) -> Matrix;
}

/// Position-level constraints `h_b(y) ≥ 0`. All are at most quadratic.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputConstraint {
    /// `1 − (y − c)ᵀ diag(P) (y − c)`.
    Ellipse { center: Vector, diag: Vector },
    /// `‖y − c‖² − r²`.
    Obstacle { center: Vector, radius: f64 },
    /// `limit − y[axis]`.
    Geofence { dim: usize, axis: usize, limit: f64 },
}

impl OutputConstraint {
    pub fn ellipse(center: &[f64], diag: &[f64]) -> Result<Self> {
        if center.len() != diag.len() {
            return Err(Error::Dimension(format!("ellipse center has {} entries, P has {}", center.len(), diag.len())));
        }
        if let Some(bad) = diag.iter().find(|d| !(**d > 0.0)) {
            return Err(Error::invalid("P", format!("ellipse weights must be positive, got {bad}")));
        }
        Ok(OutputConstraint::Ellipse {
            center: Vector::from_column_slice(center),
            diag: Vector::from_column_slice(diag),
        })
    }

    pub fn obstacle(center: &[f64], radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid("r_o", format!("obstacle radius must be positive, got {radius}")));
        }
        Ok(OutputConstraint::Obstacle { center: Vector::from_column_slice(center), radius })
    }

    pub fn geofence(dim: usize, axis: usize, limit: f64) -> Result<Self> {
        if axis >= dim {
            return Err(Error::invalid("axis", format!("geofence axis {axis} out of range for {dim} outputs")));
        }
        Ok(OutputConstraint::Geofence { dim, axis, limit })
    }

    pub fn dim(&self) -> usize {
        match self {
            OutputConstraint::Ellipse { center, .. } | OutputConstraint::Obstacle { center, .. } => center.len(),
            OutputConstraint::Geofence { dim, .. } => *dim,
        }
    }

    pub fn value(&self, y: &Vector) -> f64 {
        match self {
            OutputConstraint::Ellipse { center, diag } => {
                let d = y - center;
                1.0 - d.component_mul(&d).dot(diag)
            }
            OutputConstraint::Obstacle { center, radius } => (y - center).norm_squared() - radius * radius,
            OutputConstraint::Geofence { axis, limit, .. } => limit - y[*axis],
        }
    }

    pub fn gradient(&self, y: &Vector) -> Vector {
        match self {
            OutputConstraint::Ellipse { center, diag } => (y - center).component_mul(diag) * -2.0,
            OutputConstraint::Obstacle { center, .. } => (y - center) * 2.0,
            OutputConstraint::Geofence { dim, axis, .. } => {
                let mut g = Vector::zeros(*dim);
                g[*axis] = -1.0;
                g
            }
        }
    }

    pub fn hessian(&self) -> Matrix {
        match self {
            OutputConstraint::Ellipse { diag, .. } => Matrix::from_diagonal(&(diag * -2.0)),
            OutputConstraint::Obstacle { center, .. } => Matrix::identity(center.len(), center.len()) * 2.0,
            OutputConstraint::Geofence { dim, .. } => Matrix::zeros(*dim, *dim),
        }
    }
}

/// `1 − (y − c)ᵀP(y − c)` for diagonal `P`.
pub fn ellipse_h0(y: &[f64], center: &[f64], diag: &[f64]) -> Result<f64> {
    Ok(OutputConstraint::ellipse(center, diag)?.value(&Vector::from_column_slice(y)))
}

/// `‖y − y_obs‖² − r_o²`.
pub fn obstacle_h(y: &[f64], center: &[f64], radius: f64) -> f64 {
    y.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() - radius * radius
}

/// `x_geo − x`.
pub fn geofence_h(x: f64, limit: f64) -> f64 {
    limit - x
}

/// `h_b(y)` on a single-integrator chain (`r = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Direct(pub OutputConstraint);

impl Barrier for Direct {
    fn chain(&self) -> OutputChainSpec {
        OutputChainSpec { p: self.0.dim(), r: 1 }
    }
    fn value(&self, yh: &Vector) -> f64 {
        self.0.value(yh)
    }
    fn gradient(&self, yh: &Vector) -> Vector {
        self.0.gradient(yh)
    }
    fn hessian(&self, _yh: &Vector) -> Matrix {
        self.0.hessian()
    }
}

/// High-order extension `h₀(y, ẏ) = ∇h_b(y)ᵀẏ + α h_b(y)` on a double integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct Hocbf {
    pub base: OutputConstraint,
    pub alpha: f64,
}

/// Builds [`Hocbf`]; the extension is only defined for chains of order 2.
pub fn hocbf_extend(base: OutputConstraint, alpha: f64, r: usize) -> Result<Hocbf> {
    if r != 2 {
        return Err(Error::invalid("r", format!("high-order extension needs a chain of order 2, got {r}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha_e", format!("must be positive, got {alpha}")));
    }
    Ok(Hocbf { base, alpha })
}

impl Hocbf {
    fn split(&self, yh: &Vector) -> (Vector, Vector) {
        let p = self.base.dim();
        (yh.rows(0, p).into_owned(), yh.rows(p, p).into_owned())
    }
}

impl Barrier for Hocbf {
    fn chain(&self) -> OutputChainSpec {
        OutputChainSpec { p: self.base.dim(), r: 2 }
    }

    fn value(&self, yh: &Vector) -> f64 {
        let (y, v) = self.split(yh);
        self.base.gradient(&y).dot(&v) + self.alpha * self.base.value(&y)
    }

    fn gradient(&self, yh: &Vector) -> Vector {
        let p = self.base.dim();
        let (y, v) = self.split(yh);
        let gb = self.base.gradient(&y);
        let mut g = Vector::zeros(2 * p);
        g.rows_mut(0, p).copy_from(&(self.base.hessian() * v + &gb * self.alpha));
        g.rows_mut(p, p).copy_from(&gb);
        g
    }

    fn hessian(&self, _yh: &Vector) -> Matrix {
        let p = self.base.dim();
        let hb = self.base.hessian();
        let mut h = Matrix::zeros(2 * p, 2 * p);
        h.view_mut((0, 0), (p, p)).copy_from(&(&hb * self.alpha));
        h.view_mut((0, p), (p, p)).copy_from(&hb);
        h.view_mut((p, 0), (p, p)).copy_from(&hb);
        h
    }
}

/// Backstepping extension `h₀(y, ẏ) = h_b(y) − ‖ẏ − k_v(y)‖² / (2μ_b)`.
///
/// `k_v` is a safe velocity for the single-integrator reduction, given as a
/// chain controller on `y` alone.
#[derive(Clone)]
pub struct Backstepped {
    pub base: OutputConstraint,
    pub safe_velocity: Arc<dyn ChainController>,
    pub mu: f64,
}

pub fn backstep_extend(
    base: OutputConstraint,
    safe_velocity: Arc<dyn ChainController>,
    mu: f64,
) -> Result<Backstepped> {
    if !(mu > 0.0) {
        return Err(Error::invalid("mu_b", format!("must be positive, got {mu}")));
    }
    Ok(Backstepped { base, safe_velocity, mu })
}

impl Backstepped {
    fn split(&self, yh: &Vector) -> (Vector, Vector) {
        let p = self.base.dim();
        (yh.rows(0, p).into_owned(), yh.rows(p, p).into_owned())
    }
}

impl Barrier for Backstepped {
    fn chain(&self) -> OutputChainSpec {
        OutputChainSpec { p: self.base.dim(), r: 2 }
    }

    fn value(&self, yh: &Vector) -> f64 {
        let (y, v) = self.split(yh);
        self.base.value(&y) - (v - self.safe_velocity.eval(&y)).norm_squared() / (2.0 * self.mu)
    }

    fn gradient(&self, yh: &Vector) -> Vector {
        let p = self.base.dim();
        let (y, v) = self.split(yh);
        let err = (v - self.safe_velocity.eval(&y)) / self.mu;
        let jk = self.safe_velocity.jacobian(&y);
        let mut g = Vector::zeros(2 * p);
        g.rows_mut(0, p).copy_from(&(self.base.gradient(&y) + jk.transpose() * &err));
        g.rows_mut(p, p).copy_from(&(-err));
        g
    }

    fn hessian(&self, yh: &Vector) -> Matrix {
        let h = fd_jacobian(|z| self.gradient(z), yh, 1e-5);
        (&h + h.transpose()) * 0.5
    }
}

/// A feedback law `v = k(ŷ)` on the chain, with its Jacobian.
pub trait ChainController: Send + Sync {
    fn eval(&self, yh: &Vector) -> Vector;
    fn jacobian(&self, yh: &Vector) -> Matrix;

    /// Value and Jacobian together, for implementations that share the work.
    fn eval_with_jacobian(&self, yh: &Vector) -> (Vector, Matrix) {
        (self.eval(yh), self.jacobian(yh))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroController {
    pub chain: OutputChainSpec,
}

impl ChainController for ZeroController {
    fn eval(&self, _yh: &Vector) -> Vector {
        Vector::zeros(self.chain.p)
    }
    fn jacobian(&self, _yh: &Vector) -> Matrix {
        Matrix::zeros(self.chain.p, self.chain.dim())
    }
}

/// `k(ŷ) = Kŷ + k₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFeedback {
    pub gain: Matrix,
    pub offset: Vector,
}

impl LinearFeedback {
    /// `−ρ P^{1/2} (y − c)` on a single integrator.
    pub fn ellipse_contraction(rho: f64, center: &[f64], diag: &[f64]) -> Self {
        let sqrt_p = Matrix::from_diagonal(&Vector::from_iterator(diag.len(), diag.iter().map(|d| sqrt(*d))));
        let gain = &sqrt_p * -rho;
        let offset = &sqrt_p * Vector::from_column_slice(center) * rho;
        LinearFeedback { gain, offset }
    }

    /// `−k_p (y − goal) − k_d ẏ` on a double integrator.
    pub fn pd(goal: &[f64], kp: f64, kd: f64) -> Self {
        let p = goal.len();
        let mut gain = Matrix::zeros(p, 2 * p);
        for i in 0..p {
            gain[(i, i)] = -kp;
            gain[(i, p + i)] = -kd;
        }
        LinearFeedback { gain, offset: Vector::from_column_slice(goal) * kp }
    }

    /// `−k_p (y − goal)` on a single integrator.
    pub fn proportional(goal: &[f64], kp: f64) -> Self {
        let p = goal.len();
        LinearFeedback { gain: Matrix::identity(p, p) * -kp, offset: Vector::from_column_slice(goal) * kp }
    }
}

impl ChainController for LinearFeedback {
    fn eval(&self, yh: &Vector) -> Vector {
        &self.gain * yh + &self.offset
    }
    fn jacobian(&self, _yh: &Vector) -> Matrix {
        self.gain.clone()
    }
}

/// Default sharpness of the softplus relaxation.
pub const DEFAULT_KAPPA: f64 = 10.0;

/// Softplus-relaxed minimum-norm correction of a nominal chain controller:
///
/// `k̂ = k_nom + a · softplus_κ(−ψ) / max(‖a‖², κ⁻²)`
///
/// with `a = (∇h₀ B)ᵀ` and `ψ` the input-to-state-safe margin of `k_nom`.
/// Smooth everywhere; the margin of `k̂` is strictly positive wherever
/// `‖a‖² ≥ κ⁻²`.
#[derive(Clone)]
pub struct SmoothSafe {
    pub barrier: Arc<dyn Barrier>,
    pub nominal: Arc<dyn ChainController>,
    pub gamma: f64,
    pub epsilon: f64,
    pub kappa: f64,
}

impl SmoothSafe {
    pub fn new(
        barrier: Arc<dyn Barrier>,
        nominal: Arc<dyn ChainController>,
        gamma: f64,
        epsilon: f64,
        kappa: f64,
    ) -> Result<Self> {
        for (name, v) in [("gamma", gamma), ("epsilon", epsilon), ("kappa", kappa)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(SmoothSafe { barrier, nominal, gamma, epsilon, kappa })
    }

    /// Margin `ψ` of an arbitrary chain input `v`.
    pub fn margin(&self, yh: &Vector, v: &Vector) -> f64 {
        issf_margin(self.barrier.as_ref(), self.gamma, self.epsilon, yh, v)
    }

    fn floor(&self) -> f64 {
        1.0 / (self.kappa * self.kappa)
    }
}

/// `∇h₀(Aŷ + Bv) + γh₀ − ‖∇h₀B‖²/ε`.
pub fn issf_margin(barrier: &dyn Barrier, gamma: f64, epsilon: f64, yh: &Vector, v: &Vector) -> f64 {
    let chain = barrier.chain();
    let g = barrier.gradient(yh);
    let a = chain.last_block(&g);
    g.dot(&chain.flow(yh, v)) + gamma * barrier.value(yh) - a.norm_squared() / epsilon
}

impl ChainController for SmoothSafe {
    fn eval(&self, yh: &Vector) -> Vector {
        let chain = self.barrier.chain();
        let knom = self.nominal.eval(yh);
        let a = chain.last_block(&self.barrier.gradient(yh));
        let psi = self.margin(yh, &knom);
        let den = a.norm_squared().max(self.floor());
        knom + a * (softplus(-psi, self.kappa) / den)
    }

    fn jacobian(&self, yh: &Vector) -> Matrix {
        self.eval_with_jacobian(yh).1
    }

    fn eval_with_jacobian(&self, yh: &Vector) -> (Vector, Matrix) {
        let chain = self.barrier.chain();
        let (p, d) = (chain.p, chain.dim());
        let knom = self.nominal.eval(yh);
        let jnom = self.nominal.jacobian(yh);
        let g = self.barrier.gradient(yh);
        let h = self.barrier.hessian(yh);
        let a = chain.last_block(&g);
        let ja = h.view((d - p, 0), (p, d)).into_owned();
        let s = a.norm_squared();
        let den = s.max(self.floor());

        let psi = g.dot(&chain.flow(yh, &knom)) + self.gamma * self.barrier.value(yh) - s / self.epsilon;
        // ∂ψ = H(Aŷ + Bk) + (A + BJ)ᵀ∇h₀ + γ∇h₀ − (2/ε)J_aᵀa
        let mut closed = chain.a();
        closed.view_mut((d - p, 0), (p, d)).copy_from(&jnom);
        let dpsi = &h * chain.flow(yh, &knom) + closed.transpose() * &g + &g * self.gamma
            - ja.transpose() * &a * (2.0 / self.epsilon);

        let sp = softplus(-psi, self.kappa);
        let sigma = sp / den;
        let mut dsigma = dpsi * (-softplus_slope(-psi, self.kappa) / den);
        if s > self.floor() {
            dsigma -= ja.transpose() * &a * (2.0 * sp / (den * den));
        }
        let value = knom + &a * sigma;
        (value, jnom + ja * sigma + a * dsigma.transpose())
    }
}

/// Result of sampling the input-to-state-safe inequality on a box.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IssfReport {
    pub samples: usize,
    pub min_margin: f64,
    pub worst_point: Vec<f64>,
    pub passed: bool,
}

/// Samples `∇h₀(Aŷ + Bk̂) + γh₀ − ‖∇h₀B‖²/ε > 0` on `n` Halton points.
pub fn verify_issf_linear(
    barrier: &dyn Barrier,
    khat: &dyn ChainController,
    gamma: f64,
    epsilon: f64,
    bounds: &SampleBox,
    n: usize,
) -> IssfReport {
    assert!(n >= 1, "verify_issf_linear: need at least one sample");
    let mut min_margin = f64::INFINITY;
    let mut worst_point = Vec::new();
    for yh in bounds.halton_points(n) {
        let m = issf_margin(barrier, gamma, epsilon, &yh, &khat.eval(&yh));
        if m < min_margin || worst_point.is_empty() {
            min_margin = m;
            worst_point = yh.iter().copied().collect();
        }
    }
    IssfReport { samples: n, min_margin, worst_point, passed: min_margin > 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::fd_gradient;
    use alloc::vec;
    use approx::assert_relative_eq;
    use core::f64::consts::LN_2 as LN_2_CHECK;

    fn v(s: &[f64]) -> Vector {
        Vector::from_column_slice(s)
    }

    #[test]
    fn chain_matrices() {
        let c = OutputChainSpec::new(2, 3).unwrap();
        let (a, b) = (c.a(), c.b());
        assert_eq!(a.shape(), (6, 6));
        assert_eq!(a[(0, 2)], 1.0);
        assert_eq!(a[(3, 5)], 1.0);
        assert_eq!(a.rows(4, 2).amax(), 0.0);
        assert_eq!(b.rows(0, 4).amax(), 0.0);
        assert_eq!(b.rows(4, 2).into_owned(), Matrix::identity(2, 2));
        // A is nilpotent of order r and AB, A²B stack the input down the chain.
        assert_eq!((&a * &a * &a).amax(), 0.0);
        assert_eq!((&a * &b).rows(2, 2).into_owned(), Matrix::identity(2, 2));
        let yh = v(&[1., 2., 3., 4., 5., 6.]);
        assert_eq!(c.flow(&yh, &v(&[7., 8.])), &a * &yh + &b * v(&[7., 8.]));
        assert!(OutputChainSpec::new(0, 1).is_err());
    }

    #[test]
    fn constraint_examples() {
        assert_eq!(ellipse_h0(&[0.3, -0.2], &[0.3, -0.2], &[1.0, 4.0]).unwrap(), 1.0);
        assert_eq!(ellipse_h0(&[1.0, 0.0], &[0.0, 0.0], &[1.0, 4.0]).unwrap(), 0.0);
        assert_relative_eq!(ellipse_h0(&[0.5, 0.25], &[0.0, 0.0], &[1.0, 4.0]).unwrap(), 0.5, epsilon = 1e-15);
        assert!(ellipse_h0(&[0.0, 0.0], &[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(ellipse_h0(&[0.0, 0.0], &[0.0, 0.0], &[-1.0, 1.0]).is_err());

        assert_eq!(obstacle_h(&[1.0, 2.0], &[1.0, 2.0], 0.5), -0.25);
        assert_relative_eq!(obstacle_h(&[0.6, 0.8], &[0.0, 0.0], 1.0), 0.0, epsilon = 1e-15);
        assert_eq!(obstacle_h(&[3.0, 4.0], &[0.0, 0.0], 1.0), 24.0);
        assert!(OutputConstraint::obstacle(&[0.0, 0.0], 0.0).is_err());

        assert_eq!(geofence_h(0.2, 0.2), 0.0);
        assert_eq!(geofence_h(0.0, 0.2), 0.2);
        assert_relative_eq!(geofence_h(0.3, 0.2), -0.1, epsilon = 1e-15);
    }

    #[test]
    fn hocbf_examples() {
        let fence = hocbf_extend(OutputConstraint::geofence(3, 0, 0.2).unwrap(), 1.0, 2).unwrap();
        let yh = v(&[0.0, 0.0, 1.0, 0.1, 0.0, 0.0]);
        assert_relative_eq!(fence.value(&yh), 0.1, epsilon = 1e-15);
        assert_eq!(fence.value(&v(&[0.2, 0.0, 1.0, 0.0, 0.0, 0.0])), 0.0);

        let obs = hocbf_extend(OutputConstraint::obstacle(&[0.0, 0.0], 1.0).unwrap(), 2.0, 2).unwrap();
        assert_relative_eq!(obs.value(&v(&[1.0, 0.0, 1.0, 0.0])), 2.0, epsilon = 1e-15);
        assert!(hocbf_extend(OutputConstraint::obstacle(&[0.0, 0.0], 1.0).unwrap(), 2.0, 1).is_err());
    }

    #[test]
    fn backstep_examples() {
        let zero = Arc::new(ZeroController { chain: OutputChainSpec { p: 2, r: 1 } });
        let obs = OutputConstraint::obstacle(&[0.0, 0.0], 1.0).unwrap();
        let b = backstep_extend(obs.clone(), zero.clone(), 1.0).unwrap();
        assert_eq!(b.value(&v(&[3.0, 4.0, 2.0, 0.0])), 22.0);
        assert_eq!(b.value(&v(&[3.0, 4.0, 0.0, 0.0])), 24.0);

        let unit = backstep_extend(OutputConstraint::ellipse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), zero, 0.5).unwrap();
        assert_eq!(unit.value(&v(&[0.0, 0.0, 0.6, 0.8])), 0.0);
        let tracking = Arc::new(LinearFeedback::proportional(&[1.0, 1.0], 0.7));
        let b = backstep_extend(obs.clone(), tracking.clone(), 1.0).unwrap();
        let y = v(&[2.0, -1.0]);
        let kv = tracking.eval(&y);
        assert_eq!(b.value(&v(&[2.0, -1.0, kv[0], kv[1]])), obs.value(&y));
        assert!(backstep_extend(obs, tracking, 0.0).is_err());
    }

    #[test]
    fn extensions_imply_base_membership() {
        // Backstepping: h₀ ≥ 0 ⇒ h_b ≥ ‖·‖²/(2μ) ≥ 0.
        // HOCBF: on the set, d/dt h_b ≥ −α h_b, so h_b ≥ 0 is kept once held.
        let zero = Arc::new(ZeroController { chain: OutputChainSpec { p: 2, r: 1 } });
        let obs = OutputConstraint::obstacle(&[0.0, 0.0], 1.0).unwrap();
        let b = backstep_extend(obs.clone(), zero, 0.3).unwrap();
        let hoc = hocbf_extend(obs.clone(), 1.5, 2).unwrap();
        for yh in SampleBox::symmetric(&[3.0, 3.0, 2.0, 2.0]).halton_points(2000) {
            let y = yh.rows(0, 2).into_owned();
            if b.value(&yh) >= 0.0 {
                assert!(obs.value(&y) >= 0.0);
            }
            let vel = yh.rows(2, 2).into_owned();
            let hb_dot = obs.gradient(&y).dot(&vel);
            if hoc.value(&yh) >= 0.0 {
                assert!(hb_dot >= -1.5 * obs.value(&y) - 1e-12);
            }
        }
    }

    #[test]
    fn gradients_and_hessians_match_finite_differences() {
        let kv: Arc<dyn ChainController> = Arc::new(
            SmoothSafe::new(
                Arc::new(Direct(OutputConstraint::obstacle(&[0.0, 0.0], 0.5).unwrap())),
                Arc::new(LinearFeedback::proportional(&[2.0, 0.0], 1.0)),
                1.0,
                4.0,
                DEFAULT_KAPPA,
            )
            .unwrap(),
        );
        let barriers: Vec<Arc<dyn Barrier>> = vec![
            Arc::new(Direct(OutputConstraint::ellipse(&[0.1, -0.2], &[1.0, 4.0]).unwrap())),
            Arc::new(Direct(OutputConstraint::obstacle(&[0.5, 0.5], 0.4).unwrap())),
            Arc::new(hocbf_extend(OutputConstraint::obstacle(&[0.0, 0.0], 0.5).unwrap(), 1.0, 2).unwrap()),
            Arc::new(hocbf_extend(OutputConstraint::geofence(3, 0, 0.2).unwrap(), 1.0, 2).unwrap()),
            Arc::new(backstep_extend(OutputConstraint::obstacle(&[0.0, 0.0], 0.5).unwrap(), kv, 0.5).unwrap()),
        ];
        for b in barriers {
            let c = b.chain();
            let half = vec![2.0; c.dim()];
            for yh in SampleBox::symmetric(&half).halton_points(1000) {
                let fd = fd_gradient(|z| b.value(z), &yh, 1e-6);
                let g = b.gradient(&yh);
                assert!((&g - &fd).amax() <= 1e-5 * fd.amax().max(1.0), "{g} vs {fd}");
            }
            for yh in SampleBox::symmetric(&half).halton_points(50) {
                let fd = fd_jacobian(|z| b.gradient(z), &yh, 1e-6);
                assert!((b.hessian(&yh) - &fd).amax() <= 1e-4 * fd.amax().max(1.0));
            }
        }
    }

    #[test]
    fn smooth_safe_examples() {
        let line = Arc::new(Direct(OutputConstraint::ellipse(&[0.0], &[1.0]).unwrap()));
        let zero = Arc::new(ZeroController { chain: OutputChainSpec { p: 1, r: 1 } });
        let k = SmoothSafe::new(line.clone(), zero.clone(), 1.0, 4.0, 10.0).unwrap();
        // a = −2, ψ = −1 ⇒ k̂ = −2 softplus(1) / 4.
        let expect = -2.0 * ((1.0f64 + (10.0f64).exp()).ln() / 10.0) / 4.0;
        assert_relative_eq!(k.eval(&v(&[1.0]))[0], expect, epsilon = 1e-14);

        // ψ = 0 ⇒ correction = log 2 / (κ max(s, κ⁻²)) · ‖a‖.
        // h₀ = 1 − y², a = −2y, ψ = γ(1 − y²) − 4y²/ε = 0 at y² = 1/(1 + 4/ε) (γ = 1).
        let y = (1.0f64 / 2.0).sqrt();
        let k2 = SmoothSafe::new(line.clone(), zero.clone(), 1.0, 4.0, 10.0).unwrap();
        assert_relative_eq!(k2.margin(&v(&[y]), &v(&[0.0])), 0.0, epsilon = 1e-15);
        let a = 2.0 * y;
        assert_relative_eq!(k2.eval(&v(&[y]))[0].abs(), LN_2_CHECK / (10.0 * a * a) * a, epsilon = 1e-14);

        // Deep inside: ψ ≫ 0 leaves the nominal nearly untouched.
        let nominal = Arc::new(LinearFeedback { gain: Matrix::zeros(1, 1), offset: v(&[-3.0]) });
        let k3 = SmoothSafe::new(line, nominal, 1.0, 4.0, 10.0).unwrap();
        let out = k3.eval(&v(&[0.5]));
        assert!((out[0] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_safe_jacobian_and_margin() {
        let obstacle = Arc::new(hocbf_extend(OutputConstraint::obstacle(&[0.0, 0.0], 0.5).unwrap(), 1.0, 2).unwrap());
        let k = SmoothSafe::new(obstacle.clone(), Arc::new(LinearFeedback::pd(&[2.5, 0.0], 1.0, 2.0)), 1.0, 4.0, 10.0)
            .unwrap();
        for yh in SampleBox::symmetric(&[3.0, 3.0, 2.0, 2.0]).halton_points(1000) {
            let fd = fd_jacobian(|z| k.eval(z), &yh, 1e-6);
            let j = k.jacobian(&yh);
            assert!((&j - &fd).amax() <= 1e-4 * fd.amax().max(1.0), "{j} vs {fd} at {yh}");
            let a = obstacle.chain().last_block(&obstacle.gradient(&yh));
            if a.norm_squared() >= 0.01 {
                // Strict in exact arithmetic; ψ + softplus(−ψ) underflows for ψ ≪ 0.
                let psi = k.margin(&yh, &k.nominal.eval(&yh));
                assert!(k.margin(&yh, &k.eval(&yh)) > -1e-12 * psi.abs().max(1.0));
            }
        }
    }

    #[test]
    fn ellipse_contraction_margin_example() {
        let diag = [1.0, 4.0];
        let e = Direct(OutputConstraint::ellipse(&[0.0, 0.0], &diag).unwrap());
        let k = LinearFeedback::ellipse_contraction(0.16, &[0.0, 0.0], &diag);
        assert_relative_eq!(k.eval(&v(&[1.0, 0.5]))[1], -0.16 * 2.0 * 0.5, epsilon = 1e-15);
        let inside = SampleBox::symmetric(&[0.7, 0.35]);
        assert!(verify_issf_linear(&e, &k, 1.0, 30.0, &inside, 500).passed);
        // Zero input, A = 0: the margin is γh₀ − ‖∇h₀‖²/ε, negative outside the ellipse.
        let zero = ZeroController { chain: e.chain() };
        let report = verify_issf_linear(&e, &zero, 1.0, 4.0, &SampleBox::symmetric(&[1.5, 1.5]), 500);
        let w = v(&report.worst_point);
        assert_relative_eq!(report.min_margin, e.value(&w) - e.gradient(&w).norm_squared() / 4.0, epsilon = 1e-12);
        assert!(!report.passed);
        // Large γ: sign of h₀ decides.
        let strict = verify_issf_linear(&e, &zero, 1e6, 4.0, &SampleBox::symmetric(&[0.5, 0.25]), 200);
        assert!(strict.passed);
    }
}
