//! Scalar helpers, rotations, finite differences and low-discrepancy sampling.
//!
//! All transcendental functions go through `libm` so results are identical
//! across targets, with or without `std`.

use alloc::vec::Vec;
use nalgebra::{Matrix3, Vector3};

use crate::{Matrix, Vector};

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

pub const PI: f64 = core::f64::consts::PI;

/// Wraps an angle to (−π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let wrapped = atan2(sin(theta), cos(theta));
    if wrapped <= -PI {
        PI
    } else {
        wrapped
    }
}

/// `(1/κ) log(1 + exp(κ z))`, evaluated without overflow.
pub fn softplus(z: f64, kappa: f64) -> f64 {
    let kz = kappa * z;
    (kz.max(0.0) + ln_1p(exp(-kz.abs()))) / kappa
}

/// Derivative of [`softplus`] with respect to `z`.
pub fn softplus_slope(z: f64, kappa: f64) -> f64 {
    let kz = kappa * z;
    if kz >= 0.0 {
        1.0 / (1.0 + exp(-kz))
    } else {
        let e = exp(kz);
        e / (1.0 + e)
    }
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Rotation matrix of a scalar-first quaternion `(w, x, y, z)`.
///
/// Uses the `1 − 2(·)` diagonal form; off the unit sphere this is the
/// extension that [`quat_to_rot_partials`] differentiates.
pub fn quat_to_rot(q: &[f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = *q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Partial derivatives of [`quat_to_rot`] with respect to `w, x, y, z`.
pub fn quat_to_rot_partials(q: &[f64; 4]) -> [Matrix3<f64>; 4] {
    let [w, x, y, z] = *q;
    let t = 2.0;
    [
        Matrix3::new(0.0, -t * z, t * y, t * z, 0.0, -t * x, -t * y, t * x, 0.0),
        Matrix3::new(0.0, t * y, t * z, t * y, -2.0 * t * x, -t * w, t * z, t * w, -2.0 * t * x),
        Matrix3::new(-2.0 * t * y, t * x, t * w, t * x, 0.0, t * z, -t * w, t * z, -2.0 * t * y),
        Matrix3::new(-2.0 * t * z, -t * w, t * x, t * w, -2.0 * t * z, t * y, t * x, t * y, 0.0),
    ]
}

/// Hamilton product of scalar-first quaternions.
pub fn quat_mul(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    let [aw, ax, ay, az] = *a;
    let [bw, bx, by, bz] = *b;
    [
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ]
}

pub fn quat_norm(q: &[f64; 4]) -> f64 {
    sqrt(q.iter().map(|c| c * c).sum())
}

/// Unit quaternion (scalar-first) of a proper rotation matrix.
pub fn rot_to_quat(r: &Matrix3<f64>) -> [f64; 4] {
    let tr = r.trace();
    let q = if tr > 0.0 {
        let s = 2.0 * sqrt(tr + 1.0);
        [0.25 * s, (r[(2, 1)] - r[(1, 2)]) / s, (r[(0, 2)] - r[(2, 0)]) / s, (r[(1, 0)] - r[(0, 1)]) / s]
    } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
        let s = 2.0 * sqrt(1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]);
        [(r[(2, 1)] - r[(1, 2)]) / s, 0.25 * s, (r[(0, 1)] + r[(1, 0)]) / s, (r[(0, 2)] + r[(2, 0)]) / s]
    } else if r[(1, 1)] > r[(2, 2)] {
        let s = 2.0 * sqrt(1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]);
        [(r[(0, 2)] - r[(2, 0)]) / s, (r[(0, 1)] + r[(1, 0)]) / s, 0.25 * s, (r[(1, 2)] + r[(2, 1)]) / s]
    } else {
        let s = 2.0 * sqrt(1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]);
        [(r[(1, 0)] - r[(0, 1)]) / s, (r[(0, 2)] + r[(2, 0)]) / s, (r[(1, 2)] + r[(2, 1)]) / s, 0.25 * s]
    };
    let n = quat_norm(&q);
    [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = (sin(a), cos(a));
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = (sin(a), cos(a));
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = (sin(a), cos(a));
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Z-X-Z Euler angles `(ψ, θ, φ)` with `R = R_z(ψ) R_x(θ) R_z(φ)`, `θ ∈ [0, π]`.
///
/// The middle angle is always unique; the outer two are not when `sin θ = 0`,
/// in which case `φ = 0` is returned.
pub fn zxz_euler(r: &Matrix3<f64>) -> (f64, f64, f64) {
    let s = sqrt(r[(0, 2)] * r[(0, 2)] + r[(1, 2)] * r[(1, 2)]);
    let theta = atan2(s, r[(2, 2)]);
    if s > 1e-12 {
        (atan2(r[(0, 2)], -r[(1, 2)]), theta, atan2(r[(2, 0)], r[(2, 1)]))
    } else {
        // R = R_z(ψ ± φ) (θ = 0) or R_z(ψ) R_x(π) R_z(φ) (θ = π); fold into ψ.
        (atan2(r[(1, 0)], r[(0, 0)]), theta, 0.0)
    }
}

/// Uniformly distributed unit quaternion from three uniform samples in `[0, 1)`.
pub fn uniform_quaternion(u1: f64, u2: f64, u3: f64) -> [f64; 4] {
    let a = sqrt(1.0 - u1);
    let b = sqrt(u1);
    let (t2, t3) = (2.0 * PI * u2, 2.0 * PI * u3);
    [b * cos(t3), a * sin(t2), a * cos(t2), b * sin(t3)]
}

/// Singular values in decreasing order.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    sv
}

/// Number of singular values strictly above `tol`.
pub fn numerical_rank(m: &Matrix, tol: f64) -> usize {
    singular_values(m).into_iter().filter(|s| *s > tol).count()
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient(f: impl Fn(&Vector) -> f64, x: &Vector, step: f64) -> Vector {
    let mut g = Vector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + step;
        let fp = f(&xp);
        xp[i] = xi - step;
        let fm = f(&xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * step);
    }
    g
}

/// Central-difference Jacobian (`rows = f(x).len()`, `cols = x.len()`).
pub fn fd_jacobian(f: impl Fn(&Vector) -> Vector, x: &Vector, step: f64) -> Matrix {
    let rows = f(x).len();
    let mut j = Matrix::zeros(rows, x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + step;
        let fp = f(&xp);
        xp[i] = xi - step;
        let fm = f(&xp);
        xp[i] = xi;
        j.set_column(i, &((fp - fm) / (2.0 * step)));
    }
    j
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// Halton point number `index` (1-based) in `[0, 1)^dim`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton: at most {} dimensions", PRIMES.len());
    PRIMES[..dim].iter().map(|&b| radical_inverse(index, b)).collect()
}

/// Axis-aligned sampling box.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SampleBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len(), "box bounds must have equal length");
        SampleBox { lower, upper }
    }

    pub fn symmetric(half_width: &[f64]) -> Self {
        SampleBox::new(half_width.iter().map(|w| -w).collect(), half_width.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Maps a point of the unit cube into the box.
    pub fn map_unit(&self, unit: &[f64]) -> Vector {
        Vector::from_iterator(
            self.dim(),
            unit.iter().zip(self.lower.iter().zip(&self.upper)).map(|(u, (lo, hi))| lo + u * (hi - lo)),
        )
    }

    /// First `n` Halton points of the box.
    pub fn halton_points(&self, n: usize) -> Vec<Vector> {
        (1..=n as u64).map(|i| self.map_unit(&halton(i, self.dim()))).collect()
    }

    /// `n` uniform points from a seeded stream.
    pub fn uniform_points(&self, n: usize, rng: &mut impl rand::Rng) -> Vec<Vector> {
        (0..n)
            .map(|_| {
                let unit: Vec<f64> = (0..self.dim()).map(|_| rng.random::<f64>()).collect();
                self.map_unit(&unit)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wrap_angle_range() {
        assert_relative_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(-PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(0.5), 0.5, epsilon = 1e-15);
        assert_relative_eq!(wrap_angle(-0.5 - 4.0 * PI), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn softplus_is_stable_and_above_relu() {
        assert_relative_eq!(softplus(0.0, 10.0), core::f64::consts::LN_2 / 10.0, epsilon = 1e-15);
        assert_relative_eq!(softplus(1e3, 10.0), 1e3, epsilon = 1e-9);
        assert!(softplus(-1e3, 10.0) >= 0.0);
        for z in [-2.0, -0.1, 0.0, 0.3, 5.0] {
            assert!(softplus(z, 10.0) >= z.max(0.0));
            let fd = (softplus(z + 1e-6, 10.0) - softplus(z - 1e-6, 10.0)) / 2e-6;
            assert_relative_eq!(softplus_slope(z, 10.0), fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn rotation_partials_match_finite_differences() {
        let q = [0.3, -0.5, 0.7, 0.1];
        let partials = quat_to_rot_partials(&q);
        for k in 0..4 {
            let mut qp = q;
            let mut qm = q;
            qp[k] += 1e-6;
            qm[k] -= 1e-6;
            let fd = (quat_to_rot(&qp) - quat_to_rot(&qm)) / 2e-6;
            assert_relative_eq!(partials[k], fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn quaternion_round_trip_and_product() {
        let q = uniform_quaternion(0.3, 0.6, 0.9);
        let r = quat_to_rot(&q);
        assert_relative_eq!(r.transpose() * r, Matrix3::identity(), epsilon = 1e-12);
        let q2 = rot_to_quat(&r);
        let sign = if q2[0] * q[0] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..4 {
            assert_relative_eq!(q2[i] * sign, q[i], epsilon = 1e-12);
        }
        let p = uniform_quaternion(0.1, 0.2, 0.7);
        let composed = quat_to_rot(&quat_mul(&q, &p));
        assert_relative_eq!(composed, r * quat_to_rot(&p), epsilon = 1e-12);
    }

    #[test]
    fn zxz_recovers_angles() {
        let (psi, theta, phi) = (0.4, 1.1, -2.0);
        let r = rot_z(psi) * rot_x(theta) * rot_z(phi);
        let (a, b, c) = zxz_euler(&r);
        assert_relative_eq!(a, psi, epsilon = 1e-12);
        assert_relative_eq!(b, theta, epsilon = 1e-12);
        assert_relative_eq!(c, phi, epsilon = 1e-12);
        let (_, b, _) = zxz_euler(&rot_x(PI));
        assert_relative_eq!(b, PI, epsilon = 1e-12);
    }

    #[test]
    fn halton_is_in_unit_cube_and_distinct() {
        assert_relative_eq!(radical_inverse(1, 2), 0.5);
        assert_relative_eq!(radical_inverse(3, 2), 0.75);
        assert_relative_eq!(radical_inverse(1, 3), 1.0 / 3.0);
        let pts: Vec<_> = (1..50).map(|i| halton(i, 3)).collect();
        assert!(pts.iter().flatten().all(|c| (0.0..1.0).contains(c)));
        assert_ne!(pts[0], pts[1]);
    }

    #[test]
    fn rank_of_rank_one_matrix() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(numerical_rank(&m, 1e-9), 1);
        assert_eq!(numerical_rank(&Matrix::zeros(2, 1), 1e-9), 0);
    }
}
