//! Single-constraint CBF-QP in closed form, a brute-force oracle for it, and
//! nominal controllers for the bundled models.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};

use crate::drd::desired_rotation;
use crate::math::{cos, quat_to_rot, sin, sqrt, vee, wrap_angle};
use crate::Vector;

/// `min ‖u − u_nom‖²  s.t.  a·u + b ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterProblem {
    pub nominal: Vector,
    /// `a = L_g h(x)`.
    pub row: Vector,
    /// `b = L_f h(x) + γh(x)`.
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub input: Vector,
    /// The constraint was binding and the nominal input was modified.
    pub active: bool,
    /// `a = 0` with `b < 0`: no input satisfies the constraint; `u_nom` is passed through.
    pub infeasible: bool,
    /// `a·u + b` at the returned input.
    pub residual: f64,
}

/// Projection of `u_nom` onto the half-space `a·u + b ≥ 0`.
pub fn cbf_qp_filter(p: &FilterProblem) -> FilterOutput {
    let s = p.row.dot(&p.nominal) + p.offset;
    if s >= 0.0 {
        return FilterOutput { input: p.nominal.clone(), active: false, infeasible: false, residual: s };
    }
    let aa = p.row.norm_squared();
    if aa > 0.0 {
        let input = &p.nominal - &p.row * (s / aa);
        let residual = p.row.dot(&input) + p.offset;
        FilterOutput { input, active: true, infeasible: false, residual }
    } else {
        FilterOutput { input: p.nominal.clone(), active: false, infeasible: true, residual: s }
    }
}

/// Exhaustive minimisation over the grid `u_nom + step·ℤᵐ` inside a cube of
/// half-width `radius`. `None` when no grid point is feasible. Test oracle only.
pub fn qp_oracle(p: &FilterProblem, radius: f64, step: f64) -> Option<Vector> {
    assert!(step > 0.0, "qp_oracle: step must be positive");
    let m = p.nominal.len();
    let per_axis = libm::floor(radius / step) as i64;
    let width = (2 * per_axis + 1) as usize;
    let total = width.checked_pow(m as u32).expect("qp_oracle: grid too large");
    let mut best: Option<(f64, Vector)> = None;
    let mut u = p.nominal.clone();
    for flat in 0..total {
        let mut rem = flat;
        for i in 0..m {
            let k = (rem % width) as i64 - per_axis;
            rem /= width;
            u[i] = p.nominal[i] + k as f64 * step;
        }
        if p.row.dot(&u) + p.offset < 0.0 {
            continue;
        }
        let cost = (&u - &p.nominal).norm_squared();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, u.clone()));
        }
    }
    best.map(|(_, u)| u)
}

/// `(K_p‖y − y_des‖, −K_q sin(θ − θ_des))`.
pub fn nominal_unicycle_tracker(x: &Vector, y_des: [f64; 2], theta_des: f64, kp: f64, kq: f64) -> [f64; 2] {
    let (dx, dy) = (x[0] - y_des[0], x[1] - y_des[1]);
    [kp * sqrt(dx * dx + dy * dy), -kq * sin(x[2] - theta_des)]
}

/// `(τ, K_p(θ_des − θ) + K_q(θ̇_des − ω))` with `τ` supplied by the pullback.
pub fn nominal_planar_quad(x: &Vector, thrust: f64, theta_des: f64, theta_des_rate: f64, kp: f64, kq: f64) -> [f64; 2] {
    [thrust, kp * wrap_angle(theta_des - x[2]) + kq * (theta_des_rate - x[5])]
}

/// `a sin(ωt + φ) + c` per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sinusoid {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    pub offset: f64,
}

impl Sinusoid {
    pub fn constant(offset: f64) -> Self {
        Sinusoid { amplitude: 0.0, omega: 0.0, phase: 0.0, offset }
    }

    /// Value, first and second derivative at `t`.
    pub fn eval(&self, t: f64) -> [f64; 3] {
        let arg = self.omega * t + self.phase;
        let (s, c) = (sin(arg), cos(arg));
        [
            self.amplitude * s + self.offset,
            self.amplitude * self.omega * c,
            -self.amplitude * self.omega * self.omega * s,
        ]
    }
}

/// Position tracker for the body-rate quadrotor: PD on position for the
/// thrust vector, proportional attitude error on `SO(3)` for the rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTracker {
    pub reference: [Sinusoid; 3],
    pub kp: f64,
    pub kd: f64,
    pub k_attitude: f64,
    pub yaw: f64,
    pub mass: f64,
    pub gravity: f64,
}

impl ReferenceTracker {
    pub fn reference_at(&self, t: f64) -> [[f64; 3]; 3] {
        let e: Vec<[f64; 3]> = self.reference.iter().map(|s| s.eval(t)).collect();
        [[e[0][0], e[1][0], e[2][0]], [e[0][1], e[1][1], e[2][1]], [e[0][2], e[1][2], e[2][2]]]
    }

    /// `(τ, ω)` on the state `(y, ẏ, q)`.
    pub fn command(&self, t: f64, x: &Vector) -> Vector {
        let [yd, vd, ad] = self.reference_at(t);
        let y = Vector3::new(x[0], x[1], x[2]);
        let v = Vector3::new(x[3], x[4], x[5]);
        let acc = Vector3::from(ad)
            + (Vector3::from(yd) - y) * self.kp
            + (Vector3::from(vd) - v) * self.kd
            + Vector3::new(0.0, 0.0, self.gravity);
        let r = quat_to_rot(&[x[6], x[7], x[8], x[9]]);
        let tau = self.mass * acc.dot(&r.column(2));
        let rd = desired_rotation(&acc, self.yaw, 1e-9).unwrap_or_else(Matrix3::identity);
        let err = vee(&((rd.transpose() * r - r.transpose() * rd) * 0.5));
        let w = -err * self.k_attitude;
        Vector::from_vec(alloc::vec![tau, w[0], w[1], w[2]])
    }
}

/// `‖u − u_nom‖²`.
pub fn grid_cost(p: &FilterProblem, u: &Vector) -> f64 {
    (u - &p.nominal).norm_squared()
}

/// `(L_f h, L_g h)` rows packaged as a filter problem with linear class-K gain `γ`.
pub fn filter_problem(nominal: Vector, lf: f64, lg: Vector, h: f64, gamma: f64) -> FilterProblem {
    FilterProblem { nominal, row: lg, offset: lf + gamma * h }
}

/// Stacks `[u₁; u₂]`.
pub fn join_inputs(u1: &Vector, u2: &Vector) -> Vector {
    let mut u = Vector::zeros(u1.len() + u2.len());
    u.rows_mut(0, u1.len()).copy_from(u1);
    u.rows_mut(u1.len(), u2.len()).copy_from(u2);
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::PI;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v(s: &[f64]) -> Vector {
        Vector::from_column_slice(s)
    }

    fn problem(u: &[f64], a: &[f64], b: f64) -> FilterProblem {
        FilterProblem { nominal: v(u), row: v(a), offset: b }
    }

    #[test]
    fn closed_form_examples() {
        let inactive = problem(&[1.0, 2.0], &[1.0, 0.0], 0.5);
        let out = cbf_qp_filter(&inactive);
        assert_eq!((out.input, out.active), (v(&[1.0, 2.0]), false));

        let out = cbf_qp_filter(&problem(&[0.0, 0.0], &[1.0, 0.0], -1.0));
        assert_eq!(out.input, v(&[1.0, 0.0]));
        assert!(out.active);
        assert_eq!(qp_oracle(&problem(&[0.0, 0.0], &[1.0, 0.0], -1.0), 2.0, 0.01).unwrap(), v(&[1.0, 0.0]));

        let p = problem(&[1.0, 1.0], &[0.0, 2.0], -4.0);
        assert_eq!(cbf_qp_filter(&p).input, v(&[1.0, 2.0]));
        let o = qp_oracle(&p, 2.0, 0.01).unwrap();
        assert!((o - v(&[1.0, 2.0])).amax() < 1e-9);
    }

    #[test]
    fn infeasible_corner_passes_nominal() {
        let out = cbf_qp_filter(&problem(&[0.3], &[0.0], -1.0));
        assert!(out.infeasible);
        assert_eq!(out.input, v(&[0.3]));
        assert!(qp_oracle(&problem(&[0.3], &[0.0], -1.0), 1.0, 0.1).is_none());
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(qp_oracle(&problem(&[0.2, -0.1], &[1.0, 1.0], 5.0), 1.0, 0.1).unwrap(), v(&[0.2, -0.1]));
        let u = qp_oracle(&problem(&[0.0], &[1.0], -1.0), 3.0, 0.001).unwrap();
        assert_relative_eq!(u[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn nominal_tracker_examples() {
        assert_eq!(nominal_unicycle_tracker(&v(&[1.0, 1.0, 0.4]), [1.0, 1.0], 0.4, 1.0, 3.0), [0.0, 0.0]);
        assert_relative_eq!(nominal_unicycle_tracker(&v(&[2.0, 0.0, 0.0]), [0.0, 0.0], 0.0, 1.0, 3.0)[0], 2.0);
        assert_relative_eq!(nominal_unicycle_tracker(&v(&[0.0, 0.0, PI / 2.0]), [0.0, 0.0], 0.0, 1.0, 3.0)[1], -3.0);

        let x = v(&[0.0, 0.0, 0.2, 0.0, 0.0, 0.7]);
        assert_eq!(nominal_planar_quad(&x, 9.81, 0.2, 0.7, 10.0, 5.0)[1], 0.0);
        assert_relative_eq!(nominal_planar_quad(&x, 9.81, 0.3, 0.7, 10.0, 5.0)[1], 1.0, epsilon = 1e-12);
        assert_eq!(nominal_planar_quad(&x, 9.81, 0.3, 0.7, 10.0, 5.0)[0], 9.81);
    }

    #[test]
    fn reference_tracker_hovers_on_reference() {
        let tracker = ReferenceTracker {
            reference: [Sinusoid::constant(0.0), Sinusoid::constant(0.0), Sinusoid::constant(1.0)],
            kp: 4.0,
            kd: 4.0,
            k_attitude: 8.0,
            yaw: 0.0,
            mass: 1.0,
            gravity: 9.81,
        };
        let mut x = Vector::zeros(10);
        x[2] = 1.0;
        x[6] = 1.0;
        let u = tracker.command(0.0, &x);
        assert_relative_eq!(u[0], 9.81, epsilon = 1e-12);
        assert!(u.rows(1, 3).amax() < 1e-12);
        let s = Sinusoid { amplitude: -1.0, omega: 0.4 * PI, phase: 0.0, offset: 0.0 };
        let [y, dy, ddy] = s.eval(1.25);
        assert_relative_eq!(y, -1.0, epsilon = 1e-12);
        assert!(dy.abs() < 1e-12);
        assert_relative_eq!(ddy, (0.4 * PI) * (0.4 * PI), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn filter_is_feasible_idempotent_and_scale_free(
            u in prop::collection::vec(-5.0f64..5.0, 3),
            a in prop::collection::vec(-3.0f64..3.0, 3),
            b in -10.0f64..10.0,
            c in 0.01f64..100.0,
        ) {
            let p = problem(&u, &a, b);
            let out = cbf_qp_filter(&p);
            if p.row.norm() > 0.0 {
                prop_assert!(out.residual >= -1e-10);
            }
            let again = cbf_qp_filter(&FilterProblem { nominal: out.input.clone(), ..p.clone() });
            prop_assert!((&again.input - &out.input).amax() <= 1e-12);
            let scaled = cbf_qp_filter(&FilterProblem { row: &p.row * c, offset: p.offset * c, ..p.clone() });
            prop_assert!((&scaled.input - &out.input).amax() <= 1e-9 * (1.0 + out.input.amax()));
        }
    }
}
