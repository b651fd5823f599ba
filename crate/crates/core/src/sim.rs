//! Fixed-step RK4 with zero-order-hold control, and the trajectory record.

use alloc::format;
use alloc::vec::Vec;

use crate::error::Error;
use crate::{Result, Vector};

/// One grid point: the state, the input held over the following step and
/// whatever the controller reported alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<A> {
    pub t: f64,
    pub x: Vector,
    pub u: Vector,
    pub aux: A,
}

/// Number of steps `round(T/Δt)`, after validating the pair.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    if !(horizon >= dt && horizon.is_finite()) {
        return Err(Error::invalid("horizon", format!("must be at least dt = {dt}, got {horizon}")));
    }
    Ok(libm::round(horizon / dt) as usize)
}

/// Classical four-stage Runge–Kutta. The controller is called once per step at
/// the step's start state and its input is held through all four stages;
/// `post_step` re-projects the state (angle wrapping, quaternion norm).
///
/// Returns `round(T/Δt) + 1` rows; the last row's input is evaluated for
/// logging but never applied.
pub fn integrate_rk4<A>(
    dynamics: impl Fn(&Vector, &Vector) -> Vector,
    post_step: impl Fn(&mut Vector),
    x0: &Vector,
    mut controller: impl FnMut(f64, &Vector) -> Result<(Vector, A)>,
    horizon: f64,
    dt: f64,
) -> Result<Vec<Step<A>>> {
    let n = step_count(horizon, dt)?;
    let mut out = Vec::with_capacity(n + 1);
    let mut x = x0.clone();
    for k in 0..=n {
        let t = k as f64 * dt;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { time: t, state: x.iter().copied().collect() });
        }
        let (u, aux) = controller(t, &x)?;
        if k < n {
            let k1 = dynamics(&x, &u);
            let k2 = dynamics(&(&x + &k1 * (0.5 * dt)), &u);
            let k3 = dynamics(&(&x + &k2 * (0.5 * dt)), &u);
            let k4 = dynamics(&(&x + &k3 * dt), &u);
            let mut next = &x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            post_step(&mut next);
            out.push(Step { t, x: core::mem::replace(&mut x, next), u, aux });
        } else {
            out.push(Step { t, x: x.clone(), u, aux });
        }
    }
    Ok(out)
}

/// Certificate channels logged with every row.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Certificate {
    pub h: f64,
    pub h0: f64,
    pub v: f64,
    pub e_norm: f64,
    /// Constraint residual `L_f h + L_g h·u + γh` at the applied input.
    pub slack: f64,
    pub active: bool,
    /// `L_{g₂}V = 0` (the second channel cannot act on `V`).
    pub region: bool,
    pub infeasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<Vector>,
    pub u: Vec<Vector>,
    pub cert: Vec<Certificate>,
}

impl Trajectory {
    pub fn from_steps(steps: Vec<Step<Certificate>>) -> Self {
        let mut tr = Trajectory { t: Vec::new(), x: Vec::new(), u: Vec::new(), cert: Vec::new() };
        for s in steps {
            tr.t.push(s.t);
            tr.x.push(s.x);
            tr.u.push(s.u);
            tr.cert.push(s.aux);
        }
        tr
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.x.first().map_or(0, |x| x.len())
    }

    pub fn input_dim(&self) -> usize {
        self.u.first().map_or(0, |u| u.len())
    }

    pub fn min_h(&self) -> f64 {
        self.cert.iter().map(|c| c.h).fold(f64::INFINITY, f64::min)
    }

    pub fn min_h0(&self) -> f64 {
        self.cert.iter().map(|c| c.h0).fold(f64::INFINITY, f64::min)
    }

    pub fn infeasible_count(&self) -> usize {
        self.cert.iter().filter(|c| c.infeasible).count()
    }

    /// Largest value of state component `i`.
    pub fn max_state(&self, i: usize) -> f64 {
        self.x.iter().map(|x| x[i]).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::PI;
    use crate::models::{ControlAffineSystem, Unicycle};
    use alloc::vec;
    use approx::assert_relative_eq;

    fn v(s: &[f64]) -> Vector {
        Vector::from_column_slice(s)
    }

    fn no_control(_: f64, _: &Vector) -> Result<(Vector, ())> {
        Ok((Vector::zeros(0), ()))
    }

    #[test]
    fn constant_and_exponential() {
        let steps = integrate_rk4(|x, _| x * 0.0, |_| {}, &v(&[3.0, -1.0]), no_control, 1.0, 0.1).unwrap();
        assert_eq!(steps.len(), 11);
        assert!(steps.iter().all(|s| s.x == v(&[3.0, -1.0])));

        let steps = integrate_rk4(|x, _| -x, |_| {}, &v(&[1.0]), no_control, 1.0, 0.01).unwrap();
        let last = steps.last().unwrap();
        assert_relative_eq!(last.t, 1.0, epsilon = 1e-12);
        assert!((last.x[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn unicycle_drives_straight() {
        let sys = Unicycle::new([0.0, 0.0]);
        let steps = integrate_rk4(
            |x, u| sys.dynamics(x, u),
            |x| sys.normalize(x),
            &v(&[0.0, 0.0, 0.0]),
            |_, _| Ok((v(&[1.0, 0.0]), ())),
            2.0,
            1e-3,
        )
        .unwrap();
        for s in steps.iter().step_by(100) {
            assert_relative_eq!(s.x[0], s.t, epsilon = 1e-12);
            assert_eq!(s.x[1], 0.0);
        }
    }

    #[test]
    fn heading_stays_wrapped() {
        let sys = Unicycle::new([0.0, 0.0]);
        let steps = integrate_rk4(
            |x, u| sys.dynamics(x, u),
            |x| sys.normalize(x),
            &v(&[0.0, 0.0, 3.0]),
            |_, _| Ok((v(&[0.0, 2.0]), ())),
            5.0,
            1e-2,
        )
        .unwrap();
        assert!(steps.iter().all(|s| s.x[2] > -PI && s.x[2] <= PI));
    }

    #[test]
    fn zero_order_hold_calls_controller_once_per_step() {
        let mut calls = vec![];
        integrate_rk4(
            |_, u| u.clone(),
            |_| {},
            &v(&[0.0]),
            |t, _| {
                calls.push(t);
                Ok((v(&[1.0]), ()))
            },
            0.5,
            0.1,
        )
        .unwrap();
        assert_eq!(calls.len(), 6);
    }

    #[test]
    fn aborts_on_non_finite_state() {
        let err =
            integrate_rk4(|x, _| x.map(|v| v * v * 1e300), |_| {}, &v(&[1e10]), no_control, 1.0, 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { time, .. } if time > 0.0));
        assert!(step_count(1.0, 0.0).is_err());
        assert!(step_count(1e-4, 1e-3).is_err());
    }

    #[test]
    fn step_halving_is_fourth_order() {
        // Damped oscillator with state feedback held per step: the ratio is
        // dominated by RK4 as long as the hold is exact (constant input).
        let f = |x: &Vector, _: &Vector| v(&[x[1], -x[0] - 0.3 * x[1] + (x[0]).sin()]);
        let run = |dt: f64| integrate_rk4(f, |_| {}, &v(&[1.0, 0.0]), no_control, 2.0, dt).unwrap().pop().unwrap().x;
        let (a, b, c) = (run(0.04), run(0.02), run(0.01));
        let ratio = (&a - &b).norm() / (&b - &c).norm();
        assert!((8.0..32.0).contains(&ratio), "{ratio}");
    }
}
