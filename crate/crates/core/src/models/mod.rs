//! Control-affine models `ẋ = f(x) + g₁(x)u₁ + g₂(x)u₂` with closed-form Lie derivatives.

mod planar_quad;
mod quad3d;
mod unicycle;

pub use planar_quad::{PlanarQuad, PlanarQuadState};
pub use quad3d::{quat_rate_by_product, quat_rate_matrix, Quad3DState, Quad3d, Quad3dRate};
pub use unicycle::{Unicycle, UnicycleState};

use alloc::vec::Vec;

use crate::math::{numerical_rank, singular_values};
use crate::{Matrix, Vector};

/// A system with split actuation and an output of dual relative degree `(r, q)`.
///
/// Implementations provide the Lie derivatives in closed form; the defaults
/// only stack and combine them.
pub trait ControlAffineSystem: Send + Sync {
    fn state_dim(&self) -> usize;
    /// `(m₁, m₂)`.
    fn input_dims(&self) -> (usize, usize);
    fn output_dim(&self) -> usize;
    /// Declared `(r, q)`.
    fn dual_relative_degree(&self) -> (usize, usize);

    fn drift(&self, x: &Vector) -> Vector;
    fn g1(&self, x: &Vector) -> Matrix;
    fn g2(&self, x: &Vector) -> Matrix;
    fn output(&self, x: &Vector) -> Vector;

    /// `L_fⁱ y` for `i ∈ 0..=r`.
    fn lie_drift(&self, x: &Vector, i: usize) -> Vector;
    /// `L_{g₁} L_f^{r−1} y`, a `p × m₁` matrix.
    fn decoupling(&self, x: &Vector) -> Matrix;
    /// `L_{g₂} L_f^{r−1} y`, a `p × m₂` matrix (identically zero for a valid model).
    fn decoupling_u2(&self, x: &Vector) -> Matrix;

    /// Jacobian of the stacked output coordinates, `pr × n`.
    fn output_coordinates_jacobian(&self, x: &Vector) -> Matrix;
    /// Jacobian of `L_f^r y`, `p × n`.
    fn lie_drift_top_jacobian(&self, x: &Vector) -> Matrix;

    /// Re-projects the state after an integration step (angle wrapping, quaternion norm).
    fn normalize(&self, _x: &mut Vector) {}

    fn input_dim(&self) -> usize {
        let (m1, m2) = self.input_dims();
        m1 + m2
    }

    /// `ŷ = (y, L_f y, …, L_f^{r−1} y)`.
    fn output_coordinates(&self, x: &Vector) -> Vector {
        let (r, _) = self.dual_relative_degree();
        let p = self.output_dim();
        let mut yh = Vector::zeros(p * r);
        for i in 0..r {
            yh.rows_mut(i * p, p).copy_from(&self.lie_drift(x, i));
        }
        yh
    }

    /// `[g₁ g₂]`.
    fn actuation(&self, x: &Vector) -> Matrix {
        let (m1, m2) = self.input_dims();
        let mut g = Matrix::zeros(self.state_dim(), m1 + m2);
        g.columns_mut(0, m1).copy_from(&self.g1(x));
        g.columns_mut(m1, m2).copy_from(&self.g2(x));
        g
    }

    /// `f(x) + g₁(x)u₁ + g₂(x)u₂` with `u = (u₁, u₂)`.
    fn dynamics(&self, x: &Vector, u: &Vector) -> Vector {
        self.drift(x) + self.actuation(x) * u
    }
}

/// Which dual-relative-degree condition failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DrdCondition {
    /// `L_g L_fⁱ y ≠ 0` for some `i ≤ r − 2`.
    LowerOrderActuation,
    /// `L_{g₂} L_f^{r−1} y ≠ 0`.
    SecondChannelDirect,
    /// `rank L_{g₁} L_f^{r−1} y < m₁`.
    FirstChannelRank,
    /// `rank L_{g₂} L_f^{q−1} L_{g₁} L_f^{r−1} y < m₂`.
    SecondChannelRank,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DrdCounterexample {
    pub condition: DrdCondition,
    pub state: Vec<f64>,
    /// Offending norm (zero conditions) or rank (rank conditions).
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DrdReport {
    pub declared: (usize, usize),
    pub samples: usize,
    pub passed: bool,
    /// Smallest `m₂`-th singular value seen for the second-channel rank test.
    pub min_second_channel_sigma: f64,
    pub counterexample: Option<DrdCounterexample>,
}

fn directional(f: &dyn Fn(&Vector) -> Vector, x: &Vector, d: &Vector, step: f64) -> Vector {
    (f(&(x + d * step)) - f(&(x - d * step))) / (2.0 * step)
}

/// Flattened column-major `L_{g₁} L_f^{r−1} y`.
fn decoupling_flat(sys: &dyn ControlAffineSystem, x: &Vector) -> Vector {
    let g = sys.decoupling(x);
    Vector::from_column_slice(g.as_slice())
}

/// `L_{g₂} L_f^{q−1} L_{g₁} L_f^{r−1} y` by central differences, `(p·m₁) × m₂`.
///
/// `q = 1` uses `step`; `q = 2` nests two differences with step `nested_step`.
pub fn second_channel_gain(sys: &dyn ControlAffineSystem, x: &Vector, step: f64, nested_step: f64) -> Matrix {
    let (_, q) = sys.dual_relative_degree();
    let (_, m2) = sys.input_dims();
    let g2 = sys.g2(x);
    let base: &dyn Fn(&Vector) -> Vector = &|z: &Vector| decoupling_flat(sys, z);
    let mut out = Matrix::zeros(decoupling_flat(sys, x).len(), m2);
    for j in 0..m2 {
        let dir = g2.column(j).into_owned();
        let col = match q {
            1 => directional(base, x, &dir, step),
            2 => {
                let along_f = |z: &Vector| directional(base, z, &sys.drift(z), nested_step);
                directional(&along_f, x, &dir, nested_step)
            }
            _ => panic!("second_channel_gain: only q ≤ 2 is supported"),
        };
        out.set_column(j, &col);
    }
    out
}

/// Samples the conditions of the dual relative degree definition.
///
/// Zero conditions are judged against `tol` in the max norm, rank conditions
/// count singular values above `tol`. Stops at the first failing state.
pub fn check_dual_relative_degree(sys: &dyn ControlAffineSystem, samples: &[Vector], tol: f64) -> DrdReport {
    assert!(!samples.is_empty(), "check_dual_relative_degree: no samples");
    let (r, q) = sys.dual_relative_degree();
    let (m1, m2) = sys.input_dims();
    let mut report = DrdReport {
        declared: (r, q),
        samples: samples.len(),
        passed: true,
        min_second_channel_sigma: f64::INFINITY,
        counterexample: None,
    };
    let fail = |report: &mut DrdReport, condition, x: &Vector, value| {
        report.passed = false;
        report.counterexample = Some(DrdCounterexample { condition, state: x.iter().copied().collect(), value });
    };
    for x in samples {
        let g = sys.actuation(x);
        for i in 0..r.saturating_sub(1) {
            let lie_i = |z: &Vector| sys.lie_drift(z, i);
            for c in 0..g.ncols() {
                let v = directional(&lie_i, x, &g.column(c).into_owned(), 1e-6).amax();
                if v > tol {
                    fail(&mut report, DrdCondition::LowerOrderActuation, x, v);
                    return report;
                }
            }
        }
        let direct = sys.decoupling_u2(x).amax();
        if direct > tol {
            fail(&mut report, DrdCondition::SecondChannelDirect, x, direct);
            return report;
        }
        let rank1 = numerical_rank(&sys.decoupling(x), tol);
        if rank1 < m1 {
            fail(&mut report, DrdCondition::FirstChannelRank, x, rank1 as f64);
            return report;
        }
        if m2 > 0 {
            let gain = second_channel_gain(sys, x, 1e-6, 1e-4);
            let sv = singular_values(&gain);
            let sigma = sv.get(m2 - 1).copied().unwrap_or(0.0);
            report.min_second_channel_sigma = report.min_second_channel_sigma.min(sigma);
            let rank2 = sv.iter().filter(|s| **s > tol).count();
            if rank2 < m2 {
                fail(&mut report, DrdCondition::SecondChannelRank, x, rank2 as f64);
                return report;
            }
        }
    }
    report
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// `ẋ = u₁ + 0·u₂`, `y = x`: the second channel never reaches the output.
    pub struct DeadSecondChannel;

    impl ControlAffineSystem for DeadSecondChannel {
        fn state_dim(&self) -> usize {
            1
        }
        fn input_dims(&self) -> (usize, usize) {
            (1, 1)
        }
        fn output_dim(&self) -> usize {
            1
        }
        fn dual_relative_degree(&self) -> (usize, usize) {
            (1, 1)
        }
        fn drift(&self, _x: &Vector) -> Vector {
            Vector::zeros(1)
        }
        fn g1(&self, _x: &Vector) -> Matrix {
            Matrix::from_element(1, 1, 1.0)
        }
        fn g2(&self, _x: &Vector) -> Matrix {
            Matrix::zeros(1, 1)
        }
        fn output(&self, x: &Vector) -> Vector {
            x.clone()
        }
        fn lie_drift(&self, x: &Vector, i: usize) -> Vector {
            if i == 0 {
                x.clone()
            } else {
                Vector::zeros(1)
            }
        }
        fn decoupling(&self, _x: &Vector) -> Matrix {
            Matrix::from_element(1, 1, 1.0)
        }
        fn decoupling_u2(&self, _x: &Vector) -> Matrix {
            Matrix::zeros(1, 1)
        }
        fn output_coordinates_jacobian(&self, _x: &Vector) -> Matrix {
            Matrix::from_element(1, 1, 1.0)
        }
        fn lie_drift_top_jacobian(&self, _x: &Vector) -> Matrix {
            Matrix::zeros(1, 1)
        }
    }

    /// Checks every closed-form Lie derivative against central differences.
    pub fn assert_lie_table(sys: &dyn ControlAffineSystem, x: &Vector, rel_tol: f64) {
        use crate::math::fd_jacobian;
        let (r, _) = sys.dual_relative_degree();
        let close = |a: &Matrix, b: &Matrix, what: &str| {
            let scale = b.amax().max(1.0);
            assert!((a - b).amax() <= rel_tol * scale, "{what}: analytic {a} vs fd {b} at {x}");
        };
        let f = sys.drift(x);
        let y0 = sys.output(x);
        close(
            &Matrix::from_column_slice(y0.len(), 1, sys.lie_drift(x, 0).as_slice()),
            &Matrix::from_column_slice(y0.len(), 1, y0.as_slice()),
            "L_f^0 y",
        );
        for i in 0..r {
            let jac = fd_jacobian(|z| sys.lie_drift(z, i), x, 1e-6);
            let next = jac.clone() * &f;
            close(
                &Matrix::from_column_slice(next.len(), 1, sys.lie_drift(x, i + 1).as_slice()),
                &Matrix::from_column_slice(next.len(), 1, next.as_slice()),
                "L_f^(i+1) y",
            );
            if i + 1 == r {
                close(&sys.decoupling(x), &(jac.clone() * sys.g1(x)), "L_g1 L_f^(r-1) y");
                close(&sys.decoupling_u2(x), &(jac * sys.g2(x)), "L_g2 L_f^(r-1) y");
            }
        }
        close(&sys.output_coordinates_jacobian(x), &fd_jacobian(|z| sys.output_coordinates(z), x, 1e-6), "d yhat / dx");
        close(&sys.lie_drift_top_jacobian(x), &fd_jacobian(|z| sys.lie_drift(z, r), x, 1e-6), "d L_f^r y / dx");
    }
}

#[cfg(test)]
mod tests {
    use super::testing::DeadSecondChannel;
    use super::*;
    use crate::math::SampleBox;

    #[test]
    fn dead_second_channel_fails_rank_condition() {
        let samples = SampleBox::symmetric(&[2.0]).halton_points(10);
        let report = check_dual_relative_degree(&DeadSecondChannel, &samples, 1e-6);
        assert!(!report.passed);
        let cx = report.counterexample.unwrap();
        assert_eq!(cx.condition, DrdCondition::SecondChannelRank);
        assert_eq!(cx.value, 0.0);
    }

    #[test]
    fn default_dynamics_combines_channels() {
        let sys = Unicycle::new([0.35, 0.0]);
        let x = Vector::from_vec(alloc::vec![0.0, 0.0, 0.0]);
        let u = Vector::from_vec(alloc::vec![1.0, 2.0]);
        assert_eq!(sys.dynamics(&x, &u).as_slice(), &[1.35, 0.0, 2.0]);
    }
}
