use alloc::vec;

use super::ControlAffineSystem;
use crate::math::{cos, sin, wrap_angle};
use crate::{Matrix, Vector};

/// Planar position and heading.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UnicycleState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl UnicycleState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        UnicycleState { x, y, theta: wrap_angle(theta) }
    }

    pub fn to_vector(&self) -> Vector {
        Vector::from_vec(vec![self.x, self.y, self.theta])
    }

    pub fn from_vector(v: &Vector) -> Self {
        UnicycleState::new(v[0], v[1], v[2])
    }
}

/// Unicycle pushed by a constant drift: `ṗ = d + v(cos θ, sin θ)`, `θ̇ = ω`.
///
/// `u₁ = v` reaches the position at relative degree 1, `u₂ = ω` only turns
/// the direction `u₁` acts in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unicycle {
    pub drift: [f64; 2],
}

impl Unicycle {
    pub fn new(drift: [f64; 2]) -> Self {
        Unicycle { drift }
    }

    pub fn derivative(&self, s: &UnicycleState, v: f64, omega: f64) -> [f64; 3] {
        [self.drift[0] + v * cos(s.theta), self.drift[1] + v * sin(s.theta), omega]
    }
}

impl ControlAffineSystem for Unicycle {
    fn state_dim(&self) -> usize {
        3
    }

    fn input_dims(&self) -> (usize, usize) {
        (1, 1)
    }

    fn output_dim(&self) -> usize {
        2
    }

    fn dual_relative_degree(&self) -> (usize, usize) {
        (1, 1)
    }

    fn drift(&self, _x: &Vector) -> Vector {
        Vector::from_vec(vec![self.drift[0], self.drift[1], 0.0])
    }

    fn g1(&self, x: &Vector) -> Matrix {
        Matrix::from_column_slice(3, 1, &[cos(x[2]), sin(x[2]), 0.0])
    }

    fn g2(&self, _x: &Vector) -> Matrix {
        Matrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0])
    }

    fn output(&self, x: &Vector) -> Vector {
        x.rows(0, 2).into_owned()
    }

    fn lie_drift(&self, x: &Vector, i: usize) -> Vector {
        match i {
            0 => self.output(x),
            1 => Vector::from_vec(vec![self.drift[0], self.drift[1]]),
            _ => panic!("unicycle: L_f^{i} y requested beyond r = 1"),
        }
    }

    fn decoupling(&self, x: &Vector) -> Matrix {
        Matrix::from_column_slice(2, 1, &[cos(x[2]), sin(x[2])])
    }

    fn decoupling_u2(&self, _x: &Vector) -> Matrix {
        Matrix::zeros(2, 1)
    }

    fn output_coordinates_jacobian(&self, _x: &Vector) -> Matrix {
        Matrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    }

    fn lie_drift_top_jacobian(&self, _x: &Vector) -> Matrix {
        Matrix::zeros(2, 3)
    }

    fn normalize(&self, x: &mut Vector) {
        x[2] = wrap_angle(x[2]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{SampleBox, PI};
    use crate::models::testing::assert_lie_table;
    use crate::models::{check_dual_relative_degree, second_channel_gain};
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn derivative_examples() {
        let s = UnicycleState::new(0.0, 0.0, 0.0);
        assert_eq!(Unicycle::new([0.0, 0.0]).derivative(&s, 1.0, 0.0), [1.0, 0.0, 0.0]);

        let s = UnicycleState::new(0.0, 0.0, PI / 2.0);
        let d = Unicycle::new([0.35, 0.0]).derivative(&s, 0.0, 0.0);
        assert_eq!(d, [0.35, 0.0, 0.0]);

        let s = UnicycleState::new(1.0, 2.0, PI / 2.0);
        let d = Unicycle::new([0.0, 0.0]).derivative(&s, 2.0, 0.5);
        let expect = [2.0 * (PI / 2.0).cos(), 2.0 * (PI / 2.0).sin(), 0.5];
        for i in 0..3 {
            assert_relative_eq!(d[i], expect[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn state_heading_is_wrapped() {
        let s = UnicycleState::new(0.0, 0.0, 3.0 * PI / 2.0);
        assert_relative_eq!(s.theta, -PI / 2.0, epsilon = 1e-12);
        let mut v = Vector::from_vec(vec![0.0, 0.0, 7.0]);
        Unicycle::new([0.0, 0.0]).normalize(&mut v);
        assert!(v[2] > -PI && v[2] <= PI);
    }

    #[test]
    fn dual_relative_degree_one_one() {
        let sys = Unicycle::new([0.35, -0.1]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let samples = SampleBox::symmetric(&[3.0, 3.0, PI]).uniform_points(100, &mut rng);
        let report = check_dual_relative_degree(&sys, &samples, 1e-6);
        assert!(report.passed, "{report:?}");
        assert_eq!(report.declared, (1, 1));
    }

    #[test]
    fn lie_table_and_turning_direction() {
        let sys = Unicycle::new([0.35, 0.2]);
        for x in SampleBox::symmetric(&[3.0, 3.0, PI]).halton_points(200) {
            assert_lie_table(&sys, &x, 1e-4);
            let th = x[2];
            assert_relative_eq!(sys.decoupling(&x)[0], th.cos(), epsilon = 1e-15);
            let gain = second_channel_gain(&sys, &x, 1e-6, 1e-4);
            assert_relative_eq!(gain[(0, 0)], -th.sin(), epsilon = 1e-8);
            assert_relative_eq!(gain[(1, 0)], th.cos(), epsilon = 1e-8);
        }
    }
}
