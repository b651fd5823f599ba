use alloc::format;
use alloc::vec;

use nalgebra::{Matrix3, Vector3};

use super::ControlAffineSystem;
use crate::error::Error;
use crate::math::{quat_mul, quat_norm, quat_to_rot, quat_to_rot_partials};
use crate::{Matrix, Result, Vector};

/// Tolerance on `‖q‖ − 1` accepted by the typed dynamics.
pub const QUATERNION_TOLERANCE: f64 = 1e-6;

/// Rigid-body quadrotor state. `q` is scalar-first `(w, x, y, z)`, body to world.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Quad3DState {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub attitude: [f64; 4],
    pub rates: [f64; 3],
}

impl Quad3DState {
    pub fn hover_at(position: [f64; 3]) -> Self {
        Quad3DState { position, velocity: [0.0; 3], attitude: [1.0, 0.0, 0.0, 0.0], rates: [0.0; 3] }
    }

    pub fn to_vector(&self) -> Vector {
        let mut v = Vector::zeros(13);
        v.as_mut_slice()[0..3].copy_from_slice(&self.position);
        v.as_mut_slice()[3..6].copy_from_slice(&self.velocity);
        v.as_mut_slice()[6..10].copy_from_slice(&self.attitude);
        v.as_mut_slice()[10..13].copy_from_slice(&self.rates);
        v
    }

    pub fn from_vector(v: &Vector) -> Self {
        let s = v.as_slice();
        Quad3DState {
            position: [s[0], s[1], s[2]],
            velocity: [s[3], s[4], s[5]],
            attitude: [s[6], s[7], s[8], s[9]],
            rates: [s[10], s[11], s[12]],
        }
    }
}

/// `q̇ = ½ Q(q) ω`, i.e. the 4×3 matrix of `½ q ⊗ (0, ω)` in `ω`.
pub fn quat_rate_matrix(q: &[f64; 4]) -> nalgebra::Matrix4x3<f64> {
    let [w, x, y, z] = *q;
    nalgebra::Matrix4x3::new(-x, -y, -z, w, -z, y, z, w, -x, -y, x, w) * 0.5
}

fn quat_of(x: &Vector, at: usize) -> [f64; 4] {
    [x[at], x[at + 1], x[at + 2], x[at + 3]]
}

fn normalize_quat(x: &mut Vector, at: usize) {
    let n = quat_norm(&quat_of(x, at));
    if n > 0.0 {
        x.rows_mut(at, 4).unscale_mut(n);
    }
}

/// Gradient rows of `R(q) e_z` with respect to `q`, as a 3×4 block.
fn thrust_axis_jacobian(q: &[f64; 4]) -> nalgebra::Matrix3x4<f64> {
    let partials = quat_to_rot_partials(q);
    let mut j = nalgebra::Matrix3x4::zeros();
    for (k, p) in partials.iter().enumerate() {
        j.set_column(k, &p.column(2));
    }
    j
}

/// Quadrotor with thrust `τ` (`u₁`) and body moments `M` (`u₂`), 13 states
/// `(y, ẏ, q, ω)`. The gyroscopic term `−J⁻¹(ω × Jω)` lives in the drift.
#[derive(Debug, Clone, PartialEq)]
pub struct Quad3d {
    pub mass: f64,
    pub inertia: Matrix3<f64>,
    pub gravity: f64,
    inertia_inv: Matrix3<f64>,
}

impl Default for Quad3d {
    fn default() -> Self {
        Quad3d::new(1.0, Matrix3::identity(), 9.81).expect("unit parameters are valid")
    }
}

impl Quad3d {
    pub fn new(mass: f64, inertia: Matrix3<f64>, gravity: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid("mass", format!("must be positive, got {mass}")));
        }
        if (inertia - inertia.transpose()).amax() > 1e-12 * inertia.amax().max(1.0) {
            return Err(Error::invalid("inertia", "must be symmetric"));
        }
        if inertia.cholesky().is_none() {
            return Err(Error::invalid("inertia", "must be positive definite"));
        }
        let inertia_inv = inertia.try_inverse().ok_or_else(|| Error::invalid("inertia", "must be invertible"))?;
        Ok(Quad3d { mass, inertia, gravity, inertia_inv })
    }

    /// Typed dynamics; rejects attitudes that are not unit quaternions.
    pub fn derivative(&self, s: &Quad3DState, tau: f64, moment: [f64; 3]) -> Result<[f64; 13]> {
        let norm = quat_norm(&s.attitude);
        if (norm - 1.0).abs() > QUATERNION_TOLERANCE {
            return Err(Error::NonUnitQuaternion { norm });
        }
        let x = s.to_vector();
        let u = Vector::from_vec(vec![tau, moment[0], moment[1], moment[2]]);
        let d = self.dynamics(&x, &u);
        let mut out = [0.0; 13];
        out.copy_from_slice(d.as_slice());
        Ok(out)
    }
}

impl ControlAffineSystem for Quad3d {
    fn state_dim(&self) -> usize {
        13
    }

    fn input_dims(&self) -> (usize, usize) {
        (1, 3)
    }

    fn output_dim(&self) -> usize {
        3
    }

    fn dual_relative_degree(&self) -> (usize, usize) {
        (2, 2)
    }

    fn drift(&self, x: &Vector) -> Vector {
        let q = quat_of(x, 6);
        let w = Vector3::new(x[10], x[11], x[12]);
        let q_dot = quat_rate_matrix(&q) * w;
        let w_dot = -self.inertia_inv * w.cross(&(self.inertia * w));
        let mut f = Vector::zeros(13);
        f.rows_mut(0, 3).copy_from(&x.rows(3, 3));
        f[5] = -self.gravity;
        f.rows_mut(6, 4).copy_from(&q_dot);
        f.rows_mut(10, 3).copy_from(&w_dot);
        f
    }

    fn g1(&self, x: &Vector) -> Matrix {
        let b3 = quat_to_rot(&quat_of(x, 6)).column(2) / self.mass;
        let mut g = Matrix::zeros(13, 1);
        g.view_mut((3, 0), (3, 1)).copy_from(&b3);
        g
    }

    fn g2(&self, _x: &Vector) -> Matrix {
        let mut g = Matrix::zeros(13, 3);
        g.view_mut((10, 0), (3, 3)).copy_from(&self.inertia_inv);
        g
    }

    fn output(&self, x: &Vector) -> Vector {
        x.rows(0, 3).into_owned()
    }

    fn lie_drift(&self, x: &Vector, i: usize) -> Vector {
        match i {
            0 => self.output(x),
            1 => x.rows(3, 3).into_owned(),
            2 => Vector::from_vec(vec![0.0, 0.0, -self.gravity]),
            _ => panic!("quad3d: L_f^{i} y requested beyond r = 2"),
        }
    }

    fn decoupling(&self, x: &Vector) -> Matrix {
        let b3 = quat_to_rot(&quat_of(x, 6)).column(2) / self.mass;
        Matrix::from_column_slice(3, 1, b3.as_slice())
    }

    fn decoupling_u2(&self, _x: &Vector) -> Matrix {
        Matrix::zeros(3, 3)
    }

    fn output_coordinates_jacobian(&self, _x: &Vector) -> Matrix {
        let mut j = Matrix::zeros(6, 13);
        j.view_mut((0, 0), (6, 6)).fill_with_identity();
        j
    }

    fn lie_drift_top_jacobian(&self, _x: &Vector) -> Matrix {
        Matrix::zeros(3, 13)
    }

    fn normalize(&self, x: &mut Vector) {
        normalize_quat(x, 6);
    }
}

/// Kinematic reduction of [`Quad3d`] driven by thrust `τ` (`u₁`) and body
/// rates `ω` (`u₂`), 10 states `(y, ẏ, q)`.
///
/// This is the model flight stacks with an inner rate loop expose. The second
/// channel turns only the thrust axis, so the second-channel rank is 2, not 3:
/// yaw rate never reaches the output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad3dRate {
    pub mass: f64,
    pub gravity: f64,
}

impl Default for Quad3dRate {
    fn default() -> Self {
        Quad3dRate { mass: 1.0, gravity: 9.81 }
    }
}

impl Quad3dRate {
    pub fn new(mass: f64, gravity: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid("mass", format!("must be positive, got {mass}")));
        }
        Ok(Quad3dRate { mass, gravity })
    }

    /// `∂(L_{g₁}L_f y)/∂q`, used by the attitude CLF.
    pub fn thrust_axis_jacobian(&self, q: &[f64; 4]) -> nalgebra::Matrix3x4<f64> {
        thrust_axis_jacobian(q) / self.mass
    }
}

impl ControlAffineSystem for Quad3dRate {
    fn state_dim(&self) -> usize {
        10
    }

    fn input_dims(&self) -> (usize, usize) {
        (1, 3)
    }

    fn output_dim(&self) -> usize {
        3
    }

    fn dual_relative_degree(&self) -> (usize, usize) {
        (2, 1)
    }

    fn drift(&self, x: &Vector) -> Vector {
        let mut f = Vector::zeros(10);
        f.rows_mut(0, 3).copy_from(&x.rows(3, 3));
        f[5] = -self.gravity;
        f
    }

    fn g1(&self, x: &Vector) -> Matrix {
        let b3 = quat_to_rot(&quat_of(x, 6)).column(2) / self.mass;
        let mut g = Matrix::zeros(10, 1);
        g.view_mut((3, 0), (3, 1)).copy_from(&b3);
        g
    }

    fn g2(&self, x: &Vector) -> Matrix {
        let mut g = Matrix::zeros(10, 3);
        g.view_mut((6, 0), (4, 3)).copy_from(&quat_rate_matrix(&quat_of(x, 6)));
        g
    }

    fn output(&self, x: &Vector) -> Vector {
        x.rows(0, 3).into_owned()
    }

    fn lie_drift(&self, x: &Vector, i: usize) -> Vector {
        match i {
            0 => self.output(x),
            1 => x.rows(3, 3).into_owned(),
            2 => Vector::from_vec(vec![0.0, 0.0, -self.gravity]),
            _ => panic!("quad3d: L_f^{i} y requested beyond r = 2"),
        }
    }

    fn decoupling(&self, x: &Vector) -> Matrix {
        let b3 = quat_to_rot(&quat_of(x, 6)).column(2) / self.mass;
        Matrix::from_column_slice(3, 1, b3.as_slice())
    }

    fn decoupling_u2(&self, _x: &Vector) -> Matrix {
        Matrix::zeros(3, 3)
    }

    fn output_coordinates_jacobian(&self, _x: &Vector) -> Matrix {
        let mut j = Matrix::zeros(6, 10);
        j.view_mut((0, 0), (6, 6)).fill_with_identity();
        j
    }

    fn lie_drift_top_jacobian(&self, _x: &Vector) -> Matrix {
        Matrix::zeros(3, 10)
    }

    fn normalize(&self, x: &mut Vector) {
        normalize_quat(x, 6);
    }
}

/// `½ q ⊗ (0, ω)` through the Hamilton product; used to cross-check [`quat_rate_matrix`].
pub fn quat_rate_by_product(q: &[f64; 4], w: &[f64; 3]) -> [f64; 4] {
    let p = quat_mul(q, &[0.0, w[0], w[1], w[2]]);
    [0.5 * p[0], 0.5 * p[1], 0.5 * p[2], 0.5 * p[3]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{uniform_quaternion, SampleBox};
    use crate::models::testing::assert_lie_table;
    use crate::models::{check_dual_relative_degree, DrdCondition};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn random_state(rng: &mut impl Rng) -> Quad3DState {
        let mut r = |s: f64| s * (2.0 * rng.random::<f64>() - 1.0);
        let position = [r(2.0), r(2.0), r(2.0)];
        let velocity = [r(1.0), r(1.0), r(1.0)];
        let rates = [r(2.0), r(2.0), r(2.0)];
        let attitude = uniform_quaternion(rng.random(), rng.random(), rng.random());
        Quad3DState { position, velocity, attitude, rates }
    }

    #[test]
    fn hover_and_free_fall() {
        let sys = Quad3d::default();
        let s = Quad3DState::hover_at([0.0, 0.0, 1.0]);
        let d = sys.derivative(&s, sys.mass * sys.gravity, [0.0; 3]).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-15));
        let d = sys.derivative(&s, 0.0, [0.0; 3]).unwrap();
        assert_eq!(&d[3..6], &[0.0, 0.0, -9.81]);
    }

    #[test]
    fn spin_about_body_z() {
        let sys = Quad3d::default();
        let mut s = Quad3DState::hover_at([0.0; 3]);
        s.attitude = uniform_quaternion(0.2, 0.4, 0.8);
        s.rates = [0.0, 0.0, 1.0];
        let d = sys.derivative(&s, 0.0, [0.0; 3]).unwrap();
        assert_eq!(&d[10..13], &[0.0, 0.0, 0.0]);
        let expect = quat_rate_by_product(&s.attitude, &[0.0, 0.0, 1.0]);
        for k in 0..4 {
            assert_relative_eq!(d[6 + k], expect[k], epsilon = 1e-15);
        }
    }

    #[test]
    fn rejects_bad_quaternion_and_inertia() {
        let sys = Quad3d::default();
        let mut s = Quad3DState::hover_at([0.0; 3]);
        s.attitude = [1.0 + 1e-5, 0.0, 0.0, 0.0];
        assert!(matches!(sys.derivative(&s, 0.0, [0.0; 3]), Err(Error::NonUnitQuaternion { .. })));
        s.attitude = [1.0 + 1e-7, 0.0, 0.0, 0.0];
        assert!(sys.derivative(&s, 0.0, [0.0; 3]).is_ok());

        let skewed = Matrix3::new(1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(Quad3d::new(1.0, skewed, 9.81).is_err());
        assert!(Quad3d::new(1.0, -Matrix3::identity(), 9.81).is_err());
        assert!(Quad3d::new(0.0, Matrix3::identity(), 9.81).is_err());
    }

    #[test]
    fn quaternion_rate_is_tangent_and_matches_product() {
        let sys = Quad3d::new(1.3, Matrix3::new(0.02, 0.001, 0.0, 0.001, 0.03, 0.0, 0.0, 0.0, 0.05), 9.81).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let s = random_state(&mut rng);
            let d = sys.derivative(&s, 5.0, [0.1, -0.2, 0.3]).unwrap();
            let qdot = &d[6..10];
            let dot: f64 = s.attitude.iter().zip(qdot).map(|(a, b)| a * b).sum();
            assert!(dot.abs() <= 1e-15, "{dot}");
            let expect = quat_rate_by_product(&s.attitude, &s.rates);
            for k in 0..4 {
                assert_relative_eq!(qdot[k], expect[k], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn lie_tables_match_finite_differences() {
        let full = Quad3d::default();
        let rate = Quad3dRate::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = random_state(&mut rng).to_vector();
            assert_lie_table(&full, &x, 1e-4);
            assert_lie_table(&rate, &x.rows(0, 10).into_owned(), 1e-4);
        }
        let q = uniform_quaternion(0.3, 0.1, 0.9);
        let fd = crate::math::fd_jacobian(
            |z| {
                let b = quat_to_rot(&[z[0], z[1], z[2], z[3]]).column(2).into_owned();
                Vector::from_column_slice(b.as_slice())
            },
            &Vector::from_column_slice(&q),
            1e-6,
        );
        let analytic = rate.thrust_axis_jacobian(&q);
        for i in 0..3 {
            for k in 0..4 {
                assert_relative_eq!(analytic[(i, k)], fd[(i, k)], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn second_channel_rank_is_two() {
        let rate = Quad3dRate::default();
        let samples: alloc::vec::Vec<_> = SampleBox::new(alloc::vec![0.0; 3], alloc::vec![1.0; 3])
            .halton_points(20)
            .into_iter()
            .map(|u| {
                let mut x = Vector::zeros(10);
                x.rows_mut(6, 4).copy_from_slice(&uniform_quaternion(u[0], u[1], u[2]));
                x
            })
            .collect();
        let report = check_dual_relative_degree(&rate, &samples, 1e-6);
        let cx = report.counterexample.expect("yaw rate cannot reach the thrust axis");
        assert_eq!(cx.condition, DrdCondition::SecondChannelRank);
        assert_eq!(cx.value, 2.0);
    }
}
