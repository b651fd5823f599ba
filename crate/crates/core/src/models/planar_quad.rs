use alloc::vec;

use super::ControlAffineSystem;
use crate::math::{cos, sin, wrap_angle};
use crate::{Matrix, Vector};

/// Planar quadrotor state `(x, z, θ, ẋ, ż, ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlanarQuadState {
    pub x: f64,
    pub z: f64,
    pub theta: f64,
    pub vx: f64,
    pub vz: f64,
    pub omega: f64,
}

impl PlanarQuadState {
    pub fn to_vector(&self) -> Vector {
        Vector::from_vec(vec![self.x, self.z, self.theta, self.vx, self.vz, self.omega])
    }

    pub fn from_vector(v: &Vector) -> Self {
        PlanarQuadState { x: v[0], z: v[1], theta: wrap_angle(v[2]), vx: v[3], vz: v[4], omega: v[5] }
    }
}

/// Planar quadrotor with mass-normalised thrust `τ` and moment `M`:
/// `(ẍ, z̈) = τ(−sin θ, cos θ) − (0, g)`, `ω̇ = M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarQuad {
    pub gravity: f64,
}

impl Default for PlanarQuad {
    fn default() -> Self {
        PlanarQuad { gravity: 9.81 }
    }
}

impl PlanarQuad {
    pub fn new(gravity: f64) -> Self {
        PlanarQuad { gravity }
    }

    pub fn derivative(&self, s: &PlanarQuadState, tau: f64, moment: f64) -> [f64; 6] {
        [s.vx, s.vz, s.omega, -tau * sin(s.theta), -self.gravity + tau * cos(s.theta), moment]
    }
}

impl ControlAffineSystem for PlanarQuad {
    fn state_dim(&self) -> usize {
        6
    }

    fn input_dims(&self) -> (usize, usize) {
        (1, 1)
    }

    fn output_dim(&self) -> usize {
        2
    }

    fn dual_relative_degree(&self) -> (usize, usize) {
        (2, 2)
    }

    fn drift(&self, x: &Vector) -> Vector {
        Vector::from_vec(vec![x[3], x[4], x[5], 0.0, -self.gravity, 0.0])
    }

    fn g1(&self, x: &Vector) -> Matrix {
        Matrix::from_column_slice(6, 1, &[0.0, 0.0, 0.0, -sin(x[2]), cos(x[2]), 0.0])
    }

    fn g2(&self, _x: &Vector) -> Matrix {
        Matrix::from_column_slice(6, 1, &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0])
    }

    fn output(&self, x: &Vector) -> Vector {
        Vector::from_vec(vec![x[0], x[1]])
    }

    fn lie_drift(&self, x: &Vector, i: usize) -> Vector {
        match i {
            0 => self.output(x),
            1 => Vector::from_vec(vec![x[3], x[4]]),
            2 => Vector::from_vec(vec![0.0, -self.gravity]),
            _ => panic!("planar quad: L_f^{i} y requested beyond r = 2"),
        }
    }

    fn decoupling(&self, x: &Vector) -> Matrix {
        Matrix::from_column_slice(2, 1, &[-sin(x[2]), cos(x[2])])
    }

    fn decoupling_u2(&self, _x: &Vector) -> Matrix {
        Matrix::zeros(2, 1)
    }

    fn output_coordinates_jacobian(&self, _x: &Vector) -> Matrix {
        let mut j = Matrix::zeros(4, 6);
        for (row, col) in [0, 1, 3, 4].into_iter().enumerate() {
            j[(row, col)] = 1.0;
        }
        j
    }

    fn lie_drift_top_jacobian(&self, _x: &Vector) -> Matrix {
        Matrix::zeros(2, 6)
    }

    fn normalize(&self, x: &mut Vector) {
        x[2] = wrap_angle(x[2]);
    }
}
