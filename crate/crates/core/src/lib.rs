//! Dual-relative-degree control barrier functions.
//!
//! Systems whose first input channel reaches the output at relative degree `r`
//! while a second channel only acts through the first (e.g. thrust direction
//! steered by attitude) cannot be filtered by a plain CBF-QP on the output.
//! This crate builds the composite certificate `h = h₀(ŷ) − V/μ`, where `h₀` is
//! a barrier on the output integrator chain and `V` is a tracking Lyapunov
//! function for the orientation of the first channel, and filters controls
//! against it.
//!
//! The crate is `no_std` (it needs `alloc`); file formats and the command line
//! live in the `drdcbf` companion crate.

#![no_std]
// Parameter guards are written `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod chain;
pub mod drd;
pub mod filter;
pub mod math;
pub mod models;
pub mod scenario;
pub mod sim;
pub mod verify;

mod error;

pub use error::{Error, Result};

/// Heap-allocated column vector used for states, inputs and gradients.
pub type Vector = nalgebra::DVector<f64>;
/// Heap-allocated matrix.
pub type Matrix = nalgebra::DMatrix<f64>;
