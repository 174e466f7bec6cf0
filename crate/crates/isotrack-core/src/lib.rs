//! Gradient-free isoline tracking for a constant-speed Dubins vehicle.
//!
//! The crate is `no_std` (it needs `alloc` for gridded fields, trajectories
//! and dynamically sized matrices). IO, file formats and the command-line
//! front end live in the `isotrack` crate.
//!
//! Module map:
//!
//! * [`field`]: scalar concentration fields with value, gradient and Hessian
//!   queries, smoothness bounds and lattice sampling.
//! * [`dubins`]: RK4 integration of the unicycle model and the field-frame
//!   observables `(s, phi, n)`.
//! * [`controller`]: the PI-like concentration-feedback law with the
//!   `tanh` sliding-surface error term.
//! * [`stability`]: gain conditions, Jacobian, Lyapunov matrices and the
//!   steady-state error bounds for the `ki = 0` regime.
//! * [`simulator`]: the closed loop, tracking metrics and parameter sweeps.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod controller;
pub mod dubins;
mod error;
pub mod field;
pub mod simulator;
pub mod stability;

pub use error::{Error, Result};

/// Planar position or direction, in metres (or concentration/m for gradients).
pub type Vec2 = nalgebra::Vector2<f64>;
/// 2×2 matrix, used for covariances and Hessians.
pub type Mat2 = nalgebra::Matrix2<f64>;
/// 3×3 matrix, used for the linearized closed loop.
pub type Mat3 = nalgebra::Matrix3<f64>;
