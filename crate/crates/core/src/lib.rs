//! Degeneracy-aware LiDAR-inertial odometry front-end.
// `!(x > 0.0)`-style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correspondence;
pub mod error;
pub mod eval;
pub mod io;
pub mod lie;
pub mod pointmap;
pub mod propagation;
pub mod registration;
pub mod runner;
pub mod sim;

pub use error::{LioError, Result};
