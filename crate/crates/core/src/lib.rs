//! Weighted-MSE transceiver design for point-to-point MIMO links.
//!
//! * [`system_model`]: channel model, MSE matrices, LMMSE equalizer and the
//!   diagonal, general and matrix-field weighted objectives.
//! * [`power_allocation`]: weighted, ordered and Pareto water-filling, the
//!   KKT residual system, stationary-point enumeration and a grid oracle.
//! * [`majorization`]: the majorization order, the eigenvalue trace bound and
//!   an empirical Schur-convexity probe.
//! * [`precoder`]: structured precoder designs built from the above.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod error;
pub mod linalg;
pub mod majorization;
pub mod power_allocation;
pub mod precoder;
pub mod system_model;

pub use error::{Error, Result};
pub use linalg::CMatrix;
pub use num_complex::Complex64;
