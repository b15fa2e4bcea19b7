//! Monte Carlo harness for the transceiver designs in `wmse-core`: seeded
//! channel and symbol generation, QPSK link simulation, analytic MSE sweeps,
//! CSV output and a self-check suite.

pub mod channel;
pub mod config;
pub mod error;
pub mod modulation;
pub mod record;
pub mod rng;
pub mod sweep;
pub mod verify;

pub use config::{Design, Experiment, SimConfig};
pub use error::SimError;
pub use record::{Metric, SimRecord};
