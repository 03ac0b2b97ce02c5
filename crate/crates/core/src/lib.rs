//! Photonic quantum reservoir computing simulator.
//!
//! Multiphoton Fock states propagate through a four-mode interferometer
//! whose phases encode the input signal and feed back past measurement
//! statistics. The per-step outcome probabilities form the feature matrix
//! of a ridge-regression readout, which is scored on standard time-series
//! benchmarks.

pub mod circuit;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod hyperopt;
pub mod presets;
pub mod readout;
pub mod reservoir;
pub mod tasks;

pub use error::{Error, Result};
