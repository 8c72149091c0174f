//! Desk-scale simulator of single-shot superconducting qubit readout with a
//! cavity bifurcation amplifier: transmon spectra, dispersive cavity pulls,
//! driven-Kerr bistability, stochastic field trajectories, a homodyne
//! detection chain, and the measurement experiments built on top of them.

pub mod chain;
pub mod config;
pub mod dispersive;
pub mod error;
pub mod experiments;
pub mod jba;
pub mod output;
pub mod pulse;
pub mod readout;
pub mod seeding;
pub mod transmon;

pub use error::{Error, Result};
