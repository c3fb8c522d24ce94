//! Numerical laboratory for the entropy of mixing.
//!
//! - [`gas`]: event-driven ideal gas with selective membranes and a heat ledger.
//! - [`counting`]: log-space microstate counting and occupancy statistics.
//! - [`quantum`]: 1D wave packets, symmetrized many-body states and the
//!   localized-particle decomposition.

pub mod counting;
pub mod error;
pub mod gas;
pub mod quantum;

pub use error::{Error, Result};
