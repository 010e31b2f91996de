//! Quasi-classical cooling and trapping of a single two-level atom in a
//! driven optical cavity with a far-detuned Laguerre-Gauss (doughnut) trap.

pub mod cli;
pub mod coefficients;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod fields;
pub mod hilbert;
pub mod params;
pub mod sde;
pub mod validation;

pub use error::{Error, Result};
pub use params::{PhysicalParams, Scenario, StarkCase};
