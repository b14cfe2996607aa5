//! Simulation core for flux-pulse-assisted dispersive readout of a fluxonium qubit.
//!
//! The crate is `no_std` and needs only an allocator. Everything that touches
//! the filesystem, the command line or threads lives in the `fluxread` crate.
//!
//! Frequencies are angular (rad/s) throughout; use [`units::hz`] and
//! [`units::to_hz`] at the edges. Flux is dimensionless, in units of the flux
//! quantum.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod calibration;
pub mod coupled;
mod error;
pub mod fit;
pub mod fluxonium;
pub mod readout;
pub mod shots;
pub mod units;

pub use error::{Error, Result};
pub use fluxonium::{FluxBias, FluxoniumParams, FluxoniumSolver, SpectrumResult};
