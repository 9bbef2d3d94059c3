//! Simulation and analysis of universal polarization cloning of single photons
//! by stimulated emission in type-II parametric down-conversion.
//!
//! The crate is layered bottom-up:
//!
//! - [`fock`]: sparse bosonic Fock states over a fixed registry of optical modes
//! - [`optics`]: linear-optical elements acting on creation operators, and the
//!   Gaussian temporal-overlap model for a delayed input photon
//! - [`source`]: the down-conversion interaction, input injection and
//!   perturbative time evolution
//! - [`detection`]: polarization analyzers, threshold detectors, exact outcome
//!   tables and Monte Carlo sampling
//! - [`experiment`]: delay scans over analyzer bases and schemes
//! - [`analysis`]: peak/base ratio, clone and anti-clone fidelities,
//!   universality across bases
//! - [`cli`]: configuration loading and the `scan`/`fidelity` commands

pub mod analysis;
pub mod cli;
pub mod detection;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod optics;
pub mod source;
pub mod tolerances;

pub use error::{Error, Result};
