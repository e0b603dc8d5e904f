//! Thermodynamic formalism for the doubling map with the singular potentials
//! `psi_c(x) = 2 log|sin(pi (x - c))|`.
//!
//! The crate computes pressure brackets on cut-out subshifts, the endpoints of
//! the Birkhoff spectrum via mean cycles, Riesz-product masses and L^q sums,
//! Legendre and Birkhoff spectra, and parameter scans over `c`.

pub mod cli;
pub mod config;
pub mod error;
pub mod ergodic_opt;
pub mod potential;
pub mod riesz;
pub mod scan;
pub mod spectra;
pub mod symbolic;
pub mod transfer;

pub use config::{Config, OutputFormat};
pub use error::{Error, Result};
pub use symbolic::{CylinderWord, Dyadic, SftGraph, TorusPoint};
