//! Recovery of pure component spectra and per-pixel concentration profiles
//! from hyperspectral mixture cubes using second-order statistics (AMUSE),
//! followed by histogram-baseline canonicalization of each recovered
//! spectrum's peak direction.
//!
//! The pipeline is split into four layers:
//!
//! * [`spectra_model`]: grids, spectra, mixing matrices, the forward
//!   mixing model and the two reference mixture experiments.
//! * [`amuse`]: centering, zero-lag covariance, signal/noise subspace split,
//!   whitening, lagged covariance and rotation, mixing and source estimates.
//! * [`sign_correction`]: histogram baseline, derivative-sign extrema and the
//!   keep/flip decision table applied to every estimated source.
//! * [`evaluation`]: permutation/sign/scale matching against ground truth,
//!   Amari index, concentration profiles and sign accuracy.
//!
//! [`io`] holds the CSV and JSON formats shared with the command-line tool.

pub mod amuse;
pub mod error;
pub mod evaluation;
pub mod io;
mod linalg;
mod serde_rows;
pub mod sign_correction;
pub mod spectra_model;

pub use error::{Error, Result};

/// Dense row-major-addressed real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
