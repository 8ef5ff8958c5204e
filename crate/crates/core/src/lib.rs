//! Exact pointer shifts and spreads for pre- and postselected (PPS)
//! measurements with a Gaussian meter.
//!
//! A finite-dimensional observable `A` is coupled impulsively to the position
//! of a Gaussian pointer, `H = -g δ(t - t0) A ⊗ q`. After postselection the
//! pointer shifts and spreads are available in closed form for every coupling
//! strength; the weak (AAV) and strong (ideal measurement) regimes fall out as
//! limits. On top of that the crate provides qubit extremal shifts, the
//! Stern–Gerlach specialisation, signal-to-noise and sensitivity metrics, and
//! an independent wavefunction-integration oracle used to check all of it.
//!
//! Units: `ħ = 1`, observables dimensionless, `g` in momentum units, `Δ` in
//! length units.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod metrics;
pub mod optimize;
pub mod oracle;
pub mod par;
pub mod pps;
pub mod qubit;
pub mod scan;
pub mod stern_gerlach;
mod sum;

pub use error::{Error, Result};
pub use pps::{GaussianPointer, Observable, PpsPair, Readout};

/// Probability floor below which conditional pointer moments are not reported.
pub const PROBABILITY_FLOOR: f64 = 1e-14;

/// Eigenvalues closer than this are treated as one degenerate class.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;
