//! Channel-level Monte Carlo validation of the closed-form utilities.
//!
//! The closed forms are lower bounds derived through explicit MMSE
//! estimation and two Jensen steps; this module re-derives per-cell
//! spectral efficiency from raw channel, pilot, and noise draws — building
//! actual received pilot signals, MMSE estimates, and MRC/ZFC combiners —
//! and compares. It shares no formula with the closed-form path beyond the
//! channel model itself.

pub mod linalg;
mod mc;
mod realization;

pub use mc::{
    monte_carlo_se, row_passes, validate, MonteCarloSe, ValidationReport, ValidationRow,
    ValidationSettings,
};
pub use realization::{combiners, energy, inner, sample_pilot_assignment, Realization};
