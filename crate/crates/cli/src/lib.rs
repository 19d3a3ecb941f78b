//! Experiment runner library behind the `pilotcluster` binary: config
//! parsing, seeded sweep execution, CSV/SVG output, validation and
//! stability-check drivers.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod experiment;
pub mod plot;
