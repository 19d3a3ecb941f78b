//! Coalition-based pilot clustering for the uplink of cellular massive MIMO
//! networks.
//!
//! Base stations on a wrap-around square each own a private slice of the
//! pilot budget and may pool pilots by forming coalitions: members schedule
//! more users at the price of pilot contamination from each other. The crate
//! provides
//!
//! - random deployments, torus geometry, and pathloss ([`geometry`]),
//! - Monte Carlo estimation of the interference-coupling moments
//!   ([`propagation`]),
//! - closed-form per-cell spectral-efficiency utilities for maximum-ratio
//!   and zero-forcing combining ([`utility`]),
//! - the partition-form coalitional game: deviations, admissibility, and
//!   individual stability ([`game`]),
//! - distributed coalition formation under per-BS message budgets
//!   ([`formation`]),
//! - baseline pilot-reuse schemes and an exhaustive optimum oracle
//!   ([`baselines`]),
//! - a channel-level Monte Carlo estimator of the ergodic spectral
//!   efficiency that validates the closed forms ([`validator`]).
//!
//! All randomness flows through explicitly seeded generators; every
//! operation is deterministic given its seed.

pub mod baselines;
mod error;
pub mod formation;
pub mod game;
pub mod geometry;
pub mod propagation;
pub mod seeds;
pub mod utility;
pub mod validator;

pub use error::{Error, Result};
pub use game::{Budget, CoalitionStructure, DeviationTarget, GameState};
pub use geometry::{Deployment, Position};
pub use propagation::PropagationStats;
pub use utility::{CombiningScheme, SystemParams};
