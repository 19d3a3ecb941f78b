use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A precondition on an operation's inputs was violated.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Zero-forcing combining needs strictly more antennas than served users.
    #[error("zero-forcing infeasible in cell {cell}: M = {antennas} <= K = {users}")]
    ZfInfeasible {
        cell: usize,
        antennas: usize,
        users: usize,
    },

    /// A closed-form expression left its numerical domain (e.g. a
    /// non-positive interference term under zero-forcing).
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    /// The requested deviation is not a valid move in the game.
    #[error("invalid deviation: {0}")]
    InvalidDeviation(String),

    /// Exhaustive enumeration was requested beyond the configured size limit.
    #[error("limit exceeded: {0}")]
    LimitExceeded(String),

    /// A linear solve failed (rank-deficient estimate matrix).
    #[error("rank-deficient system: {0}")]
    RankDeficient(String),
}

pub type Result<T> = std::result::Result<T, Error>;
