//! Crate-wide error type and exit-code mapping for the command-line runner.

use thiserror::Error;

/// Unified error type for lattice construction, basis enumeration, spectral
/// analysis, and the inequality-verification pipelines.
#[derive(Debug, Error)]
pub enum Error {
    /// Configuration file problems: unreadable, unparseable, or semantically
    /// invalid (bad grids, missing couplings, unknown sites, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Graph construction or query failed (disconnected graph, unknown site,
    /// degenerate size parameters).
    #[error("lattice error: {0}")]
    Lattice(String),

    /// Sector-basis enumeration failed (inconsistent quantum numbers) or an
    /// operator was requested for an invalid target sector.
    #[error("basis error: {0}")]
    Basis(String),

    /// Hamiltonian assembly failed (missing couplings, range violations).
    #[error("model error: {0}")]
    Model(String),

    /// No admissible (quasi)degenerate ground sector with a uniform gap was
    /// found under the configured thresholds.
    #[error("no uniform gap detected: {0}")]
    NoGap(String),

    /// The admissibility margin `gap/2 - |K| - f` stayed below the required
    /// threshold on the whole twist-strength grid.
    #[error("no admissible twist strength at this volume")]
    NoAdmissibleTwist,

    /// A verified inequality came out with a negative margin.
    #[error("inequality margin violation: {0}")]
    MarginViolation(String),

    /// A diagonal gauge factor would overflow double precision.
    #[error("gauge factor overflow: {0}")]
    Overflow(String),

    /// An iterative eigensolver or quadrature loop failed to converge within
    /// its configured budget.
    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    /// Underlying I/O failure (missing files, unwritable output directory).
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Process exit codes used by the command-line runner.
///
/// `0` success (all asserted margins nonnegative), `2` configuration or
/// input errors, `3` no uniform gap detected, `4` inequality margin
/// violation.
impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoGap(_) => 3,
            Error::MarginViolation(_) => 4,
            Error::Config(_)
            | Error::Lattice(_)
            | Error::Basis(_)
            | Error::Model(_)
            | Error::NoAdmissibleTwist
            | Error::Overflow(_)
            | Error::NonConvergence(_)
            | Error::Io(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
