use thiserror::Error;

/// Errors shared across the crate.
///
/// The CLI maps these onto exit codes: configuration and parse problems are
/// validation failures (exit 1), everything else that aborts a computation
/// is a computation failure (exit 2).
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside an operation's documented domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is inconsistent or fails validation.
    #[error("configuration error: {0}")]
    Config(String),

    /// A utility expression failed to parse. `offset` is the byte offset of
    /// the offending token in the input string.
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// A parsed utility violated the required monotonicity over the probe grid.
    #[error("monotonicity violation: {0}")]
    Monotonicity(String),

    /// A utility evaluated to a non-finite value everywhere it was probed.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// The requested acceptance probability is not attainable on the search grid.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A conditional quantity was requested under a zero-probability event.
    #[error("degenerate conditional: {0}")]
    DegeneratePa(String),

    /// A statistical procedure did not see enough samples to report.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// An internal cross-check failed; indicates a bug, not bad input.
    #[error("internal check failed: {0}")]
    Internal(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that indicate bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Config(_)
                | Error::Parse { .. }
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}
