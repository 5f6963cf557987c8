use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("invalid pair `{pair_id}`: {reason}")]
    InvalidPair { pair_id: String, reason: String },

    #[error("too few observations: need at least {need}, got {have}")]
    Size { have: usize, need: usize },

    #[error("degenerate sample: every pair difference is zero")]
    DegenerateSample,

    #[error("exact enumeration supports at most {max} nonzero pairs, got {got}; use the Monte Carlo method")]
    EnumerationBudget { got: usize, max: usize },

    #[error("score function is not square integrable: {0}")]
    NotSquareIntegrable(String),

    #[error("no crossing: {0}")]
    NoCrossing(String),

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("unknown simulation job `{0}`")]
    UnknownJob(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by the input data rather than by the
    /// requested parameters.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidPair { .. }
                | Error::Size { .. }
                | Error::DegenerateSample
                | Error::EnumerationBudget { .. }
                | Error::Parse { .. }
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
