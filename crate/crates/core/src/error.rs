use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty vector")]
    EmptyInput,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("MPLE does not exist")]
    MpleDoesNotExist,

    #[error("too large for brute force")]
    TooLargeForBruteForce,

    #[error("breakpoints unsolvable for parameters")]
    BreakpointsUnsolvable,

    #[error("design matrix rank deficient")]
    RankDeficient,

    #[error("covariance numerically singular")]
    SingularCovariance,

    #[error("zero variance")]
    ZeroVariance,

    #[error("tolerance too tight: {kept} points kept, need at least {needed}")]
    ToleranceTooTight { kept: usize, needed: usize },

    #[error("acceptance stall: {found} of {wanted} unique particles after {iterations} iterations")]
    AcceptanceStall {
        found: usize,
        wanted: usize,
        iterations: usize,
        partial: Vec<Vec<f64>>,
    },

    #[error("non-finite estimates at particles {0:?}")]
    NonFiniteEstimates(Vec<usize>),

    #[error("emulator checksum mismatch: stored {stored}, recomputed {recomputed}")]
    ChecksumMismatch { stored: f64, recomputed: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Validation problems (bad input) versus numerical failures.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::MpleDoesNotExist
                | Error::BreakpointsUnsolvable
                | Error::RankDeficient
                | Error::SingularCovariance
                | Error::ZeroVariance
                | Error::ToleranceTooTight { .. }
                | Error::AcceptanceStall { .. }
                | Error::NonFiniteEstimates(_)
                | Error::ChecksumMismatch { .. }
        )
    }
}
