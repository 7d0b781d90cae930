use std::path::PathBuf;

use thiserror::Error;

use crate::network::NetworkError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants split into input problems (bad files, bad parameters) and
/// runtime statistical failures (a chain that did not mix); the CLI maps
/// the two groups onto different exit codes via [`Error::is_input_error`].
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Network(#[from] NetworkError),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid chain configuration: {0}")]
    InvalidChain(String),

    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),

    #[error("probability {0} is outside (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("tau must be positive, got {0}")]
    NonPositiveTau(f64),

    #[error("dataset does not match the network: {0}")]
    DatasetShape(String),

    #[error("contrast of treatment {0} with itself")]
    SelfContrast(usize),

    #[error(
        "acceptance rate {rate:.3} for parameter {parameter} is outside [{min}, {max}]"
    )]
    PoorMixing {
        parameter: String,
        rate: f64,
        min: f64,
        max: f64,
    },

    #[error("replication {rep} failed: {source}")]
    Replication {
        rep: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("SUCRA computed two ways disagrees by {0:e}")]
    SucraMismatch(f64),

    #[error("need at least {needed} replications, got {got}")]
    TooFewReplications { needed: usize, got: usize },

    #[error("planning budget must be at least 1")]
    EmptyBudget,

    #[error(
        "{count} candidate allocations exceed the limit of {limit}; use single-comparison mode"
    )]
    TooManyCandidates { count: u128, limit: u128 },

    #[error("suite is empty")]
    EmptySuite,

    #[error("duplicate experiment name `{0}` in suite")]
    DuplicateName(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// True for errors caused by the caller's input rather than by a
    /// statistical or runtime failure.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::PoorMixing { .. } | Error::SucraMismatch(_) => false,
            Error::Replication { source, .. } => source.is_input_error(),
            _ => true,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
