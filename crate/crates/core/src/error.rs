use thiserror::Error;

/// Errors surfaced by model construction, optimization and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("terminal joint state {state} only admits the end action")]
    NonEndActionAtTerminal { state: usize },

    #[error("game is already augmented with an end state")]
    AlreadyAugmented,

    #[error("operation requires a game augmented with an end state")]
    NotAugmented,

    #[error("policy never absorbs from joint states {states:?}")]
    ImproperPolicy { states: Vec<usize> },

    #[error("solver finished with status {status}: {detail}")]
    Solver { status: String, detail: String },

    #[error("horizon {horizon} leaves unabsorbed probability mass {mass:e}")]
    HorizonTooShort { horizon: usize, mass: f64 },

    #[error("path enumeration exceeded the support cap of {0} nodes")]
    SupportCap(usize),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn solver(status: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Solver {
            status: status.into(),
            detail: detail.into(),
        }
    }
}
