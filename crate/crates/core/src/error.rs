use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by treeval.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("row {row}, column '{column}': missing value")]
    MissingValue { row: usize, column: String },

    #[error("row {row}, column '{column}': non-numeric value '{value}'")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("response column '{0}' not found")]
    MissingResponse(String),

    #[error("need at least 2 observations, found {0}")]
    TooFewObservations(usize),

    #[error("dataset has no covariate columns")]
    NoCovariates,

    #[error("feature {feature} out of range (p = {p})")]
    FeatureOutOfRange { feature: usize, p: usize },

    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("unknown region id {0}")]
    UnknownRegion(usize),

    #[error("region {0} is terminal")]
    TerminalRegion(usize),

    #[error("regions {0} and {1} are not siblings")]
    NotSiblings(usize, usize),

    #[error("ordering is not bottom-up: {0}")]
    NotBottomUp(String),

    #[error("invalid contrast: {0}")]
    InvalidContrast(String),

    #[error("branch is invalid: {0}")]
    InvalidBranch(String),

    #[error("contrast does not shift y along the branch as required: {0}")]
    ShiftStructure(String),

    #[error("cannot rebuild the pruning tree: {0}")]
    PruningTree(String),

    #[error("branch of length {0} exceeds the full-enumeration limit of 8")]
    TooManyPermutations(usize),

    #[error("truncation set has zero probability mass")]
    DegenerateTruncation,

    #[error("statistic {0} lies outside the truncation set")]
    StatisticOutsideSupport(f64),

    #[error("response is constant; cannot estimate sigma")]
    ConstantResponse,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tree document: {0}")]
    TreeFormat(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error stems from invalid input or arguments rather than a
    /// failure during computation.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::ShiftStructure(_)
                | Error::PruningTree(_)
                | Error::DegenerateTruncation
                | Error::StatisticOutsideSupport(_)
                | Error::NotBottomUp(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
