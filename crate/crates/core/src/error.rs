use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-positive price at data row {row}")]
    NonPositivePrice { row: usize },

    #[error("unparseable date {value:?} at data row {row}")]
    UnparseableDate { row: usize, value: String },

    #[error("unparseable number {value:?} at data row {row}")]
    UnparseableNumber { row: usize, value: String },

    #[error("duplicate (date, asset) entry at data row {row}")]
    DuplicateRow { row: usize },

    #[error("assets share no common trading days")]
    EmptyIntersection,

    #[error("index {index} outside valid range {lo}..={hi}")]
    IndexOutOfRange { index: usize, lo: usize, hi: usize },

    #[error("insufficient history: need {needed}, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("insufficient data: need at least {needed} points, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("invalid regime: {0}")]
    InvalidRegime(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: expected {expected} parameters, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("volatility is zero")]
    ZeroVolatility,

    #[error("all observations are identical across both samples")]
    DegenerateSamples,

    #[error("empty sample")]
    EmptySample,

    #[error("non-finite input")]
    NonFiniteInput,

    #[error("tape does not belong to the current network parameters")]
    StaleTape,

    #[error("non-positive growth rate {0}")]
    NonPositiveGrowth(f64),

    #[error("replay buffer holds {available} transitions, batch needs {needed}")]
    InsufficientBuffer { needed: usize, available: usize },

    #[error("evaluation budget {budget} is smaller than population {population}")]
    BudgetTooSmall { budget: usize, population: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("series too short: need more than {needed} days, have {available}")]
    SeriesTooShort { needed: usize, available: usize },

    #[error("episode already finished")]
    EpisodeFinished,

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("invalid weight vector: {0}")]
    InvalidWeights(String),

    #[error("data split too small: segment `{segment}` has {available} usable days, need {needed}")]
    DataSplitTooSmall {
        segment: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

impl Error {
    /// Configuration problems, as opposed to problems with the market data.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::UnknownStrategy(_)
                | Error::Json(_)
                | Error::InvalidRegime(_)
                | Error::Checkpoint(_)
        )
    }

    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MissingColumn(_)
                | Error::NonPositivePrice { .. }
                | Error::UnparseableDate { .. }
                | Error::UnparseableNumber { .. }
                | Error::DuplicateRow { .. }
                | Error::EmptyIntersection
                | Error::InsufficientHistory { .. }
                | Error::InsufficientData { .. }
                | Error::SeriesTooShort { .. }
                | Error::DataSplitTooSmall { .. }
                | Error::Csv(_)
        )
    }
}
