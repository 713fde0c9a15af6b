use thiserror::Error;

/// Errors raised by the simulation and certification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension vector: {0}")]
    InvalidDims(String),

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("state is not normalized (squared norm {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("operator is not a valid density operator: {0}")]
    InvalidDensity(String),

    #[error("party index {party} out of range for {parties} parties")]
    InvalidParty { party: usize, parties: usize },

    #[error("invalid bipartition: {0}")]
    InvalidCut(String),

    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("{name} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("post-selection removed every amplitude")]
    PostSelectionEmpty,

    #[error("missing density-matrix element {0}")]
    MissingElement(String),

    #[error("diagonal elements sum to {sum}, more than 2% away from 1")]
    Normalization { sum: f64 },

    #[error("invalid measurement setting: {0}")]
    InvalidSetting(String),

    #[error("missing measurement setting(s): {}", .0.join(", "))]
    MissingSettings(Vec<String>),

    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),

    #[error("outcome digit {digit} is not valid for a party of dimension {dim}")]
    InvalidDigit { digit: usize, dim: usize },

    #[error("no samples available: {0}")]
    EmptySamples(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
