use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("row not stochastic: row {row} sums to {sum}")]
    RowNotStochastic { row: usize, sum: f64 },

    #[error("negative transition probability at ({row}, {col}): {value}")]
    NegativeProbability { row: usize, col: usize, value: f64 },

    #[error("reward outside unit interval: state {state} has reward {value}")]
    RewardOutOfRange { state: usize, value: f64 },

    #[error("feature norm exceeds 1: state {state} has norm {norm}")]
    FeatureNormTooLarge { state: usize, norm: f64 },

    #[error("bias coordinate must equal a fixed c in (0,1): state {state} has {value}")]
    InvalidBias { state: usize, value: f64 },

    #[error("discount must lie in (0,1), got {0}")]
    InvalidDiscount(f64),

    #[error("chain not unichain: {0}")]
    NotUnichain(String),

    #[error("width must be even and positive, got {0}")]
    WidthNotEven(usize),

    #[error("zero vector input")]
    ZeroVector,

    #[error("direction vector is not unit norm (norm {0})")]
    NonUnitDirection(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("radius below realizability bound: R = {radius} <= nu_bar = {nu_bar}")]
    RadiusBelowRealizability { radius: f64, nu_bar: f64 },

    #[error("fixed point did not converge after {iterations} iterations (last value {last})")]
    FixedPointDiverged { iterations: usize, last: f64 },

    #[error("divergence at iteration {t}: non-finite weights")]
    Divergence { t: u64, trace: Option<Box<crate::learner::RunTrace>> },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
