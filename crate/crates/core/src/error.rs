use thiserror::Error;

use crate::divergence::DivergenceEstimate;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("index beyond ensemble: {index} > {max}")]
    IndexBeyondEnsemble { index: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parameter out of bounds: {0}")]
    OutOfBounds(String),

    #[error(
        "gap criterion unreachable: best gap {best_gap:.6} at n={n} (tolerance {tolerance:.6})"
    )]
    GapUnreachable {
        tolerance: f64,
        best_gap: f64,
        n: usize,
        /// Estimate at the largest probed size, for callers that degrade gracefully.
        best: Box<DivergenceEstimate>,
    },

    #[error("sample budget exhausted: requested {requested}, remaining {remaining}")]
    BudgetExhausted { requested: u64, remaining: u64 },

    #[error("training diverged (non-finite loss) at step {step}")]
    TrainingDiverged { step: usize },

    #[error("kernel matrix factorization failed at max jitter {jitter:.1e}")]
    Factorization { jitter: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("no common grid")]
    NoCommonGrid,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
