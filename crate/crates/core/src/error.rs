use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("non-finite coefficient at t = {t}: {what}")]
    NonFiniteCoefficient { t: f64, what: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("hypothesis (H) violated: {0}")]
    Hypothesis(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: achieved error estimate {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("time {t} outside computed window [{lo}, {hi}]")]
    OutsideWindow { t: f64, lo: f64, hi: f64 },

    #[error("window too large for the weighted norm (|t - t0|/r = {ratio}); shrink the window")]
    WindowTooLarge { ratio: f64 },

    #[error("fixed-point iteration stalled after {iterations} iterations at residual {achieved:e} (tolerance {tol:e})")]
    Stalled { iterations: usize, achieved: f64, tol: f64 },

    #[error("matrix Phi({s}, t0) is ill-conditioned (condition number {cond:e})")]
    IllConditioned { s: f64, cond: f64 },

    #[error("limit functional needs horizon {needed} beyond table window end {window_end}; widen the window")]
    WidenWindow { needed: f64, window_end: f64 },

    #[error("limit functional failed the Cauchy test after {doublings} doublings (last increment {increment:e})")]
    NotConvergent { doublings: usize, increment: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors that stem from invalid input or configuration rather than a numerical failure.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::InvalidKernel(_)
                | Error::Hypothesis(_)
                | Error::InvalidParameter(_)
                | Error::Config(_)
                | Error::DimensionMismatch { .. }
        )
    }
}
