//! Univariate ARIMA / SARIMA built from first principles.
//!
//! Estimation minimises the conditional sum of squares (CSS) with a BFGS
//! quasi-Newton optimiser on numerical gradients. Parameter vectors outside
//! the stationary/invertible region score `+∞`, so every returned fit has all
//! AR roots and all MA roots strictly outside the unit circle. The AIC used
//! throughout is `n·ln(σ̂²) + 2k`, `σ̂² = CSS / n`, `k = #coefficients +
//! constant + 1`.

mod difference;
mod estimate;
mod forecast;
mod kpss;
mod optimize;
mod order;
mod polynomial;
mod record;
mod stepwise;

pub use difference::{difference, differencing_polynomial};
pub use estimate::{estimate, estimate_with, update, ArimaFit, EstimateOptions, Estimation};
pub use forecast::forecast;
pub use kpss::{kpss_bandwidth, kpss_stationarity, KpssResult, KPSS_CRITICAL_5PCT};
pub use optimize::{minimize_bfgs, BfgsOptions, BfgsOutcome};
pub use order::ArimaOrder;
pub use polynomial::{is_stationary, multiply_lag_polynomials, ROOT_MARGIN};
pub use stepwise::{select_differencing, stepwise_search, stepwise_select, SearchEntry, StepwiseConfig, StepwiseResult};

#[derive(Debug, thiserror::Error)]
pub enum ArimaError {
    #[error("series of length {len} too short: need at least {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("invalid order: {0}")]
    InvalidOrder(String),
    #[error("optimiser did not converge after {iterations} iterations (best objective {objective})")]
    NotConverged {
        iterations: usize,
        objective: f64,
        /// Best parameters seen, packaged as a fit.
        best: Box<ArimaFit>,
    },
    #[error("no admissible starting point: objective is not finite")]
    InfeasibleStart,
    #[error("every candidate order failed to estimate ({attempted} attempted)")]
    AllCandidatesFailed { attempted: usize },
    #[error("forecast horizon must be positive")]
    InvalidHorizon,
    #[error("series has {len} observations but the fit was estimated on {n_obs}")]
    SeriesShorterThanFit { len: usize, n_obs: usize },
    #[error("malformed fit record: {0}")]
    Record(String),
}

pub type Result<T, E = ArimaError> = std::result::Result<T, E>;
