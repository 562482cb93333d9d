//! Seasonal ARIMA models: differencing, exact likelihood fitting,
//! forecasting with prediction intervals, and simulation.

mod kalman;
mod model;
pub mod optim;
pub mod poly;
mod series;
mod uncertainty;

use thiserror::Error;

use crate::calendar::YearMonth;

pub use kalman::{autocovariances, run_filter, FilterRun};
pub use model::{
    aicc, fit, fit_fixed, fit_with, forecast, forecast_with_levels, loglik_at, simulate, simulate_from, z_value,
    Convergence, FittedSarima, Forecast, PredictionInterval, SarimaParams, SarimaSpec, DEFAULT_LEVELS,
};
pub use series::{difference, integration_coefficients, MonthlySeries};
pub use uncertainty::parameter_forecast_covariance;

#[derive(Debug, Error)]
pub enum TsError {
    #[error("series too short: need {needed} observations, have {got}")]
    TooShort { needed: usize, got: usize },
    #[error("series has interior missing values")]
    MissingValues,
    #[error("invalid model: {0}")]
    InvalidSpec(String),
    #[error("window {window} not covered by series {start}..{end}")]
    NotCovered { window: String, start: YearMonth, end: YearMonth },
    #[error("series file: {0}")]
    Parse(String),
    #[error("innovation variance is degenerate")]
    DegenerateVariance,
    #[error("likelihood evaluation failed")]
    LikelihoodFailed,
    #[error("parameters not admissible: {0}")]
    NonStationary(String),
    #[error("forecast horizon must be positive")]
    InvalidHorizon,
}
