//! Automatic SARIMA order selection: differencing orders from KPSS and
//! Canova-Hansen tests, then a stepwise AICc search over ARMA orders.

mod canova_hansen;
pub mod critical;
mod kpss;
mod stepwise;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ts::{difference, MonthlySeries, TsError};

pub use canova_hansen::{
    canova_hansen_statistic, canova_hansen_test, canova_hansen_test_at, SeasonalDecision, SeasonalStabilityResult,
};
pub use critical::Significance;
pub use kpss::{default_lag, kpss_statistic, kpss_test, kpss_test_at, long_run_variance, KpssKind, UnitRootDecision, UnitRootResult};
pub use stepwise::{
    constant_admissible, exhaustive_search, stepwise_search, SearchBounds, SearchOutcome, SearchTrace, StepwiseOptions,
    StopReason, VisitedModel,
};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("{test} needs at least {needed} observations, have {got}")]
    TooShort { test: &'static str, needed: usize, got: usize },
    #[error("unsupported seasonal period {0}")]
    InvalidPeriod(usize),
    #[error("no admissible model")]
    NoAdmissibleModel,
    #[error(transparent)]
    Ts(#[from] TsError),
}

/// Smallest `d ≤ max_d` whose differenced series passes KPSS; `max_d` if
/// none does. Stops early when the differenced series gets too short to test.
pub fn select_d(y: &[f64], max_d: usize, kind: KpssKind) -> usize {
    let mut d = 0;
    while d < max_d {
        let Ok(w) = difference(y, d, 0, 1) else { break };
        match kpss_test(&w, kind) {
            Ok(r) if r.decision == UnitRootDecision::NonStationary => d += 1,
            _ => break,
        }
    }
    d
}

/// Seasonal differencing order: raised while the Canova-Hansen test finds
/// unstable seasonality, up to `max_sd`. Zero for `m = 1` or series too
/// short to test.
pub fn select_seasonal_d(y: &[f64], m: usize, max_sd: usize) -> usize {
    if m < 2 {
        return 0;
    }
    let mut sd = 0;
    while sd < max_sd {
        let Ok(w) = difference(y, 0, sd, m) else { break };
        match canova_hansen_test(&w, m) {
            Ok(r) if r.decision == SeasonalDecision::UnstableSeasonality => sd += 1,
            _ => break,
        }
    }
    sd
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AutoOptions {
    pub bounds: SearchBounds,
    pub kpss: KpssKind,
    /// Skip the tests and use these orders.
    pub fixed_d: Option<usize>,
    pub fixed_sd: Option<usize>,
    #[serde(skip)]
    pub seeds: Vec<crate::ts::SarimaSpec>,
    pub parallel: bool,
}

#[derive(Debug, Clone)]
pub struct AutoOutcome {
    pub d: usize,
    pub sd: usize,
    pub search: SearchOutcome,
}

/// Seasonal differencing chosen first, then ordinary differencing on the
/// seasonally differenced series, then the stepwise search.
pub fn auto_sarima(series: &MonthlySeries, opts: &AutoOptions) -> Result<AutoOutcome, SelectionError> {
    let m = series.period;
    let sd = opts
        .fixed_sd
        .unwrap_or_else(|| select_seasonal_d(&series.values, m, opts.bounds.max_sd));
    let sd = if m > 1 { sd } else { 0 };
    let seasonal = difference(&series.values, 0, sd, m).map_err(SelectionError::Ts)?;
    let d = opts
        .fixed_d
        .unwrap_or_else(|| select_d(&seasonal, opts.bounds.max_d, opts.kpss));
    let step = StepwiseOptions {
        bounds: opts.bounds,
        seeds: opts.seeds.clone(),
        parallel: opts.parallel,
    };
    let search = stepwise_search(series, d, sd, &step)?;
    Ok(AutoOutcome { d, sd, search })
}
