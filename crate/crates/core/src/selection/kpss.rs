use serde::{Deserialize, Serialize};

use super::critical::{kpss_critical, Significance};
use super::SelectionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum KpssKind {
    /// Stationary around a constant.
    #[default]
    Level,
    /// Stationary around a linear trend.
    Trend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnitRootDecision {
    Stationary,
    NonStationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRootResult {
    pub statistic: f64,
    pub lag: usize,
    pub level: f64,
    pub critical_value: f64,
    pub decision: UnitRootDecision,
}

/// Bartlett truncation lag `⌊4 (n/100)^{1/4}⌋`.
pub fn default_lag(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

fn residuals(y: &[f64], kind: KpssKind) -> Vec<f64> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    match kind {
        KpssKind::Level => y.iter().map(|v| v - mean).collect(),
        KpssKind::Trend => {
            let tbar = (n - 1.0) / 2.0;
            let sxx: f64 = (0..y.len()).map(|t| (t as f64 - tbar).powi(2)).sum();
            let sxy: f64 = y.iter().enumerate().map(|(t, v)| (t as f64 - tbar) * (v - mean)).sum();
            let slope = sxy / sxx;
            y.iter()
                .enumerate()
                .map(|(t, v)| v - mean - slope * (t as f64 - tbar))
                .collect()
        }
    }
}

/// Newey-West long-run variance with Bartlett weights.
pub fn long_run_variance(e: &[f64], lag: usize) -> f64 {
    let n = e.len() as f64;
    let mut s = e.iter().map(|v| v * v).sum::<f64>() / n;
    for l in 1..=lag.min(e.len().saturating_sub(1)) {
        let w = 1.0 - l as f64 / (lag as f64 + 1.0);
        let g: f64 = e.iter().zip(&e[l..]).map(|(a, b)| a * b).sum::<f64>() / n;
        s += 2.0 * w * g;
    }
    s
}

/// `Σ S_t² / (n² s²)` with `S_t` the partial sums of the detrended series
/// and `s²` the long-run variance at the given lag. Zero for a series with
/// no variation.
pub fn kpss_statistic(y: &[f64], kind: KpssKind, lag: usize) -> f64 {
    let e = residuals(y, kind);
    let n = e.len() as f64;
    let lrv = long_run_variance(&e, lag);
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    if !(lrv > 1e-20 * scale * scale) {
        return 0.0;
    }
    let mut partial = 0.0;
    let mut ss = 0.0;
    for v in &e {
        partial += v;
        ss += partial * partial;
    }
    ss / (n * n * lrv)
}

pub fn kpss_test(y: &[f64], kind: KpssKind) -> Result<UnitRootResult, SelectionError> {
    kpss_test_at(y, kind, Significance::Five)
}

pub fn kpss_test_at(y: &[f64], kind: KpssKind, level: Significance) -> Result<UnitRootResult, SelectionError> {
    if y.len() < 12 {
        return Err(SelectionError::TooShort {
            test: "KPSS",
            needed: 12,
            got: y.len(),
        });
    }
    let lag = default_lag(y.len());
    let statistic = kpss_statistic(y, kind, lag);
    let critical_value = kpss_critical(kind, level);
    Ok(UnitRootResult {
        statistic,
        lag,
        level: level.alpha(),
        critical_value,
        decision: if statistic > critical_value {
            UnitRootDecision::NonStationary
        } else {
            UnitRootDecision::Stationary
        },
    })
}
