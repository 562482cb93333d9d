use serde::{Deserialize, Serialize};

use super::{centred, is_constant, require_len, BreakError, BreakResult, BreakTest};
use crate::ts::MonthlySeries;

/// 5% critical value of `sup |B(r)|` for a Brownian bridge `B`.
pub const OLS_CUSUM_CRITICAL: f64 = 1.358;
/// 5% boundary constant for the recursive-residual CUSUM.
pub const RECURSIVE_CUSUM_A: f64 = 0.948;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CusumKind {
    /// Partial sums of OLS residuals from the constant-mean model.
    #[default]
    OlsBased,
    /// Partial sums of recursive residuals against linear boundaries.
    Recursive,
}

pub fn cusum_test(series: &MonthlySeries) -> Result<BreakResult, BreakError> {
    cusum_test_with(series, CusumKind::default())
}

/// The OLS variant dates the break at the peak of the partial-sum process;
/// the recursive variant at its first boundary crossing.
pub fn cusum_test_with(series: &MonthlySeries, kind: CusumKind) -> Result<BreakResult, BreakError> {
    require_len("CUSUM", series, 10)?;
    let y = &series.values;
    if is_constant(y) {
        return Ok(BreakResult::new(BreakTest::Cusum, series, 0.0, vec![], false).with_note("constant series"));
    }
    match kind {
        CusumKind::OlsBased => Ok(ols_cusum(series)),
        CusumKind::Recursive => Ok(recursive_cusum(series)),
    }
}

fn ols_cusum(series: &MonthlySeries) -> BreakResult {
    let e = centred(&series.values);
    let n = e.len();
    let sigma = (e.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64).sqrt();
    let scale = sigma * (n as f64).sqrt();
    let mut partial = 0.0;
    let mut peak = (0.0, 0);
    for (k, v) in e.iter().enumerate().take(n - 1) {
        partial += v;
        let w = (partial / scale).abs();
        if w > peak.0 {
            peak = (w, k + 1);
        }
    }
    let reject = peak.0 > OLS_CUSUM_CRITICAL;
    let breaks = if reject { vec![peak.1] } else { vec![] };
    BreakResult::new(BreakTest::Cusum, series, peak.0, breaks, reject)
        .with_critical_value(OLS_CUSUM_CRITICAL)
        .with_note("OLS-based")
}

fn recursive_cusum(series: &MonthlySeries) -> BreakResult {
    let y = centred(&series.values);
    let n = y.len();
    // w_t = (y_t - mean(y_0..t)) √(t / (t+1)), t = 1..n-1.
    let mut w = Vec::with_capacity(n - 1);
    let mut sum = y[0];
    for (t, &v) in y.iter().enumerate().skip(1) {
        let tf = t as f64;
        w.push((v - sum / tf) * (tf / (tf + 1.0)).sqrt());
        sum += v;
    }
    let m = w.len() as f64;
    let wbar = w.iter().sum::<f64>() / m;
    let sigma = (w.iter().map(|v| (v - wbar).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    let mut partial = 0.0;
    let mut peak: f64 = 0.0;
    let mut crossing = None;
    for (r, v) in w.iter().enumerate() {
        partial += v;
        let stat = (partial / (sigma * m.sqrt())).abs();
        let bound = RECURSIVE_CUSUM_A * (1.0 + 2.0 * (r + 1) as f64 / m);
        peak = peak.max(stat / bound);
        // w[r] belongs to observation r + 1.
        if crossing.is_none() && stat > bound {
            crossing = Some(r + 1);
        }
    }
    let reject = crossing.is_some();
    BreakResult::new(BreakTest::Cusum, series, peak, crossing.into_iter().collect(), reject)
        .with_critical_value(1.0)
        .with_note("recursive residuals; statistic is the peak ratio to the boundary")
}
