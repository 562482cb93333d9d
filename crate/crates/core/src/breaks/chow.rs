use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::{centred, BreakError, BreakResult, BreakTest};
use crate::calendar::YearMonth;
use crate::ts::MonthlySeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ChowModel {
    /// Segment-specific means.
    #[default]
    Mean,
    /// Segment-specific intercepts and slopes.
    Trend,
}

impl ChowModel {
    fn params(self) -> usize {
        match self {
            ChowModel::Mean => 1,
            ChowModel::Trend => 2,
        }
    }
}

/// Residual sum of squares of `y` on a constant, or a constant and a
/// linear trend.
fn ssr(y: &[f64], model: ChowModel) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let syy: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    match model {
        ChowModel::Mean => syy,
        ChowModel::Trend => {
            let tbar = (n - 1.0) / 2.0;
            let stt: f64 = (0..y.len()).map(|t| (t as f64 - tbar).powi(2)).sum();
            let sty: f64 = y.iter().enumerate().map(|(t, v)| (t as f64 - tbar) * (v - mean)).sum();
            (syy - sty * sty / stt).max(0.0)
        }
    }
}

pub fn chow_test(series: &MonthlySeries, candidate: YearMonth) -> Result<BreakResult, BreakError> {
    chow_test_at(series, candidate, ChowModel::default())
}

/// F test of equal coefficients before and after `candidate`, the first
/// month of the proposed new regime.
pub fn chow_test_at(series: &MonthlySeries, candidate: YearMonth, model: ChowModel) -> Result<BreakResult, BreakError> {
    let offset = candidate.months_since(series.start);
    if offset < 0 || offset >= series.len() as i64 {
        return Err(BreakError::OutsideSample(candidate));
    }
    let split = offset as usize;
    let k = model.params();
    let n = series.len();
    if split < k + 1 || n - split < k + 1 {
        return Err(BreakError::SegmentTooShort { candidate, needed: k + 1 });
    }
    let y = centred(&series.values);
    let pooled = ssr(&y, model);
    let split_ssr = ssr(&y[..split], model) + ssr(&y[split..], model);
    let df2 = (n - 2 * k) as f64;
    let tiny = 1e-24 * (1.0 + pooled);
    let (f, p) = if split_ssr <= tiny {
        if pooled <= tiny {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let f = ((pooled - split_ssr).max(0.0) / k as f64) / (split_ssr / df2);
        let dist = FisherSnedecor::new(k as f64, df2).map_err(|e| BreakError::InvalidArgument(e.to_string()))?;
        (f, dist.sf(f))
    };
    let reject = p < 0.05;
    let breaks = if reject { vec![split] } else { vec![] };
    let note = match model {
        ChowModel::Mean => "mean shift",
        ChowModel::Trend => "intercept and slope shift",
    };
    Ok(BreakResult::new(BreakTest::Chow, series, f, breaks, reject)
        .with_p_value(p)
        .with_note(note))
}
