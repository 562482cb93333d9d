//! Structural-break tests for monthly event series.
//!
//! Every test reports break dates as the first month of the new regime, so a
//! break at index `i` separates `y[..i]` from `y[i..]` and `0 < i < n`.

mod bai_perron;
mod battery;
mod chow;
mod cusum;
mod pettitt;
mod zivot_andrews;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::YearMonth;
use crate::ts::{MonthlySeries, TsError};

pub use bai_perron::{bai_perron, optimal_segmentation, BaiPerronFit};
pub use battery::{run_battery, seasonally_adjust, with_seasonal_adjustment, write_battery_csv, BatteryConfig, BatteryRow};
pub use chow::{chow_test, chow_test_at, ChowModel};
pub use cusum::{cusum_test, cusum_test_with, CusumKind, OLS_CUSUM_CRITICAL, RECURSIVE_CUSUM_A};
pub use pettitt::{pettitt_statistics, pettitt_test};
pub use zivot_andrews::{
    simulate_zivot_andrews_critical, zivot_andrews, zivot_andrews_critical, zivot_andrews_with, ZaLags, ZaModel, ZaOptions,
    ZIVOT_ANDREWS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BreakError {
    #[error("{test} needs at least {needed} observations, have {got}")]
    TooShort { test: &'static str, needed: usize, got: usize },
    #[error("candidate {candidate} leaves a segment shorter than {needed} observations")]
    SegmentTooShort { candidate: YearMonth, needed: usize },
    #[error("candidate {0} is outside the series")]
    OutsideSample(YearMonth),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{0}")]
    Series(String),
}

impl From<TsError> for BreakError {
    fn from(e: TsError) -> Self {
        BreakError::Series(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BreakTest {
    Cusum,
    Chow,
    BaiPerron,
    Pettitt,
    ZivotAndrews,
}

impl BreakTest {
    pub const ALL: [BreakTest; 5] = [
        BreakTest::Cusum,
        BreakTest::Chow,
        BreakTest::BaiPerron,
        BreakTest::Pettitt,
        BreakTest::ZivotAndrews,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BreakTest::Cusum => "cusum",
            BreakTest::Chow => "chow",
            BreakTest::BaiPerron => "bai-perron",
            BreakTest::Pettitt => "pettitt",
            BreakTest::ZivotAndrews => "zivot-andrews",
        }
    }
}

impl std::fmt::Display for BreakTest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakResult {
    pub test: BreakTest,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub critical_value: Option<f64>,
    /// Indices of the first observation of each new regime, ascending.
    /// Empty unless the test rejects.
    pub break_indices: Vec<usize>,
    pub break_dates: Vec<YearMonth>,
    /// Break detected at the 5% level.
    pub reject: bool,
    pub note: Option<String>,
}

impl BreakResult {
    fn new(test: BreakTest, series: &MonthlySeries, statistic: f64, break_indices: Vec<usize>, reject: bool) -> Self {
        debug_assert!(break_indices.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(break_indices.iter().all(|&i| i > 0 && i < series.len()));
        let break_dates = break_indices.iter().map(|&i| series.month_at(i)).collect();
        BreakResult {
            test,
            statistic,
            p_value: None,
            critical_value: None,
            break_indices,
            break_dates,
            reject,
            note: None,
        }
    }

    fn with_p_value(mut self, p: f64) -> Self {
        self.p_value = Some(p);
        self
    }

    fn with_critical_value(mut self, c: f64) -> Self {
        self.critical_value = Some(c);
        self
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

fn require_len(test: &'static str, series: &MonthlySeries, needed: usize) -> Result<(), BreakError> {
    if series.len() < needed {
        return Err(BreakError::TooShort {
            test,
            needed,
            got: series.len(),
        });
    }
    Ok(())
}

/// Values minus their mean. Tests run on centred data so that adding a
/// constant to the input cannot move a break through rounding.
fn centred(y: &[f64]) -> Vec<f64> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| v - mean).collect()
}

fn is_constant(y: &[f64]) -> bool {
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let c = centred(y);
    c.iter().all(|v| v.abs() <= 1e-12 * scale)
}
