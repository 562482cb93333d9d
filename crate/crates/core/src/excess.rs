//! Counterfactual forecasts and excess firm events.
//!
//! A model is selected and fitted on a training window, forecast across an
//! evaluation window, and the realised values compared with the forecast.
//! Interval bounds on cumulative excess use the model's covariance of
//! multi-step forecast errors.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::{MonthWindow, YearMonth};
use crate::selection::{auto_sarima, AutoOptions, SelectionError};
use crate::ts::{fit, forecast_with_levels, parameter_forecast_covariance, z_value, Forecast, MonthlySeries, SarimaSpec, TsError};

#[derive(Debug, Error)]
pub enum ExcessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("series has no value for {0}")]
    MissingMonth(YearMonth),
    #[error("misaligned series: {0}")]
    Misaligned(String),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Ts(#[from] TsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SignConvention {
    /// Positive when more events happened than projected.
    #[default]
    ActualMinusForecast,
    ForecastMinusActual,
}

impl SignConvention {
    pub fn label(self) -> &'static str {
        match self {
            SignConvention::ActualMinusForecast => "actual - forecast",
            SignConvention::ForecastMinusActual => "forecast - actual",
        }
    }

    pub fn apply(self, actual: f64, forecast: f64) -> f64 {
        match self {
            SignConvention::ActualMinusForecast => actual - forecast,
            SignConvention::ForecastMinusActual => forecast - actual,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            SignConvention::ActualMinusForecast => SignConvention::ForecastMinusActual,
            SignConvention::ForecastMinusActual => SignConvention::ActualMinusForecast,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterfactualConfig {
    pub train: MonthWindow,
    pub eval: MonthWindow,
    pub levels: Vec<f64>,
    pub convention: SignConvention,
    pub selection: AutoOptions,
    /// Fit this specification instead of searching.
    pub spec: Option<SarimaSpec>,
    /// Widen bounds by the forecast variance due to coefficient estimation.
    pub parameter_uncertainty: bool,
}

impl Default for CounterfactualConfig {
    fn default() -> Self {
        let ym = |y, m| YearMonth::new(y, m).expect("valid month");
        CounterfactualConfig {
            train: MonthWindow::new(ym(2011, 1), ym(2020, 1)).expect("ordered"),
            eval: MonthWindow::new(ym(2020, 3), ym(2021, 6)).expect("ordered"),
            levels: vec![80.0, 95.0],
            convention: SignConvention::default(),
            selection: AutoOptions::default(),
            spec: None,
            parameter_uncertainty: true,
        }
    }
}

impl CounterfactualConfig {
    pub fn validate(&self) -> Result<(), ExcessError> {
        if self.train.end >= self.eval.start {
            return Err(ExcessError::InvalidConfig(format!(
                "training window {} must end before evaluation window {}",
                self.train, self.eval
            )));
        }
        if let Some(l) = self.levels.iter().find(|l| !(**l > 0.0 && **l < 100.0)) {
            return Err(ExcessError::InvalidConfig(format!("interval level {l}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessMonth {
    pub month: YearMonth,
    /// Forecast horizon, 1 being the first month after the training window.
    pub horizon: usize,
    pub actual: f64,
    pub forecast: f64,
    pub excess: f64,
    pub bounds: Vec<Bounds>,
    pub cumulative: f64,
    pub cumulative_bounds: Vec<Bounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAudit {
    pub spec: SarimaSpec,
    pub aicc: f64,
    pub loglik: f64,
    pub sigma2: f64,
    pub models_evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessReport {
    pub stratum: String,
    pub convention: SignConvention,
    pub train: MonthWindow,
    pub eval: MonthWindow,
    pub levels: Vec<f64>,
    pub months: Vec<ExcessMonth>,
    pub model: ModelAudit,
    pub forecast: Forecast,
    /// Covariance of the point forecasts from coefficient estimation, by
    /// horizon. `None` when disabled or not computable.
    pub parameter_covariance: Option<Vec<Vec<f64>>>,
}

/// Bounds `value ± z sd` for each level, under the report's convention.
fn bounds(value: f64, sd: f64, levels: &[f64]) -> Vec<Bounds> {
    levels
        .iter()
        .map(|&level| {
            let half = z_value(level) * sd;
            Bounds {
                level,
                lower: value - half,
                upper: value + half,
            }
        })
        .collect()
}

fn block_variance(fc: &Forecast, parameter_covariance: Option<&[Vec<f64>]>, from: usize, to: usize) -> f64 {
    let extra: f64 = parameter_covariance.map_or(0.0, |c| {
        (from..=to)
            .flat_map(|h| (from..=to).map(move |k| c[h - 1][k - 1]))
            .sum()
    });
    fc.sum_variance(from, to) + extra
}

pub fn run_counterfactual(stratum: &str, series: &MonthlySeries, config: &CounterfactualConfig) -> Result<ExcessReport, ExcessError> {
    config.validate()?;
    let train = series.window(config.train)?;
    let (fitted, evaluated) = match &config.spec {
        Some(spec) => (fit(&train, spec)?, 1),
        None => {
            let out = auto_sarima(&train, &config.selection)?;
            let n = out.search.trace.visited.len();
            (out.search.best, n)
        }
    };
    let offset = config.eval.start.months_since(config.train.end) as usize;
    let horizon = offset - 1 + config.eval.len();
    let fc = forecast_with_levels(&fitted, horizon, &config.levels)?;
    let parameter_covariance = if config.parameter_uncertainty {
        let c = parameter_forecast_covariance(&train, &fitted, horizon);
        if c.is_none() {
            log::warn!("{stratum}: coefficient covariance unavailable, bounds cover forecast error only");
        }
        c
    } else {
        None
    };
    let block = |from, to| block_variance(&fc, parameter_covariance.as_deref(), from, to);
    let mut months = Vec::with_capacity(config.eval.len());
    let mut cumulative = 0.0;
    for (i, month) in config.eval.months().enumerate() {
        let h = offset + i;
        let actual = series.get(month).ok_or(ExcessError::MissingMonth(month))?;
        let forecast = fc.mean[h - 1];
        let excess = config.convention.apply(actual, forecast);
        cumulative += excess;
        months.push(ExcessMonth {
            month,
            horizon: h,
            actual,
            forecast,
            excess,
            bounds: bounds(excess, block(h, h).sqrt(), &config.levels),
            cumulative,
            cumulative_bounds: bounds(cumulative, block(offset, h).sqrt(), &config.levels),
        });
    }
    Ok(ExcessReport {
        stratum: stratum.to_string(),
        convention: config.convention,
        train: config.train,
        eval: config.eval,
        levels: config.levels.clone(),
        months,
        model: ModelAudit {
            spec: fitted.spec,
            aicc: fitted.aicc,
            loglik: fitted.loglik,
            sigma2: fitted.params.sigma2,
            models_evaluated: evaluated,
        },
        forecast: fc,
        parameter_covariance,
    })
}

/// One counterfactual per stratum, in input order.
pub fn run_strata(strata: &[(String, MonthlySeries)], config: &CounterfactualConfig) -> Vec<(String, Result<ExcessReport, ExcessError>)> {
    strata
        .par_iter()
        .map(|(name, s)| (name.clone(), run_counterfactual(name, s, config)))
        .collect()
}

/// Element-wise signed difference of two month-aligned sequences.
pub fn excess_series(
    actual: &[(YearMonth, f64)],
    forecast: &[(YearMonth, f64)],
    convention: SignConvention,
) -> Result<Vec<(YearMonth, f64)>, ExcessError> {
    if actual.len() != forecast.len() {
        return Err(ExcessError::Misaligned(format!("{} actual vs {} forecast values", actual.len(), forecast.len())));
    }
    actual
        .iter()
        .zip(forecast)
        .map(|(&(ma, a), &(mf, f))| {
            if ma != mf {
                return Err(ExcessError::Misaligned(format!("actual {ma} against forecast {mf}")));
            }
            Ok((ma, convention.apply(a, f)))
        })
        .collect()
}

impl ExcessReport {
    /// Variance of the summed excess over horizons `from..=to`.
    pub fn block_variance(&self, from: usize, to: usize) -> f64 {
        block_variance(&self.forecast, self.parameter_covariance.as_deref(), from, to)
    }

    pub fn total(&self) -> f64 {
        self.months.last().map_or(0.0, |m| m.cumulative)
    }

    /// The same report under the opposite sign convention.
    pub fn flipped(&self) -> Self {
        let flip = |b: &Bounds| Bounds {
            level: b.level,
            lower: -b.upper,
            upper: -b.lower,
        };
        let mut out = self.clone();
        out.convention = self.convention.flipped();
        for m in &mut out.months {
            m.excess = -m.excess;
            m.cumulative = -m.cumulative;
            m.bounds = m.bounds.iter().map(flip).collect();
            m.cumulative_bounds = m.cumulative_bounds.iter().map(flip).collect();
        }
        out
    }

    /// Plot data: one row per month with point values and bounds. The first
    /// lines are `#` comments recording the sign convention and model.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<(), ExcessError> {
        writeln!(writer, "# stratum: {}", self.stratum)?;
        writeln!(writer, "# excess = {}", self.convention.label())?;
        writeln!(
            writer,
            "# bounds: forecast-error quantiles; cumulative bounds use the summed error covariance across horizons"
        )
        ?;
        writeln!(writer, "# train {} eval {}", self.train, self.eval)?;
        writeln!(writer, "# model {} aicc {:.4}", self.model.spec, self.model.aicc)?;
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["month".to_string(), "actual".into(), "forecast".into(), "excess".into()];
        for l in &self.levels {
            header.push(format!("lower{l}"));
            header.push(format!("upper{l}"));
        }
        header.push("cumulative".into());
        for l in &self.levels {
            header.push(format!("cumulative_lower{l}"));
            header.push(format!("cumulative_upper{l}"));
        }
        w.write_record(&header)?;
        for m in &self.months {
            let mut row = vec![m.month.to_string(), fmt(m.actual), fmt(m.forecast), fmt(m.excess)];
            for b in &m.bounds {
                row.push(fmt(b.lower));
                row.push(fmt(b.upper));
            }
            row.push(fmt(m.cumulative));
            for b in &m.cumulative_bounds {
                row.push(fmt(b.lower));
                row.push(fmt(b.upper));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarterRow {
    pub year: i32,
    pub quarter: u32,
    pub months: usize,
    /// Fewer than three months of the quarter fall in the evaluation window.
    pub partial: bool,
    pub actual: f64,
    pub forecast: f64,
    pub excess: f64,
    pub bounds: Vec<Bounds>,
}

/// Calendar-quarter sums, with bounds from the variance of the summed
/// forecast errors within each quarter.
pub fn quarterly_rollup(report: &ExcessReport) -> Vec<QuarterRow> {
    let mut rows: Vec<(QuarterRow, usize, usize)> = Vec::new();
    for m in &report.months {
        let key = (m.month.year(), m.month.quarter());
        match rows.last_mut() {
            Some((row, _, last)) if (row.year, row.quarter) == key => {
                row.months += 1;
                row.actual += m.actual;
                row.forecast += m.forecast;
                row.excess += m.excess;
                *last = m.horizon;
            }
            _ => rows.push((
                QuarterRow {
                    year: key.0,
                    quarter: key.1,
                    months: 1,
                    partial: false,
                    actual: m.actual,
                    forecast: m.forecast,
                    excess: m.excess,
                    bounds: vec![],
                },
                m.horizon,
                m.horizon,
            )),
        }
    }
    rows.into_iter()
        .map(|(mut row, first, last)| {
            row.partial = row.months < 3;
            row.bounds = bounds(row.excess, report.block_variance(first, last).sqrt(), &report.levels);
            row
        })
        .collect()
}
