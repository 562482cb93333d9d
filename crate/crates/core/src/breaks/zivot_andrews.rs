//! Unit-root test allowing one endogenous break.
//!
//! The shipped critical values come from `examples/za_critical_values.rs`:
//! Gaussian random walks of length 200, no augmentation lags, 15% trimming,
//! 50,000 replications per model, seed 20240102.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{require_len, BreakError, BreakResult, BreakTest};
use crate::selection::critical::{chunked, quantiles};
use crate::selection::Significance;
use crate::ts::MonthlySeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ZaModel {
    /// Break in the intercept.
    Intercept,
    /// Break in the trend slope.
    Trend,
    /// Break in both.
    #[default]
    Both,
}

impl ZaModel {
    pub const ALL: [ZaModel; 3] = [ZaModel::Intercept, ZaModel::Trend, ZaModel::Both];

    fn index(self) -> usize {
        match self {
            ZaModel::Intercept => 0,
            ZaModel::Trend => 1,
            ZaModel::Both => 2,
        }
    }
}

/// Lower-tail critical values at 10%, 5%, 2.5%, 1%, rows in `ZaModel::ALL`
/// order.
pub const ZIVOT_ANDREWS: [[f64; 4]; 3] = [
    [-4.5225, -4.7859, -5.0199, -5.3039],
    [-4.1589, -4.4411, -4.6856, -4.9839],
    [-4.8262, -5.0916, -5.3252, -5.6024],
];
pub fn zivot_andrews_critical(model: ZaModel, level: Significance) -> f64 {
    let col = Significance::ALL.iter().position(|s| *s == level).expect("tabulated level");
    ZIVOT_ANDREWS[model.index()][col]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZaLags {
    Fixed(usize),
    /// Drop lags from `⌊4 (n/100)^{1/4}⌋` until the last is significant at
    /// 10%, using the regression without break terms.
    GeneralToSpecific,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZaOptions {
    pub model: ZaModel,
    pub lags: ZaLags,
    pub trim: f64,
}

impl Default for ZaOptions {
    fn default() -> Self {
        ZaOptions {
            model: ZaModel::Both,
            lags: ZaLags::GeneralToSpecific,
            trim: 0.15,
        }
    }
}

/// Augmented Dickey-Fuller design with optional break regressors.
struct Design {
    target: Vec<f64>,
    /// Rows are observation indices `first..n`.
    first: usize,
    base: Vec<Vec<f64>>,
    /// Position of `y_{t-1}` among the base columns.
    level_col: usize,
}

impl Design {
    fn new(y: &[f64], lags: usize) -> Self {
        let n = y.len();
        let first = lags + 1;
        let scale = n as f64;
        let dy = |t: usize| y[t] - y[t - 1];
        let target = (first..n).map(dy).collect();
        let mut base = vec![vec![1.0; n - first], (first..n).map(|t| t as f64 / scale).collect(), (first..n).map(|t| y[t - 1]).collect()];
        for j in 1..=lags {
            base.push((first..n).map(|t| dy(t - j)).collect());
        }
        Design {
            target,
            first,
            base,
            level_col: 2,
        }
    }

    fn rows(&self) -> usize {
        self.target.len()
    }

    fn break_columns(&self, model: ZaModel, b: usize) -> Vec<Vec<f64>> {
        let scale = (self.rows() + self.first) as f64;
        let t0 = self.first;
        let du = || (0..self.rows()).map(|r| if r + t0 >= b { 1.0 } else { 0.0 }).collect();
        let dt = || {
            (0..self.rows())
                .map(|r| if r + t0 >= b { (r + t0 + 1 - b) as f64 / scale } else { 0.0 })
                .collect()
        };
        match model {
            ZaModel::Intercept => vec![du()],
            ZaModel::Trend => vec![dt()],
            ZaModel::Both => vec![du(), dt()],
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// OLS t statistics for the requested columns. `None` if the design is
/// singular or has no residual degrees of freedom.
fn t_stats(cols: &[&[f64]], target: &[f64], gram_base: Option<&DMatrix<f64>>, which: &[usize]) -> Option<Vec<f64>> {
    let p = cols.len();
    let rows = target.len();
    if rows <= p {
        return None;
    }
    let mut g = DMatrix::<f64>::zeros(p, p);
    let pre = gram_base.map_or(0, |m| m.nrows());
    for i in 0..p {
        for j in 0..=i {
            let v = if i < pre { gram_base.unwrap()[(i, j)] } else { dot(cols[i], cols[j]) };
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let xty = DVector::from_iterator(p, cols.iter().map(|c| dot(c, target)));
    let chol = g.cholesky()?;
    let beta = chol.solve(&xty);
    let mut ssr = 0.0;
    for r in 0..rows {
        let fitted: f64 = (0..p).map(|j| cols[j][r] * beta[j]).sum();
        ssr += (target[r] - fitted).powi(2);
    }
    let s2 = ssr / (rows - p) as f64;
    let out = which
        .iter()
        .map(|&k| {
            let mut e = DVector::zeros(p);
            e[k] = 1.0;
            let var = chol.solve(&e)[k] * s2;
            beta[k] / var.max(f64::MIN_POSITIVE).sqrt()
        })
        .collect();
    Some(out)
}

fn standardised(y: &[f64]) -> Option<Vec<f64>> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    (sd > 1e-12 * scale).then(|| y.iter().map(|v| (v - mean) / sd).collect())
}

fn select_lags(y: &[f64], max: usize) -> usize {
    for k in (1..=max).rev() {
        let d = Design::new(y, k);
        let cols: Vec<&[f64]> = d.base.iter().map(Vec::as_slice).collect();
        let last = cols.len() - 1;
        if let Some(t) = t_stats(&cols, &d.target, None, &[last]) {
            if t[0].abs() > 1.645 {
                return k;
            }
        }
    }
    0
}

/// Minimum over candidate breaks of the `y_{t-1}` t statistic, with the
/// candidate index achieving it.
fn min_t(y: &[f64], model: ZaModel, lags: usize, trim: f64) -> Option<(f64, usize)> {
    let n = y.len();
    let d = Design::new(y, lags);
    let lo = ((trim * n as f64).ceil() as usize).max(d.first + 1);
    let hi = ((1.0 - trim) * n as f64).floor() as usize;
    let base: Vec<&[f64]> = d.base.iter().map(Vec::as_slice).collect();
    let pb = base.len();
    let gram = DMatrix::from_fn(pb, pb, |i, j| dot(base[i], base[j]));
    let mut best: Option<(f64, usize)> = None;
    for b in lo..=hi.min(n - 1) {
        let extra = d.break_columns(model, b);
        let cols: Vec<&[f64]> = base.iter().copied().chain(extra.iter().map(Vec::as_slice)).collect();
        if let Some(t) = t_stats(&cols, &d.target, Some(&gram), &[d.level_col]) {
            if best.is_none_or(|(v, _)| t[0] < v) {
                best = Some((t[0], b));
            }
        }
    }
    best
}

pub fn zivot_andrews(series: &MonthlySeries, model: ZaModel) -> Result<BreakResult, BreakError> {
    zivot_andrews_with(
        series,
        &ZaOptions {
            model,
            ..ZaOptions::default()
        },
    )
}

pub fn zivot_andrews_with(series: &MonthlySeries, opts: &ZaOptions) -> Result<BreakResult, BreakError> {
    require_len("Zivot-Andrews", series, 30)?;
    if !(opts.trim > 0.0 && opts.trim < 0.5) {
        return Err(BreakError::InvalidArgument(format!("trimming fraction {} not in (0, 0.5)", opts.trim)));
    }
    let critical = zivot_andrews_critical(opts.model, Significance::Five);
    let Some(y) = standardised(&series.values) else {
        return Ok(BreakResult::new(BreakTest::ZivotAndrews, series, 0.0, vec![], false)
            .with_critical_value(critical)
            .with_note("constant series"));
    };
    let lags = match opts.lags {
        ZaLags::Fixed(k) => k,
        ZaLags::GeneralToSpecific => select_lags(&y, crate::selection::default_lag(y.len())),
    };
    if y.len() < 30 + lags {
        return Err(BreakError::TooShort {
            test: "Zivot-Andrews",
            needed: 30 + lags,
            got: y.len(),
        });
    }
    let (stat, b) = min_t(&y, opts.model, lags, opts.trim)
        .ok_or_else(|| BreakError::InvalidArgument("singular regression at every candidate break".into()))?;
    let reject = stat < critical;
    let breaks = if reject { vec![b] } else { vec![] };
    Ok(BreakResult::new(BreakTest::ZivotAndrews, series, stat, breaks, reject)
        .with_critical_value(critical)
        .with_note(format!("{:?} model, {lags} lags", opts.model)))
}

/// Monte Carlo critical values for `model` from Gaussian random walks of
/// length `n` without augmentation lags.
pub fn simulate_zivot_andrews_critical(model: ZaModel, n: usize, reps: usize, seed: u64) -> [f64; 4] {
    let draws = chunked(reps, seed, |rng| {
        let mut level = 0.0;
        let y: Vec<f64> = (0..n)
            .map(|_| {
                let e: f64 = StandardNormal.sample(rng);
                level += e;
                level
            })
            .collect();
        // Lower tail: negate so the upper-tail quantile helper applies.
        -min_t(&y, model, 0, 0.15).map_or(0.0, |(t, _)| t)
    });
    quantiles(draws).map(|v| -v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::YearMonth;

    fn series(values: Vec<f64>) -> MonthlySeries {
        MonthlySeries::monthly(YearMonth::new(2010, 1).unwrap(), values).unwrap()
    }

    #[test]
    fn tables_are_ordered() {
        for row in ZIVOT_ANDREWS {
            assert!(row.windows(2).all(|w| w[0] > w[1]));
        }
    }

    #[test]
    fn t_stats_match_simple_regression() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 3.0, 5.0, 9.0];
        let ones = [1.0; 4];
        let t = t_stats(&[&ones, &x], &y, None, &[1]).unwrap()[0];
        // slope = Sxy/Sxx = 10/5, intercept 0, residuals [1, -1, -1, 1],
        // s² = 4/2, se = √(2/5).
        assert!((t - 2.0 / 0.4f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn breaks_respect_trimming() {
        let y: Vec<f64> = (0..100).map(|t| if t < 50 { 0.0 } else { 6.0 } + ((t * 37) % 11) as f64 / 11.0).collect();
        let r = zivot_andrews(&series(y), ZaModel::Intercept).unwrap();
        assert!(r.reject);
        let b = r.break_indices[0];
        assert!((15..=85).contains(&b));
        assert!((48..=52).contains(&b), "{b}");
    }

    #[test]
    fn short_and_constant() {
        assert!(zivot_andrews(&series(vec![1.0; 29]), ZaModel::Both).is_err());
        let r = zivot_andrews(&series(vec![1.0; 40]), ZaModel::Both).unwrap();
        assert!(!r.reject);
    }
}
