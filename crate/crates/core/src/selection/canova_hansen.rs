use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::critical::{canova_hansen_critical, Significance};
use super::SelectionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeasonalDecision {
    StableSeasonality,
    UnstableSeasonality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalStabilityResult {
    pub statistic: f64,
    pub lag: usize,
    pub critical_value: f64,
    pub decision: SeasonalDecision,
}

/// Bartlett truncation lag `⌊4 (n/100)^{1/4}⌋`, as for KPSS. The longer
/// `round(m (n/100)^{1/4})` rule leaves the test with almost no power on
/// series of ten or twenty years of monthly data.
pub fn default_lag(n: usize) -> usize {
    super::kpss::default_lag(n)
}

/// The `m - 1` trigonometric seasonal regressors at time `t`.
fn seasonal_terms(t: usize, m: usize) -> Vec<f64> {
    let mut f = Vec::with_capacity(m - 1);
    for j in 1..=m / 2 {
        let w = 2.0 * std::f64::consts::PI * (j * t) as f64 / m as f64;
        f.push(w.cos());
        if 2 * j < m {
            f.push(w.sin());
        }
    }
    f
}

/// Stability statistic for all seasonal frequencies jointly: the series is
/// regressed on a constant and trigonometric seasonal terms, and the partial
/// sums of regressor-weighted residuals are normalised by their long-run
/// covariance.
pub fn canova_hansen_statistic(y: &[f64], m: usize, lag: usize) -> f64 {
    let n = y.len();
    let k = m - 1;
    let terms: Vec<Vec<f64>> = (0..n).map(|t| seasonal_terms(t, m)).collect();
    let x = DMatrix::from_fn(n, k + 1, |t, j| if j == 0 { 1.0 } else { terms[t][j - 1] });
    let yv = DVector::from_column_slice(y);
    let Ok(beta) = x.clone().svd(true, true).solve(&yv, 1e-12) else {
        return 0.0;
    };
    let e = &yv - &x * beta;
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    if e.iter().all(|v| v.abs() < 1e-10 * scale) {
        return 0.0;
    }
    let fe: Vec<DVector<f64>> = (0..n).map(|t| DVector::from_vec(terms[t].clone()) * e[t]).collect();
    let nf = n as f64;
    let mut omega = DMatrix::<f64>::zeros(k, k);
    for v in &fe {
        omega += v * v.transpose() / nf;
    }
    for l in 1..=lag.min(n - 1) {
        let w = 1.0 - l as f64 / (lag as f64 + 1.0);
        let mut g = DMatrix::<f64>::zeros(k, k);
        for t in l..n {
            g += &fe[t] * fe[t - l].transpose();
        }
        g /= nf;
        omega += (&g + g.transpose()) * w;
    }
    let Ok(inv) = omega.pseudo_inverse(1e-12) else {
        return 0.0;
    };
    let mut partial = DVector::<f64>::zeros(k);
    let mut total = 0.0;
    for v in &fe {
        partial += v;
        total += (partial.transpose() * &inv * &partial)[(0, 0)];
    }
    total / (nf * nf)
}

pub fn canova_hansen_test(y: &[f64], m: usize) -> Result<SeasonalStabilityResult, SelectionError> {
    canova_hansen_test_at(y, m, Significance::Five)
}

pub fn canova_hansen_test_at(y: &[f64], m: usize, level: Significance) -> Result<SeasonalStabilityResult, SelectionError> {
    if m < 2 {
        return Err(SelectionError::InvalidPeriod(m));
    }
    if y.len() < 2 * m {
        return Err(SelectionError::TooShort {
            test: "Canova-Hansen",
            needed: 2 * m,
            got: y.len(),
        });
    }
    let critical_value = canova_hansen_critical(m - 1, level).ok_or(SelectionError::InvalidPeriod(m))?;
    let lag = default_lag(y.len());
    let statistic = canova_hansen_statistic(y, m, lag);
    Ok(SeasonalStabilityResult {
        statistic,
        lag,
        critical_value,
        decision: if statistic > critical_value {
            SeasonalDecision::UnstableSeasonality
        } else {
            SeasonalDecision::StableSeasonality
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_terms_count() {
        assert_eq!(seasonal_terms(3, 12).len(), 11);
        assert_eq!(seasonal_terms(3, 4).len(), 3);
        assert_eq!(seasonal_terms(3, 5).len(), 4);
    }

    #[test]
    fn exact_seasonal_pattern_is_stable() {
        let pattern = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0, 8.0];
        let y: Vec<f64> = (0..60).map(|t| pattern[t % 12]).collect();
        let r = canova_hansen_test(&y, 12).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.decision, SeasonalDecision::StableSeasonality);
    }

    #[test]
    fn preconditions() {
        assert!(canova_hansen_test(&[1.0; 23], 12).is_err());
        assert!(canova_hansen_test(&[1.0; 30], 1).is_err());
    }
}
