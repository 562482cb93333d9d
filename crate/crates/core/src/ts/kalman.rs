//! Exact Gaussian likelihood of a zero-mean ARMA process through the Kalman
//! filter on Harvey's state-space form.
//!
//! With `r = max(p, q + 1)` the state evolves as `α_t = T α_{t-1} + R ε_t`,
//! `x_t = α_t[0]`, where `T` has the AR coefficients in its first column and
//! ones on the superdiagonal and `R = (1, θ_1, ..., θ_{r-1})`. All
//! quantities are computed with unit innovation variance so that `σ²` can be
//! profiled out.

use nalgebra::{DMatrix, DVector};

/// Filter output for one series.
#[derive(Debug, Clone)]
pub struct FilterRun {
    /// One-step prediction errors `x_t - E[x_t | x_{<t}]`.
    pub innovations: Vec<f64>,
    /// Prediction-error variances relative to `σ²`.
    pub variances: Vec<f64>,
    pub sum_sq: f64,
    pub sum_log_var: f64,
    /// Predicted state and covariance for the period after the sample.
    pub next_state: Vec<f64>,
    pub next_cov: Vec<f64>,
}

impl FilterRun {
    /// Log-likelihood with `σ²` replaced by its maximiser, and that maximiser.
    pub fn concentrated(&self) -> (f64, f64) {
        let n = self.innovations.len() as f64;
        let sigma2 = self.sum_sq / n;
        let ll = -0.5 * n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0) - 0.5 * self.sum_log_var;
        (ll, sigma2)
    }

    /// Log-likelihood at a given `σ²`.
    pub fn at_variance(&self, sigma2: f64) -> f64 {
        let n = self.innovations.len() as f64;
        -0.5 * (n * (2.0 * std::f64::consts::PI * sigma2).ln() + self.sum_log_var + self.sum_sq / sigma2)
    }
}

/// Autocovariances `γ(0..=nlags)` of the ARMA process with unit innovation
/// variance. `None` if the AR part is too close to non-stationary.
pub fn autocovariances(ar: &[f64], ma: &[f64], nlags: usize) -> Option<Vec<f64>> {
    let p = ar.len();
    let q = ma.len();
    let theta = |j: usize| if j == 0 { 1.0 } else { ma.get(j - 1).copied().unwrap_or(0.0) };
    let psi = super::poly::psi_weights(ar, ma, q + 1);
    // Right-hand side: E[x_t ε_{t-k}]-driven terms Σ_{j=k}^{q} θ_j ψ_{j-k}.
    let rhs = |k: usize| (k..=q).map(|j| theta(j) * psi[j - k]).sum::<f64>();
    let mut gamma = vec![0.0; nlags.max(p) + 1];
    if p == 0 {
        for (k, g) in gamma.iter_mut().enumerate() {
            *g = rhs(k);
        }
    } else {
        let mut a = DMatrix::<f64>::zeros(p + 1, p + 1);
        let mut b = DVector::<f64>::zeros(p + 1);
        for k in 0..=p {
            a[(k, k)] += 1.0;
            for (j, phi) in ar.iter().enumerate() {
                let lag = (k as isize - (j as isize + 1)).unsigned_abs();
                a[(k, lag)] -= phi;
            }
            b[k] = rhs(k);
        }
        let sol = a.lu().solve(&b)?;
        for k in 0..=p {
            gamma[k] = sol[k];
        }
        for k in p + 1..gamma.len() {
            gamma[k] = ar.iter().enumerate().map(|(j, phi)| phi * gamma[k - 1 - j]).sum::<f64>() + rhs(k);
        }
    }
    if !(gamma[0].is_finite() && gamma[0] > 0.0) || gamma.iter().any(|g| !g.is_finite()) {
        return None;
    }
    gamma.truncate(nlags + 1);
    Some(gamma)
}

/// Harvey state dimension.
pub fn state_dim(ar: &[f64], ma: &[f64]) -> usize {
    ar.len().max(ma.len() + 1)
}

/// Stationary covariance of the state vector (unit innovation variance),
/// row-major `r × r`.
pub fn stationary_state_cov(ar: &[f64], ma: &[f64]) -> Option<Vec<f64>> {
    let r = state_dim(ar, ma);
    let gamma = autocovariances(ar, ma, r)?;
    let psi = super::poly::psi_weights(ar, ma, r + 1);
    let phi = |k: usize| if k >= 1 && k <= ar.len() { ar[k - 1] } else { 0.0 };
    let theta = |k: usize| match k {
        0 => 1.0,
        k if k <= ma.len() => ma[k - 1],
        _ => 0.0,
    };
    // Element i of the state is Σ_{j≥1} φ_{i+j} x_{t-j} + Σ_{j≥0} θ_{i+j} ε_{t-j}.
    let ar_terms: Vec<Vec<(usize, f64)>> = (0..r)
        .map(|i| (1..=r - i).map(|j| (j, phi(i + j))).filter(|(_, c)| *c != 0.0).collect())
        .collect();
    let ma_terms: Vec<Vec<(usize, f64)>> = (0..r)
        .map(|i| (0..r - i).map(|j| (j, theta(i + j))).filter(|(_, c)| *c != 0.0).collect())
        .collect();
    // E[x_{t-j} ε_{t-k}] for the lags involved.
    let cross = |j: usize, k: usize| if k >= j { psi[k - j] } else { 0.0 };
    let mut cov = vec![0.0; r * r];
    for i in 0..r {
        for l in i..r {
            let mut s = 0.0;
            for &(j, a) in &ar_terms[i] {
                for &(k, b) in &ar_terms[l] {
                    s += a * b * gamma[j.abs_diff(k)];
                }
                for &(k, b) in &ma_terms[l] {
                    s += a * b * cross(j, k);
                }
            }
            for &(j, a) in &ma_terms[i] {
                for &(k, b) in &ar_terms[l] {
                    s += a * b * cross(k, j);
                }
                for &(k, b) in &ma_terms[l] {
                    if j == k {
                        s += a * b;
                    }
                }
            }
            cov[i * r + l] = s;
            cov[l * r + i] = s;
        }
    }
    Some(cov)
}

/// Runs the filter over the zero-mean series `x`. `None` if the stationary
/// initialisation fails or a prediction variance degenerates.
pub fn run_filter(ar: &[f64], ma: &[f64], x: &[f64]) -> Option<FilterRun> {
    let r = state_dim(ar, ma);
    let phi: Vec<f64> = (0..r).map(|i| ar.get(i).copied().unwrap_or(0.0)).collect();
    let rv: Vec<f64> = (0..r).map(|i| if i == 0 { 1.0 } else { ma.get(i - 1).copied().unwrap_or(0.0) }).collect();
    let mut p = stationary_state_cov(ar, ma)?;
    let mut a = vec![0.0; r];
    let mut tp = vec![0.0; r * r];
    let mut innovations = Vec::with_capacity(x.len());
    let mut variances = Vec::with_capacity(x.len());
    let (mut sum_sq, mut sum_log_var) = (0.0, 0.0);
    let mut steady = false;
    for &obs in x {
        let v = obs - a[0];
        let f = if steady { 1.0 } else { p[0] };
        if !(f.is_finite() && f > 0.0) {
            return None;
        }
        innovations.push(v);
        variances.push(f);
        sum_sq += v * v / f;
        sum_log_var += f.ln();
        if steady {
            // Gain equals R once the prediction variance has converged.
            for i in 0..r {
                a[i] += rv[i] * v;
            }
        } else {
            for i in 0..r {
                a[i] += p[i * r] / f * v;
            }
            let col: Vec<f64> = (0..r).map(|i| p[i * r]).collect();
            for i in 0..r {
                for j in 0..r {
                    p[i * r + j] -= col[i] * col[j] / f;
                }
            }
        }
        let a0 = a[0];
        for i in 0..r {
            let next = if i + 1 < r { a[i + 1] } else { 0.0 };
            a[i] = phi[i] * a0 + next;
        }
        if !steady {
            for i in 0..r {
                for j in 0..r {
                    let below = if i + 1 < r { p[(i + 1) * r + j] } else { 0.0 };
                    tp[i * r + j] = phi[i] * p[j] + below;
                }
            }
            for i in 0..r {
                for j in 0..r {
                    let right = if j + 1 < r { tp[i * r + j + 1] } else { 0.0 };
                    p[i * r + j] = phi[j] * tp[i * r] + right + rv[i] * rv[j];
                }
            }
            steady = (0..r).all(|i| (0..r).all(|j| (p[i * r + j] - rv[i] * rv[j]).abs() < 1e-12));
        }
    }
    if steady {
        for i in 0..r {
            for j in 0..r {
                p[i * r + j] = rv[i] * rv[j];
            }
        }
    }
    Some(FilterRun {
        innovations,
        variances,
        sum_sq,
        sum_log_var,
        next_state: a,
        next_cov: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ts::poly::{expand_ar, expand_ma, psi_weights};

    /// Autocovariances by brute-force truncated ψ sums.
    fn brute_gamma(ar: &[f64], ma: &[f64], nlags: usize) -> Vec<f64> {
        let psi = psi_weights(ar, ma, 20_000);
        (0..=nlags).map(|k| psi.iter().zip(&psi[k..]).map(|(a, b)| a * b).sum()).collect()
    }

    /// Dense Gaussian log-likelihood with a Toeplitz covariance.
    fn dense_loglik(ar: &[f64], ma: &[f64], x: &[f64], sigma2: f64) -> f64 {
        let n = x.len();
        let g = brute_gamma(ar, ma, n);
        let cov = DMatrix::from_fn(n, n, |i, j| sigma2 * g[i.abs_diff(j)]);
        let chol = cov.cholesky().unwrap();
        let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let xv = DVector::from_column_slice(x);
        let quad = xv.dot(&chol.solve(&xv));
        -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad)
    }

    fn sample(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 37 % 17) as f64 - 8.0) / 3.0 + (i as f64 * 0.7).sin()).collect()
    }

    #[test]
    fn autocovariances_match_psi_sums() {
        for (ar, ma) in [
            (vec![0.5], vec![]),
            (vec![], vec![0.4, -0.2]),
            (vec![0.6, -0.3], vec![0.5]),
            (expand_ar(&[0.4], &[0.5], 4), expand_ma(&[0.3], &[-0.4], 4)),
        ] {
            let got = autocovariances(&ar, &ma, 10).unwrap();
            let want = brute_gamma(&ar, &ma, 10);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-9, "{ar:?} {ma:?}: {got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn ar1_gamma_closed_form() {
        let g = autocovariances(&[0.5], &[], 2).unwrap();
        assert!((g[0] - 1.0 / 0.75).abs() < 1e-12);
        assert!((g[2] - 0.25 / 0.75).abs() < 1e-12);
    }

    #[test]
    fn filter_likelihood_equals_dense_likelihood() {
        let x = sample(40);
        for (ar, ma) in [
            (vec![0.5], vec![]),
            (vec![], vec![0.6]),
            (vec![0.7, -0.2], vec![0.3, 0.1]),
            (expand_ar(&[0.3], &[0.6], 4), expand_ma(&[-0.2], &[0.5], 4)),
            (vec![], vec![]),
        ] {
            let run = run_filter(&ar, &ma, &x).unwrap();
            let got = run.at_variance(1.7);
            let want = dense_loglik(&ar, &ma, &x, 1.7);
            assert!((got - want).abs() < 1e-7, "{ar:?} {ma:?}: {got} vs {want}");
        }
    }

    #[test]
    fn concentrated_variance_maximises() {
        let x = sample(60);
        let run = run_filter(&[0.4], &[0.2], &x).unwrap();
        let (ll, s2) = run.concentrated();
        assert!((ll - run.at_variance(s2)).abs() < 1e-9);
        assert!(ll >= run.at_variance(s2 * 1.05));
        assert!(ll >= run.at_variance(s2 * 0.95));
    }

    #[test]
    fn one_step_prediction_of_ar1() {
        let run = run_filter(&[0.5], &[], &[1.0, 2.0, 4.0]).unwrap();
        assert!((run.next_state[0] - 2.0).abs() < 1e-12);
        assert!((run.next_cov[0] - 1.0).abs() < 1e-12);
    }
}
