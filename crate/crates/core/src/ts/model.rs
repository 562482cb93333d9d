use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::calendar::YearMonth;

use super::kalman::run_filter;
use super::optim::{minimize, OptimOptions};
use super::poly;
use super::series::{difference, integration_coefficients, MonthlySeries};
use super::TsError;

/// Orders of `Φ(B^m) φ(B) (1 - B^m)^D (1 - B)^d y_t = c + Θ(B^m) θ(B) ε_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SarimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    #[serde(rename = "P")]
    pub sp: usize,
    #[serde(rename = "D")]
    pub sd: usize,
    #[serde(rename = "Q")]
    pub sq: usize,
    pub m: usize,
    pub with_constant: bool,
}

impl SarimaSpec {
    pub fn arima(p: usize, d: usize, q: usize) -> Self {
        Self {
            p,
            d,
            q,
            sp: 0,
            sd: 0,
            sq: 0,
            m: 1,
            with_constant: false,
        }
    }

    pub fn seasonal(mut self, sp: usize, sd: usize, sq: usize, m: usize) -> Self {
        self.sp = sp;
        self.sd = sd;
        self.sq = sq;
        self.m = m;
        self
    }

    pub fn constant(mut self, with_constant: bool) -> Self {
        self.with_constant = with_constant;
        self
    }

    /// Estimated coefficients, excluding the innovation variance.
    pub fn n_coefficients(&self) -> usize {
        self.p + self.q + self.sp + self.sq + usize::from(self.with_constant)
    }

    /// Shortest series that can be fitted.
    pub fn min_length(&self) -> usize {
        let diff = self.d + self.sd * self.m;
        let arma = (self.p + self.sp * self.m).max(self.q + self.sq * self.m);
        diff + arma + 1 + usize::from(self.with_constant)
    }

    pub fn validate(&self) -> Result<(), TsError> {
        if self.m == 0 {
            return Err(TsError::InvalidSpec("seasonal period must be at least 1".into()));
        }
        if self.m == 1 && self.sp + self.sd + self.sq > 0 {
            return Err(TsError::InvalidSpec("seasonal orders need a period above 1".into()));
        }
        Ok(())
    }

    fn is_seasonal(&self) -> bool {
        self.sp + self.sd + self.sq > 0
    }
}

impl fmt::Display for SarimaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ARIMA({},{},{})", self.p, self.d, self.q)?;
        if self.is_seasonal() {
            write!(f, "({},{},{})[{}]", self.sp, self.sd, self.sq, self.m)?;
        }
        if self.with_constant {
            f.write_str(" with constant")?;
        }
        Ok(())
    }
}

/// Model coefficients. `mean` is the mean of the differenced series; the
/// equation constant is `c = mean · φ(1) · Φ(1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaParams {
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    #[serde(rename = "Phi")]
    pub sphi: Vec<f64>,
    #[serde(rename = "Theta")]
    pub stheta: Vec<f64>,
    pub mean: f64,
    pub sigma2: f64,
}

impl SarimaParams {
    pub fn white_noise(sigma2: f64) -> Self {
        Self {
            phi: Vec::new(),
            theta: Vec::new(),
            sphi: Vec::new(),
            stheta: Vec::new(),
            mean: 0.0,
            sigma2,
        }
    }

    pub fn constant_term(&self) -> f64 {
        let ar1 = 1.0 - self.phi.iter().sum::<f64>();
        let sar1 = 1.0 - self.sphi.iter().sum::<f64>();
        self.mean * ar1 * sar1
    }

    fn check_against(&self, spec: &SarimaSpec) -> Result<(), TsError> {
        let lens = [
            (self.phi.len(), spec.p, "phi"),
            (self.theta.len(), spec.q, "theta"),
            (self.sphi.len(), spec.sp, "Phi"),
            (self.stheta.len(), spec.sq, "Theta"),
        ];
        for (got, want, name) in lens {
            if got != want {
                return Err(TsError::InvalidSpec(format!("{name} has {got} coefficients, spec needs {want}")));
            }
        }
        if !spec.with_constant && self.mean != 0.0 {
            return Err(TsError::InvalidSpec("mean given for a model without constant".into()));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(TsError::InvalidSpec(format!("innovation variance {}", self.sigma2)));
        }
        if !poly::is_stationary(&self.phi) || !poly::is_stationary(&self.sphi) {
            return Err(TsError::NonStationary("AR polynomial has a root on or inside the unit circle".into()));
        }
        if !poly::is_invertible(&self.theta) || !poly::is_invertible(&self.stheta) {
            return Err(TsError::NonStationary("MA polynomial has a root on or inside the unit circle".into()));
        }
        Ok(())
    }

    fn expanded(&self, m: usize) -> (Vec<f64>, Vec<f64>) {
        (poly::expand_ar(&self.phi, &self.sphi, m), poly::expand_ma(&self.theta, &self.stheta, m))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub converged: bool,
    pub evaluations: usize,
    /// Log-likelihood at the starting point of the optimiser.
    pub initial_loglik: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSarima {
    pub spec: SarimaSpec,
    pub params: SarimaParams,
    pub constant: f64,
    pub loglik: f64,
    pub aicc: f64,
    /// Usable observations after differencing.
    pub n_used: usize,
    pub residuals: Vec<f64>,
    pub convergence: Convergence,
    /// Last month of the fitted series.
    pub end: YearMonth,
    /// Tail of the undifferenced series needed to integrate forecasts.
    tail: Vec<f64>,
    next_state: Vec<f64>,
}

impl FittedSarima {
    /// Model summary as JSON for audit, without residuals or filter state.
    pub fn dump(&self) -> serde_json::Value {
        serde_json::json!({
            "spec": self.spec,
            "label": self.spec.to_string(),
            "params": self.params,
            "constant": self.constant,
            "loglik": self.loglik,
            "aicc": self.aicc,
            "n_used": self.n_used,
            "convergence": self.convergence,
            "end": self.end,
        })
    }
}

/// `AIC + 2k(k+1)/(n-k-1)` with `k` counting the innovation variance;
/// `+∞` when `n ≤ k + 1`.
pub fn aicc(loglik: f64, k: usize, n: usize) -> f64 {
    if n <= k + 1 || !loglik.is_finite() {
        return f64::INFINITY;
    }
    let (k, n) = (k as f64, n as f64);
    -2.0 * loglik + 2.0 * k + 2.0 * k * (k + 1.0) / (n - k - 1.0)
}

struct Layout {
    spec: SarimaSpec,
    center: f64,
    scale: f64,
}

impl Layout {
    fn decode(&self, u: &[f64]) -> SarimaParams {
        let s = &self.spec;
        let (a, rest) = u.split_at(s.p);
        let (b, rest) = rest.split_at(s.q);
        let (c, rest) = rest.split_at(s.sp);
        let (d, rest) = rest.split_at(s.sq);
        SarimaParams {
            phi: poly::constrain_ar(a),
            theta: poly::constrain_ma(b),
            sphi: poly::constrain_ar(c),
            stheta: poly::constrain_ma(d),
            mean: if s.with_constant { self.center + self.scale * rest[0] } else { 0.0 },
            sigma2: 1.0,
        }
    }
}

fn filter_params(params: &SarimaParams, m: usize, w: &[f64]) -> Option<super::kalman::FilterRun> {
    let (ar, ma) = params.expanded(m);
    let x: Vec<f64> = w.iter().map(|v| v - params.mean).collect();
    run_filter(&ar, &ma, &x)
}

fn prepare(series: &MonthlySeries, spec: &SarimaSpec) -> Result<Vec<f64>, TsError> {
    spec.validate()?;
    if spec.is_seasonal() && spec.m != series.period {
        return Err(TsError::InvalidSpec(format!(
            "spec period {} differs from series period {}",
            spec.m, series.period
        )));
    }
    let needed = spec.min_length();
    if series.len() < needed {
        return Err(TsError::TooShort {
            needed,
            got: series.len(),
        });
    }
    difference(&series.values, spec.d, spec.sd, spec.m)
}

fn assemble(
    series: &MonthlySeries,
    spec: SarimaSpec,
    mut params: SarimaParams,
    w: &[f64],
    convergence: Convergence,
) -> Result<FittedSarima, TsError> {
    let run = filter_params(&params, spec.m, w).ok_or(TsError::LikelihoodFailed)?;
    let (loglik, sigma2) = run.concentrated();
    let scale = 1.0 + w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
    if !(sigma2 > 1e-12 * scale) {
        return Err(TsError::DegenerateVariance);
    }
    params.sigma2 = sigma2;
    let k = spec.n_coefficients() + 1;
    let tail_len = spec.d + spec.sd * spec.m;
    Ok(FittedSarima {
        spec,
        constant: params.constant_term(),
        params,
        loglik,
        aicc: aicc(loglik, k, w.len()),
        n_used: w.len(),
        residuals: run.innovations,
        convergence,
        end: series.end(),
        tail: series.values[series.len() - tail_len..].to_vec(),
        next_state: run.next_state,
    })
}

/// Exact maximum-likelihood fit of `spec` to `series`.
pub fn fit(series: &MonthlySeries, spec: &SarimaSpec) -> Result<FittedSarima, TsError> {
    fit_with(series, spec, OptimOptions::default())
}

pub fn fit_with(series: &MonthlySeries, spec: &SarimaSpec, opts: OptimOptions) -> Result<FittedSarima, TsError> {
    let w = prepare(series, spec)?;
    let n = w.len() as f64;
    let center = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - center).powi(2)).sum::<f64>() / n;
    let layout = Layout {
        spec: *spec,
        center,
        scale: if var > 0.0 { var.sqrt() } else { 1.0 },
    };
    let objective = |u: &[f64]| -> f64 {
        let params = layout.decode(u);
        match filter_params(&params, spec.m, &w) {
            Some(run) => -run.concentrated().0 / n,
            None => f64::INFINITY,
        }
    };
    let x0 = vec![0.0; spec.n_coefficients()];
    let initial = objective(&x0);
    let result = minimize(objective, &x0, opts);
    let convergence = Convergence {
        converged: result.converged,
        evaluations: result.evals + 1,
        initial_loglik: -initial * n,
    };
    assemble(series, *spec, layout.decode(&result.x), &w, convergence)
}

/// Evaluates the model at fixed coefficients; `params.sigma2` is replaced by
/// its maximum-likelihood value given the coefficients.
pub fn fit_fixed(series: &MonthlySeries, spec: &SarimaSpec, params: &SarimaParams) -> Result<FittedSarima, TsError> {
    params.check_against(spec)?;
    let w = prepare(series, spec)?;
    let convergence = Convergence {
        converged: true,
        evaluations: 0,
        initial_loglik: f64::NAN,
    };
    let mut fitted = assemble(series, *spec, params.clone(), &w, convergence)?;
    fitted.convergence.initial_loglik = fitted.loglik;
    Ok(fitted)
}

/// Log-likelihood of `spec` on `series` at fixed coefficients (concentrated
/// over `σ²`).
pub fn loglik_at(series: &MonthlySeries, spec: &SarimaSpec, params: &SarimaParams) -> Result<f64, TsError> {
    let w = prepare(series, spec)?;
    let run = filter_params(params, spec.m, &w).ok_or(TsError::LikelihoodFailed)?;
    Ok(run.concentrated().0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub start: YearMonth,
    pub mean: Vec<f64>,
    /// Forecast-error variance at each horizon.
    pub variance: Vec<f64>,
    pub intervals: Vec<PredictionInterval>,
    pub sigma2: f64,
    /// MA(∞) weights of the integrated model.
    pub psi: Vec<f64>,
}

impl Forecast {
    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    pub fn interval(&self, level: f64) -> Option<&PredictionInterval> {
        self.intervals.iter().find(|i| (i.level - level).abs() < 1e-9)
    }

    /// Covariance of the forecast errors at horizons `h` and `k` (1-based).
    pub fn error_covariance(&self, h: usize, k: usize) -> f64 {
        let (lo, hi) = (h.min(k), h.max(k));
        let gap = hi - lo;
        self.sigma2 * (0..lo).map(|j| self.psi[j] * self.psi[j + gap]).sum::<f64>()
    }

    /// Variance of the summed forecast errors over horizons `from..=to`.
    pub fn sum_variance(&self, from: usize, to: usize) -> f64 {
        let mut total = 0.0;
        for h in from..=to {
            for k in from..=to {
                total += self.error_covariance(h, k);
            }
        }
        total
    }
}

pub const DEFAULT_LEVELS: [f64; 2] = [80.0, 95.0];

/// Two-sided normal quantile for a percentage level.
pub fn z_value(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + level / 200.0)
}

pub fn forecast(fit: &FittedSarima, horizon: usize) -> Result<Forecast, TsError> {
    forecast_with_levels(fit, horizon, &DEFAULT_LEVELS)
}

pub fn forecast_with_levels(fit: &FittedSarima, horizon: usize, levels: &[f64]) -> Result<Forecast, TsError> {
    if horizon == 0 {
        return Err(TsError::InvalidHorizon);
    }
    if let Some(l) = levels.iter().find(|l| !(**l > 0.0 && **l < 100.0)) {
        return Err(TsError::InvalidSpec(format!("interval level {l}")));
    }
    let spec = &fit.spec;
    let p = &fit.params;
    let (ar, ma) = p.expanded(spec.m);
    let r = fit.next_state.len();
    let phi: Vec<f64> = (0..r).map(|i| ar.get(i).copied().unwrap_or(0.0)).collect();
    let mut state = fit.next_state.clone();
    let mut w_hat = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        w_hat.push(p.mean + state[0]);
        let a0 = state[0];
        for i in 0..r {
            let next = if i + 1 < r { state[i + 1] } else { 0.0 };
            state[i] = phi[i] * a0 + next;
        }
    }
    let delta = integration_coefficients(spec.d, spec.sd, spec.m);
    let mut path = fit.tail.clone();
    for w in &w_hat {
        let t = path.len();
        let v = w + delta.iter().enumerate().map(|(j, c)| c * path[t - 1 - j]).sum::<f64>();
        path.push(v);
    }
    let mean = path[fit.tail.len()..].to_vec();

    let mut full_ar_poly = vec![1.0];
    full_ar_poly.extend(ar.iter().map(|c| -c));
    let mut delta_poly = vec![1.0];
    delta_poly.extend(delta.iter().map(|c| -c));
    let full: Vec<f64> = poly::mul(&full_ar_poly, &delta_poly)[1..].iter().map(|c| -c).collect();
    let psi = poly::psi_weights(&full, &ma, horizon);
    let mut variance = Vec::with_capacity(horizon);
    let mut acc = 0.0;
    for w in &psi {
        acc += w * w;
        variance.push(p.sigma2 * acc);
    }
    let intervals = levels
        .iter()
        .map(|&level| {
            let z = z_value(level);
            PredictionInterval {
                level,
                lower: mean.iter().zip(&variance).map(|(m, v)| m - z * v.sqrt()).collect(),
                upper: mean.iter().zip(&variance).map(|(m, v)| m + z * v.sqrt()).collect(),
            }
        })
        .collect();
    Ok(Forecast {
        start: fit.end.succ(),
        mean,
        variance,
        intervals,
        sigma2: p.sigma2,
        psi,
    })
}

/// Draws `n` observations from the model. The ARMA part runs through a
/// burn-in of `10·(p + q + (P + Q)·m) + 100` periods first; integration
/// starts from zeros.
pub fn simulate(spec: &SarimaSpec, params: &SarimaParams, n: usize, seed: u64) -> Result<MonthlySeries, TsError> {
    simulate_from(spec, params, n, seed, YearMonth::new(2000, 1).expect("valid month"))
}

pub fn simulate_from(
    spec: &SarimaSpec,
    params: &SarimaParams,
    n: usize,
    seed: u64,
    start: YearMonth,
) -> Result<MonthlySeries, TsError> {
    spec.validate()?;
    params.check_against(spec)?;
    if n == 0 {
        return Err(TsError::TooShort { needed: 1, got: 0 });
    }
    let burn = 10 * (spec.p + spec.q + (spec.sp + spec.sq) * spec.m) + 100;
    let (ar, ma) = params.expanded(spec.m);
    let sd = params.sigma2.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = burn + n;
    let mut eps = Vec::with_capacity(total);
    let mut x = Vec::with_capacity(total);
    for t in 0..total {
        let z: f64 = StandardNormal.sample(&mut rng);
        let e = sd * z;
        eps.push(e);
        let mut v = e;
        for (i, a) in ar.iter().enumerate() {
            if t > i {
                v += a * x[t - 1 - i];
            }
        }
        for (j, b) in ma.iter().enumerate() {
            if t > j {
                v += b * eps[t - 1 - j];
            }
        }
        x.push(v);
    }
    let delta = integration_coefficients(spec.d, spec.sd, spec.m);
    let k = delta.len();
    let mut y = vec![0.0; k];
    for xt in &x {
        let t = y.len();
        let v = params.mean + xt + delta.iter().enumerate().map(|(j, c)| c * y[t - 1 - j]).sum::<f64>();
        y.push(v);
    }
    MonthlySeries::new(start, y[y.len() - n..].to_vec(), spec.m)
}
