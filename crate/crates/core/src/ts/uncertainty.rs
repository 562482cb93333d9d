use nalgebra::DMatrix;

use super::model::{fit_fixed, forecast_with_levels, loglik_at, FittedSarima, SarimaParams};
use super::MonthlySeries;

fn to_vector(p: &SarimaParams, with_constant: bool) -> Vec<f64> {
    let mut v: Vec<f64> = p.phi.iter().chain(&p.theta).chain(&p.sphi).chain(&p.stheta).copied().collect();
    if with_constant {
        v.push(p.mean);
    }
    v
}

fn from_vector(template: &SarimaParams, v: &[f64]) -> SarimaParams {
    let mut out = template.clone();
    let mut it = v.iter().copied();
    for slot in [&mut out.phi, &mut out.theta, &mut out.sphi, &mut out.stheta] {
        for x in slot.iter_mut() {
            *x = it.next().expect("length");
        }
    }
    if let Some(mean) = it.next() {
        out.mean = mean;
    }
    out
}

/// Covariance of the point forecasts at horizons `1..=horizon` induced by
/// sampling error in the estimated coefficients (delta method). The
/// coefficient covariance is the inverse of the numerically differentiated
/// information of the concentrated likelihood. `None` when a perturbed model
/// leaves the admissible region or the information is not positive definite.
pub fn parameter_forecast_covariance(series: &MonthlySeries, fitted: &FittedSarima, horizon: usize) -> Option<Vec<Vec<f64>>> {
    let spec = fitted.spec;
    let theta = to_vector(&fitted.params, spec.with_constant);
    let k = theta.len();
    if k == 0 {
        return Some(vec![vec![0.0; horizon]; horizon]);
    }
    let sd = fitted.params.sigma2.sqrt().max(1e-8);
    let steps: Vec<f64> = (0..k)
        .map(|i| if spec.with_constant && i == k - 1 { 1e-3 * sd } else { 1e-4 * (1.0 + theta[i].abs()) })
        .collect();
    let ll = |v: &[f64]| loglik_at(series, &spec, &from_vector(&fitted.params, v)).ok().filter(|x| x.is_finite());
    let shifted = |moves: &[(usize, f64)]| {
        let mut v = theta.clone();
        for &(i, s) in moves {
            v[i] += s * steps[i];
        }
        v
    };
    let centre = ll(&theta)?;
    let mut info = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        let up = ll(&shifted(&[(i, 1.0)]))?;
        let down = ll(&shifted(&[(i, -1.0)]))?;
        info[(i, i)] = -(up - 2.0 * centre + down) / (steps[i] * steps[i]);
        for j in 0..i {
            let pp = ll(&shifted(&[(i, 1.0), (j, 1.0)]))?;
            let pm = ll(&shifted(&[(i, 1.0), (j, -1.0)]))?;
            let mp = ll(&shifted(&[(i, -1.0), (j, 1.0)]))?;
            let mm = ll(&shifted(&[(i, -1.0), (j, -1.0)]))?;
            let v = -(pp - pm - mp + mm) / (4.0 * steps[i] * steps[j]);
            info[(i, j)] = v;
            info[(j, i)] = v;
        }
    }
    let cov = info.cholesky()?.inverse();
    let point = |v: &[f64]| -> Option<Vec<f64>> {
        let f = fit_fixed(series, &spec, &from_vector(&fitted.params, v)).ok()?;
        Some(forecast_with_levels(&f, horizon, &[]).ok()?.mean)
    };
    let mut jac = DMatrix::<f64>::zeros(horizon, k);
    for i in 0..k {
        let up = point(&shifted(&[(i, 1.0)]))?;
        let down = point(&shifted(&[(i, -1.0)]))?;
        for h in 0..horizon {
            jac[(h, i)] = (up[h] - down[h]) / (2.0 * steps[i]);
        }
    }
    let c = &jac * cov * jac.transpose();
    Some((0..horizon).map(|h| (0..horizon).map(|j| c[(h, j)]).collect()).collect())
}
