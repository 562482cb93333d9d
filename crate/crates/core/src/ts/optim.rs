//! Unconstrained minimisation: Nelder-Mead followed by a BFGS polish with
//! central-difference gradients.

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    pub max_evals: usize,
    pub rel_tol: f64,
    pub initial_step: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_evals: 1000,
            rel_tol: 1e-8,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (a.abs() + tol)
}

/// Minimises `f` from `x0`. Non-finite values are treated as +∞.
pub fn minimize<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], opts: OptimOptions) -> OptimResult {
    let mut obj = Counted { f, evals: 0 };
    let n = x0.len();
    if n == 0 {
        let value = obj.call(x0);
        return OptimResult {
            x: Vec::new(),
            value,
            evals: obj.evals,
            converged: value.is_finite(),
        };
    }
    let nm_budget = opts.max_evals * 3 / 4;
    let (mut x, mut fx, nm_done) = nelder_mead(&mut obj, x0, opts, nm_budget);
    let mut converged = nm_done;
    if fx.is_finite() {
        let (bx, bf, bfgs_done) = bfgs(&mut obj, &x, fx, opts);
        if bf <= fx {
            x = bx;
            fx = bf;
        }
        converged = converged || bfgs_done;
    }
    OptimResult {
        x,
        value: fx,
        evals: obj.evals,
        converged: converged && fx.is_finite(),
    }
}

fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    obj: &mut Counted<F>,
    x0: &[f64],
    opts: OptimOptions,
    budget: usize,
) -> (Vec<f64>, f64, bool) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step * x0[i].abs().max(1.0);
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| obj.call(v)).collect();
    let mut converged = false;
    while obj.evals < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let (best, worst) = (values[0], values[n]);
        if best.is_finite() && close(worst, best, opts.rel_tol) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = obj.call(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = obj.call(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = along(-0.5);
                let fc = obj.call(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = obj.call(&xc);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    simplex[i] = (0..n).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
                    values[i] = obj.call(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    (simplex[best].clone(), values[best], converged)
}

fn gradient<F: FnMut(&[f64]) -> f64>(obj: &mut Counted<F>, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-5 * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let fp = obj.call(&xp);
        xp[i] = x[i] - h;
        let fm = obj.call(&xp);
        xp[i] = x[i];
        g[i] = if fp.is_finite() && fm.is_finite() { (fp - fm) / (2.0 * h) } else { 0.0 };
    }
    g
}

fn bfgs<F: FnMut(&[f64]) -> f64>(obj: &mut Counted<F>, x0: &[f64], f0: f64, opts: OptimOptions) -> (Vec<f64>, f64, bool) {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f0;
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut g = gradient(obj, &x);
    loop {
        if obj.evals + 2 * n + 2 > opts.max_evals {
            return (x, fx, false);
        }
        let gnorm = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if gnorm < 1e-8 {
            return (x, fx, true);
        }
        let mut dir: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| h[i][j] * g[j]).sum::<f64>()).collect();
        let mut slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if slope >= 0.0 {
            for row in h.iter_mut().enumerate() {
                for (j, v) in row.1.iter_mut().enumerate() {
                    *v = if row.0 == j { 1.0 } else { 0.0 };
                }
            }
            dir = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        let mut t = 1.0;
        let mut accepted = None;
        while obj.evals < opts.max_evals {
            let xn: Vec<f64> = (0..n).map(|i| x[i] + t * dir[i]).collect();
            let fnew = obj.call(&xn);
            if fnew <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
            if t < 1e-10 {
                break;
            }
        }
        let Some((xn, fnew)) = accepted else {
            return (x, fx, true);
        };
        let done = close(fx, fnew, opts.rel_tol);
        let gn = gradient(obj, &xn);
        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i][j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += (1.0 + yhy / sy) * s[i] * s[j] / sy - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        x = xn;
        fx = fnew;
        g = gn;
        if done {
            return (x, fx, true);
        }
    }
}
