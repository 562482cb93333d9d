//! Lag polynomials and the stationarity-preserving parameter transform.

/// Product of two polynomials given by coefficients in increasing degree.
pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// AR-side expansion: coefficients `c_1..c_k` with
/// `(1 - Σ φ_i B^i)(1 - Σ Φ_j B^{jm}) = 1 - Σ c_k B^k`.
pub fn expand_ar(phi: &[f64], sphi: &[f64], m: usize) -> Vec<f64> {
    let a = lag_poly(phi, 1, -1.0);
    let b = lag_poly(sphi, m, -1.0);
    mul(&a, &b)[1..].iter().map(|c| -c).collect()
}

/// MA-side expansion: coefficients `c_1..c_k` with
/// `(1 + Σ θ_i B^i)(1 + Σ Θ_j B^{jm}) = 1 + Σ c_k B^k`.
pub fn expand_ma(theta: &[f64], stheta: &[f64], m: usize) -> Vec<f64> {
    let a = lag_poly(theta, 1, 1.0);
    let b = lag_poly(stheta, m, 1.0);
    mul(&a, &b)[1..].to_vec()
}

fn lag_poly(coefs: &[f64], step: usize, sign: f64) -> Vec<f64> {
    let mut p = vec![0.0; coefs.len() * step + 1];
    p[0] = 1.0;
    for (i, c) in coefs.iter().enumerate() {
        p[(i + 1) * step] = sign * c;
    }
    p
}

/// Maps partial autocorrelations in (-1, 1) to the coefficients of a
/// stationary AR polynomial `1 - Σ a_k z^k` (Durbin-Levinson recursion).
pub fn pacf_to_ar(pacf: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::with_capacity(pacf.len());
    for (k, &r) in pacf.iter().enumerate() {
        let prev = a.clone();
        for j in 0..k {
            a[j] = prev[j] - r * prev[k - 1 - j];
        }
        a.push(r);
    }
    a
}

/// Inverse of [`pacf_to_ar`]. Returns `None` unless the polynomial is
/// strictly stationary.
pub fn ar_to_pacf(ar: &[f64]) -> Option<Vec<f64>> {
    let mut a = ar.to_vec();
    let mut pacf = vec![0.0; a.len()];
    for k in (0..a.len()).rev() {
        let r = a[k];
        if !(r.abs() < 1.0) {
            return None;
        }
        pacf[k] = r;
        let denom = 1.0 - r * r;
        let prev = a.clone();
        for j in 0..k {
            a[j] = (prev[j] + r * prev[k - 1 - j]) / denom;
        }
        a.truncate(k);
    }
    Some(pacf)
}

/// Unconstrained reals to coefficients of a stationary AR polynomial.
pub fn constrain_ar(u: &[f64]) -> Vec<f64> {
    let r: Vec<f64> = u.iter().map(|x| x.tanh()).collect();
    pacf_to_ar(&r)
}

/// Unconstrained reals to coefficients of an invertible MA polynomial
/// `1 + Σ θ_k z^k`.
pub fn constrain_ma(u: &[f64]) -> Vec<f64> {
    constrain_ar(u).into_iter().map(|a| -a).collect()
}

pub fn unconstrain_ar(ar: &[f64]) -> Option<Vec<f64>> {
    ar_to_pacf(ar).map(|r| r.into_iter().map(f64::atanh).collect())
}

pub fn unconstrain_ma(ma: &[f64]) -> Option<Vec<f64>> {
    let neg: Vec<f64> = ma.iter().map(|t| -t).collect();
    unconstrain_ar(&neg)
}

/// Whether `1 - Σ a_k z^k` has all roots strictly outside the unit circle.
pub fn is_stationary(ar: &[f64]) -> bool {
    ar_to_pacf(ar).is_some()
}

/// Whether `1 + Σ θ_k z^k` has all roots strictly outside the unit circle.
pub fn is_invertible(ma: &[f64]) -> bool {
    let neg: Vec<f64> = ma.iter().map(|t| -t).collect();
    is_stationary(&neg)
}

/// MA(∞) weights `ψ_0..ψ_{n-1}` of `(1 - Σ ar_i B^i)^{-1} (1 + Σ ma_j B^j)`.
pub fn psi_weights(ar: &[f64], ma: &[f64], n: usize) -> Vec<f64> {
    let mut psi = vec![0.0; n];
    for j in 0..n {
        let mut v = if j == 0 { 1.0 } else { ma.get(j - 1).copied().unwrap_or(0.0) };
        for (i, a) in ar.iter().enumerate() {
            if j > i {
                v += a * psi[j - 1 - i];
            }
        }
        psi[j] = v;
    }
    psi
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seasonal_expansion() {
        let c = expand_ar(&[0.5], &[0.3], 4);
        assert_eq!(c.len(), 5);
        let expect = [0.5, 0.0, 0.0, 0.3, -0.15];
        for (a, b) in c.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let t = expand_ma(&[0.4], &[0.2], 4);
        let expect = [0.4, 0.0, 0.0, 0.2, 0.08];
        for (a, b) in t.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn known_stationarity() {
        assert!(is_stationary(&[0.5]));
        assert!(!is_stationary(&[1.0]));
        assert!(!is_stationary(&[1.2, -0.1]));
        assert!(is_stationary(&[1.2, -0.5]));
        assert!(is_invertible(&[0.9]));
        assert!(!is_invertible(&[-1.1]));
    }

    #[test]
    fn psi_of_ar1() {
        let psi = psi_weights(&[0.5], &[], 5);
        assert_eq!(psi, vec![1.0, 0.5, 0.25, 0.125, 0.0625]);
        let rw = psi_weights(&[1.0], &[], 4);
        assert_eq!(rw, vec![1.0; 4]);
        let ma = psi_weights(&[], &[0.4], 3);
        assert_eq!(ma, vec![1.0, 0.4, 0.0]);
    }

    proptest! {
        #[test]
        fn transform_roundtrip(u in proptest::collection::vec(-3f64..3.0, 0..6)) {
            let ar = constrain_ar(&u);
            prop_assert!(is_stationary(&ar));
            let back = unconstrain_ar(&ar).unwrap();
            for (a, b) in u.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-6);
            }
            let ma = constrain_ma(&u);
            prop_assert!(is_invertible(&ma));
        }

        #[test]
        fn constrained_ar_roots_outside_unit_circle(u in proptest::collection::vec(-3f64..3.0, 1..5)) {
            // Oracle: companion-matrix eigenvalues are the inverse roots.
            let ar = constrain_ar(&u);
            let k = ar.len();
            let companion = nalgebra::DMatrix::from_fn(k, k, |i, j| if i == 0 { ar[j] } else if i == j + 1 { 1.0 } else { 0.0 });
            let largest = companion.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(largest < 1.0 + 1e-9, "{largest}");
        }
    }
}
