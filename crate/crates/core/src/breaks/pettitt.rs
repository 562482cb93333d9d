use super::{require_len, BreakError, BreakResult, BreakTest};
use crate::ts::MonthlySeries;

/// Midranks (1-based), ties sharing the average of their positions.
fn midranks(y: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut ranks = vec![0.0; y.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && y[order[j + 1]] == y[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// `U_t = Σ_{i<t} Σ_{j≥t} sgn(y_i - y_j)` for `t = 1..n-1`, computed from
/// midranks as `2 Σ_{i<t} r_i - t (n + 1)`.
pub fn pettitt_statistics(y: &[f64]) -> Vec<f64> {
    let n = y.len() as f64;
    let ranks = midranks(y);
    let mut partial = 0.0;
    ranks
        .iter()
        .take(y.len().saturating_sub(1))
        .enumerate()
        .map(|(i, r)| {
            partial += r;
            2.0 * partial - (i + 1) as f64 * (n + 1.0)
        })
        .collect()
}

/// Rank change-point test. `K = max |U_t|` with approximate p-value
/// `2 exp(-6K² / (n³ + n²))`, capped at 1.
pub fn pettitt_test(series: &MonthlySeries) -> Result<BreakResult, BreakError> {
    require_len("Pettitt", series, 10)?;
    let u = pettitt_statistics(&series.values);
    let mut best = (0.0, 0);
    for (i, v) in u.iter().enumerate() {
        if v.abs() > best.0 {
            best = (v.abs(), i + 1);
        }
    }
    let n = series.len() as f64;
    let k = best.0;
    let p = (2.0 * (-6.0 * k * k / (n.powi(3) + n * n)).exp()).min(1.0);
    let reject = p < 0.05;
    let breaks = if reject { vec![best.1] } else { vec![] };
    Ok(BreakResult::new(BreakTest::Pettitt, series, k, breaks, reject).with_p_value(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::YearMonth;

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn constant_series() {
        let s = MonthlySeries::monthly(YearMonth::new(2019, 1).unwrap(), vec![4.0; 24]).unwrap();
        let r = pettitt_test(&s).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, Some(1.0));
        assert!(!r.reject && r.break_dates.is_empty());
    }

    #[test]
    fn ramp_breaks_at_midpoint() {
        let s = MonthlySeries::monthly(YearMonth::new(2019, 1).unwrap(), (0..40).map(f64::from).collect()).unwrap();
        let r = pettitt_test(&s).unwrap();
        // |U_t| = t (n - t) peaks at t = n/2.
        assert_eq!(r.statistic, 400.0);
        assert_eq!(r.break_indices, vec![20]);
    }
}
