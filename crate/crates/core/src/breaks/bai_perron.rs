use serde::{Deserialize, Serialize};

use super::{centred, BreakError, BreakResult, BreakTest};
use crate::ts::MonthlySeries;

/// Segmentations for each number of breaks, with their fit and criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaiPerronFit {
    /// Minimum segment length in observations.
    pub min_length: usize,
    /// `breaks[m]` is the SSR-optimal set of `m` break indices.
    pub breaks: Vec<Vec<usize>>,
    pub ssr: Vec<f64>,
    pub bic: Vec<f64>,
    pub selected: usize,
}

/// Within-segment SSR for every segment `[i, j)` of length at least `h`,
/// stored as `cost[i][j - i - h]`.
struct Costs {
    h: usize,
    cost: Vec<Vec<f64>>,
}

impl Costs {
    fn new(y: &[f64], h: usize) -> Self {
        let n = y.len();
        let cost = (0..n)
            .map(|i| {
                let mut row = Vec::with_capacity((n - i + 1).saturating_sub(h));
                let (mut mean, mut m2) = (0.0, 0.0);
                for (k, &v) in y[i..].iter().enumerate() {
                    let delta = v - mean;
                    mean += delta / (k + 1) as f64;
                    m2 += delta * (v - mean);
                    if k + 1 >= h {
                        row.push(m2);
                    }
                }
                row
            })
            .collect();
        Costs { h, cost }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.cost[i][j - i - self.h]
    }
}

/// Global SSR minimiser over segmentations of `y` into `breaks + 1` mean
/// segments of at least `h` observations. `None` when infeasible.
pub fn optimal_segmentation(y: &[f64], breaks: usize, h: usize) -> Option<(Vec<usize>, f64)> {
    let h = h.max(1);
    if (breaks + 1) * h > y.len() {
        return None;
    }
    let costs = Costs::new(&centred(y), h);
    let table = dp(&costs, y.len(), breaks);
    Some(backtrack(&table, breaks, y.len()))
}

/// `table[m][j]`: best SSR of `y[..j]` with `m` breaks, and the start of
/// the last segment.
type Table = Vec<Vec<(f64, usize)>>;

fn dp(costs: &Costs, n: usize, max_breaks: usize) -> Table {
    let h = costs.h;
    let mut table: Table = Vec::with_capacity(max_breaks + 1);
    table.push((0..=n).map(|j| if j >= h { (costs.get(0, j), 0) } else { (f64::INFINITY, 0) }).collect());
    for m in 1..=max_breaks {
        let prev = &table[m - 1];
        let row = (0..=n)
            .map(|j| {
                let mut best = (f64::INFINITY, 0);
                if j >= (m + 1) * h {
                    for i in m * h..=j - h {
                        let v = prev[i].0 + costs.get(i, j);
                        if v < best.0 {
                            best = (v, i);
                        }
                    }
                }
                best
            })
            .collect();
        table.push(row);
    }
    table
}

fn backtrack(table: &Table, breaks: usize, n: usize) -> (Vec<usize>, f64) {
    let ssr = table[breaks][n].0;
    let mut out = Vec::with_capacity(breaks);
    let mut j = n;
    for m in (1..=breaks).rev() {
        j = table[m][j].1;
        out.push(j);
    }
    out.reverse();
    (out, ssr)
}

impl BaiPerronFit {
    /// Segmentations for `0..=max_breaks` breaks (clipped to what `h` allows)
    /// and the BIC-selected count, `n ln(SSR/n) + (2m + 1) ln n`.
    pub fn new(y: &[f64], max_breaks: usize, h: usize) -> Self {
        let n = y.len();
        let h = h.max(1);
        let feasible = (n / h).saturating_sub(1);
        let max_breaks = max_breaks.min(feasible);
        let costs = Costs::new(&centred(y), h);
        let table = dp(&costs, n, max_breaks);
        let (breaks, ssr): (Vec<_>, Vec<_>) = (0..=max_breaks).map(|m| backtrack(&table, m, n)).unzip();
        let nf = n as f64;
        // Floor keeps a perfect fit finite and makes a constant series tie at every m.
        let floor = 1e-14 * ssr[0] / nf + f64::MIN_POSITIVE;
        let bic: Vec<f64> = ssr
            .iter()
            .enumerate()
            .map(|(m, s)| nf * (s / nf).max(floor).ln() + (2 * m + 1) as f64 * nf.ln())
            .collect();
        let mut selected = 0;
        for (m, b) in bic.iter().enumerate() {
            if *b < bic[selected] {
                selected = m;
            }
        }
        BaiPerronFit {
            min_length: h,
            breaks,
            ssr,
            bic,
            selected,
        }
    }
}

/// Multiple mean-shift breaks with the count chosen by BIC. `min_segment`
/// is the minimum segment length as a fraction of the sample.
pub fn bai_perron(series: &MonthlySeries, max_breaks: usize, min_segment: f64) -> Result<BreakResult, BreakError> {
    let n = series.len();
    if !(min_segment > 0.0 && min_segment <= 0.5) {
        return Err(BreakError::InvalidArgument(format!("minimum segment fraction {min_segment} not in (0, 0.5]")));
    }
    let h = (n as f64 * min_segment).floor() as usize;
    if h < 3 {
        return Err(BreakError::TooShort {
            test: "Bai-Perron",
            needed: (3.0 / min_segment).ceil() as usize,
            got: n,
        });
    }
    let fit = BaiPerronFit::new(&series.values, max_breaks, h);
    let allowed = fit.breaks.len() - 1;
    let improvement = fit.bic[0] - fit.bic[fit.selected];
    let breaks = fit.breaks[fit.selected].clone();
    let reject = !breaks.is_empty();
    let mut result = BreakResult::new(BreakTest::BaiPerron, series, improvement, breaks, reject);
    result = result.with_note(if allowed < max_breaks {
        format!("BIC selected {} of at most {allowed} breaks (requested {max_breaks}, clipped)", fit.selected)
    } else {
        format!("BIC selected {} of at most {allowed} breaks", fit.selected)
    });
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::YearMonth;

    fn series(values: Vec<f64>) -> MonthlySeries {
        MonthlySeries::monthly(YearMonth::new(2015, 1).unwrap(), values).unwrap()
    }

    #[test]
    fn costs_match_direct_ssr() {
        let y = [1.0, 4.0, 2.0, 8.0, 5.0, 7.0];
        let c = Costs::new(&y, 2);
        let direct = |s: &[f64]| {
            let m = s.iter().sum::<f64>() / s.len() as f64;
            s.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        };
        for i in 0..y.len() {
            for j in i + 2..=y.len() {
                assert!((c.get(i, j) - direct(&y[i..j])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_series_has_no_breaks() {
        let r = bai_perron(&series(vec![3.0; 40]), 3, 0.15).unwrap();
        assert!(r.break_dates.is_empty() && !r.reject);
    }

    #[test]
    fn clean_steps_are_recovered() {
        let y: Vec<f64> = (0..30).map(|t| [0.0, 5.0, 1.0][t / 10]).collect();
        let r = bai_perron(&series(y), 3, 0.1).unwrap();
        assert_eq!(r.break_indices, vec![10, 20]);
    }

    #[test]
    fn requested_breaks_are_clipped() {
        let y: Vec<f64> = (0..20).map(|t| (t % 3) as f64).collect();
        let r = bai_perron(&series(y), 10, 0.25).unwrap();
        assert!(r.note.unwrap().contains("clipped"));
        assert!(bai_perron(&series(vec![1.0; 20]), 2, 0.1).is_err());
        assert!(bai_perron(&series(vec![1.0; 20]), 2, 0.0).is_err());
    }

    #[test]
    fn infeasible_segmentation() {
        assert!(optimal_segmentation(&[1.0; 10], 3, 3).is_none());
        let (b, s) = optimal_segmentation(&[1.0, 1.0, 1.0, 9.0, 9.0, 9.0], 1, 2).unwrap();
        assert_eq!((b, s), (vec![3], 0.0));
    }
}
