use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::calendar::{MonthWindow, YearMonth};

use super::TsError;

/// Equally spaced monthly observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries {
    pub start: YearMonth,
    pub values: Vec<f64>,
    /// Periods per season.
    pub period: usize,
}

impl MonthlySeries {
    pub fn new(start: YearMonth, values: Vec<f64>, period: usize) -> Result<Self, TsError> {
        if values.is_empty() {
            return Err(TsError::TooShort { needed: 1, got: 0 });
        }
        if period == 0 {
            return Err(TsError::InvalidSpec("seasonal period must be at least 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TsError::MissingValues);
        }
        Ok(Self { start, values, period })
    }

    /// Monthly series with a 12-month season.
    pub fn monthly(start: YearMonth, values: Vec<f64>) -> Result<Self, TsError> {
        Self::new(start, values, 12)
    }

    /// Drops leading and trailing non-finite values. Interior gaps are an error.
    pub fn trimmed(start: YearMonth, values: &[f64], period: usize) -> Result<Self, TsError> {
        let first = values.iter().position(|v| v.is_finite());
        let last = values.iter().rposition(|v| v.is_finite());
        match (first, last) {
            (Some(a), Some(b)) => Self::new(start.add_months(a as i64), values[a..=b].to_vec(), period),
            _ => Err(TsError::TooShort { needed: 1, got: 0 }),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end(&self) -> YearMonth {
        self.start.add_months(self.values.len() as i64 - 1)
    }

    pub fn month_at(&self, i: usize) -> YearMonth {
        self.start.add_months(i as i64)
    }

    pub fn months(&self) -> impl Iterator<Item = YearMonth> + '_ {
        (0..self.values.len()).map(|i| self.month_at(i))
    }

    pub fn get(&self, month: YearMonth) -> Option<f64> {
        let i = month.months_since(self.start);
        (i >= 0).then(|| self.values.get(i as usize).copied()).flatten()
    }

    /// The part of the series inside `window`; errors unless fully covered.
    pub fn window(&self, window: MonthWindow) -> Result<Self, TsError> {
        let a = window.start.months_since(self.start);
        let b = window.end.months_since(self.start);
        if a < 0 || b >= self.values.len() as i64 {
            return Err(TsError::NotCovered {
                window: window.to_string(),
                start: self.start,
                end: self.end(),
            });
        }
        Self::new(window.start, self.values[a as usize..=b as usize].to_vec(), self.period)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Reads `month,value` rows; a header row is optional.
    pub fn read_csv<R: Read>(reader: R, period: usize) -> Result<Self, TsError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut rows: Vec<(YearMonth, f64)> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| TsError::Parse(e.to_string()))?;
            let (Some(m), Some(v)) = (rec.get(0), rec.get(1)) else {
                return Err(TsError::Parse(format!("row {}: expected month,value", i + 1)));
            };
            let month: YearMonth = match m.parse() {
                Ok(ym) => ym,
                Err(_) if i == 0 => continue,
                Err(e) => return Err(TsError::Parse(format!("row {}: {e}", i + 1))),
            };
            let value = if v.is_empty() || v.eq_ignore_ascii_case("na") {
                f64::NAN
            } else {
                v.parse().map_err(|_| TsError::Parse(format!("row {}: bad value {v:?}", i + 1)))?
            };
            rows.push((month, value));
        }
        let Some(&(start, _)) = rows.first() else {
            return Err(TsError::TooShort { needed: 1, got: 0 });
        };
        for (k, (m, _)) in rows.iter().enumerate() {
            if *m != start.add_months(k as i64) {
                return Err(TsError::Parse(format!("month {m} breaks the monthly sequence")));
            }
        }
        let values: Vec<f64> = rows.into_iter().map(|(_, v)| v).collect();
        Self::trimmed(start, &values, period)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TsError> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| TsError::Parse(e.to_string());
        w.write_record(["month", "value"]).map_err(io)?;
        for (m, v) in self.months().zip(&self.values) {
            w.write_record([m.to_string(), v.to_string()]).map_err(io)?;
        }
        w.flush().map_err(|e| TsError::Parse(e.to_string()))?;
        Ok(())
    }
}

/// Applies `(1 - B^m)^D` then `(1 - B)^d`.
pub fn difference(values: &[f64], d: usize, seasonal_d: usize, m: usize) -> Result<Vec<f64>, TsError> {
    let needed = d + seasonal_d * m + 1;
    if values.len() < needed {
        return Err(TsError::TooShort {
            needed,
            got: values.len(),
        });
    }
    let mut out = values.to_vec();
    for _ in 0..seasonal_d {
        out = out.windows(m + 1).map(|w| w[m] - w[0]).collect();
    }
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Coefficients `δ_1..δ_k` with `(1 - B)^d (1 - B^m)^D = 1 - Σ δ_j B^j`.
pub fn integration_coefficients(d: usize, seasonal_d: usize, m: usize) -> Vec<f64> {
    let mut poly = vec![1.0];
    for _ in 0..d {
        poly = super::poly::mul(&poly, &[1.0, -1.0]);
    }
    for _ in 0..seasonal_d {
        let mut s = vec![0.0; m + 1];
        s[0] = 1.0;
        s[m] = -1.0;
        poly = super::poly::mul(&poly, &s);
    }
    poly[1..].iter().map(|c| -c).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn differencing_examples() {
        assert_eq!(difference(&[1.0, 2.0, 3.0, 4.0], 1, 0, 12).unwrap(), vec![1.0, 1.0, 1.0]);
        let season: Vec<f64> = (0..12).map(|i| (i * i) as f64).collect();
        let twice: Vec<f64> = season.iter().chain(&season).copied().collect();
        assert_eq!(difference(&twice, 0, 1, 12).unwrap(), vec![0.0; 12]);
        assert_eq!(difference(&twice, 0, 0, 12).unwrap(), twice);
        assert!(difference(&[1.0; 12], 0, 1, 12).is_err());
        assert_eq!(difference(&twice, 1, 1, 12).unwrap().len(), 11);
    }

    #[test]
    fn integration_inverts_differencing() {
        let y: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 + 0.5 * i as f64).collect();
        let (d, sd, m) = (1, 1, 4);
        let w = difference(&y, d, sd, m).unwrap();
        let delta = integration_coefficients(d, sd, m);
        let k = delta.len();
        let mut rebuilt = y[..k].to_vec();
        for (t, wt) in w.iter().enumerate() {
            let t = t + k;
            let v = wt + delta.iter().enumerate().map(|(j, c)| c * rebuilt[t - 1 - j]).sum::<f64>();
            rebuilt.push(v);
        }
        for (a, b) in rebuilt.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_roundtrip_and_trim() {
        let text = "month,value\n2020-01,\n2020-02,3\n2020-03,4.5\n2020-04,NA\n";
        let s = MonthlySeries::read_csv(text.as_bytes(), 12).unwrap();
        assert_eq!(s.start, "2020-02".parse().unwrap());
        assert_eq!(s.values, vec![3.0, 4.5]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(MonthlySeries::read_csv(buf.as_slice(), 12).unwrap(), s);
        let gap = "2020-01,1\n2020-02,\n2020-03,2\n";
        assert!(matches!(MonthlySeries::read_csv(gap.as_bytes(), 12), Err(TsError::MissingValues)));
        let skip = "2020-01,1\n2020-03,2\n";
        assert!(MonthlySeries::read_csv(skip.as_bytes(), 12).is_err());
    }

    #[test]
    fn windowing() {
        let s = MonthlySeries::monthly("2020-01".parse().unwrap(), (0..12).map(f64::from).collect()).unwrap();
        let w = s.window("2020-03:2020-05".parse().unwrap()).unwrap();
        assert_eq!(w.values, vec![2.0, 3.0, 4.0]);
        assert!(s.window("2019-12:2020-05".parse().unwrap()).is_err());
        assert_eq!(s.get("2020-12".parse().unwrap()), Some(11.0));
        assert_eq!(s.get("2021-01".parse().unwrap()), None);
    }

    proptest! {
        #[test]
        fn differencing_is_linear(y in proptest::collection::vec(-1e3f64..1e3, 30..60), a in -10f64..10.0, d in 0usize..2, sd in 0usize..2) {
            let scaled: Vec<f64> = y.iter().map(|v| a * v).collect();
            let lhs = difference(&scaled, d, sd, 12).unwrap();
            let rhs: Vec<f64> = difference(&y, d, sd, 12).unwrap().iter().map(|v| a * v).collect();
            for (l, r) in lhs.iter().zip(&rhs) {
                prop_assert!((l - r).abs() <= 1e-9 * (1.0 + r.abs()));
            }
        }
    }
}
