use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::calendar::{MonthWindow, YearMonth};

use super::identity::ResolvedPerson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Period {
    PreCovid,
    DuringCovid,
}

impl Period {
    pub const ALL: [Period; 2] = [Period::PreCovid, Period::DuringCovid];

    pub fn window(self) -> MonthWindow {
        let (a, b) = match self {
            Period::PreCovid => ((2019, 8), (2020, 2)),
            Period::DuringCovid => ((2020, 3), (2021, 6)),
        };
        MonthWindow {
            start: YearMonth::new(a.0, a.1).unwrap(),
            end: YearMonth::new(b.0, b.1).unwrap(),
        }
    }

    pub fn of_month(month: YearMonth) -> Option<Period> {
        Period::ALL.into_iter().find(|p| p.window().contains(month))
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Period::PreCovid => "PreCovid",
            Period::DuringCovid => "DuringCovid",
        })
    }
}

/// Nearest-rank empirical quantile: the smallest value with at least a
/// fraction `q` of the sample at or below it.
pub fn nearest_rank_quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[rank - 1])
}

/// Caps values above the `q` nearest-rank quantile. Returns the threshold.
pub fn winsorise(values: &mut [f64], q: f64) -> Option<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cap = nearest_rank_quantile(&sorted, q)?;
    for v in values.iter_mut() {
        if *v > cap {
            *v = cap;
        }
    }
    Some(cap)
}

/// One officer of one new firm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperienceSample {
    pub section: String,
    pub month: YearMonth,
    pub prior_firms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperienceCell {
    pub section: String,
    pub period: Period,
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub winsor_cap: f64,
}

/// Samples for every appointment to a firm in `new_firms` (company id to
/// SIC section), with the officer's prior-firm count at appointment.
pub fn experience_samples(persons: &[ResolvedPerson], new_firms: &HashMap<String, String>) -> Vec<ExperienceSample> {
    let mut out = Vec::new();
    for p in persons {
        for a in &p.appointments {
            if let Some(section) = new_firms.get(&a.company_id) {
                out.push(ExperienceSample {
                    section: section.clone(),
                    month: a.appointed,
                    prior_firms: p.prior_firm_count(a.appointed),
                });
            }
        }
    }
    out
}

/// Winsorised mean prior-firm count per (section, period) with a 95%
/// normal-approximation interval. Cells with no samples are absent.
pub fn industry_experience(samples: &[ExperienceSample], quantile: f64) -> BTreeMap<(String, Period), ExperienceCell> {
    let mut groups: BTreeMap<(String, Period), Vec<f64>> = BTreeMap::new();
    for s in samples {
        if let Some(period) = Period::of_month(s.month) {
            groups
                .entry((s.section.clone(), period))
                .or_default()
                .push(s.prior_firms as f64);
        }
    }
    let z = Normal::standard().inverse_cdf(0.975);
    groups
        .into_iter()
        .map(|((section, period), mut values)| {
            let cap = winsorise(&mut values, quantile).expect("non-empty group");
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            let half = z * (var / n as f64).sqrt();
            let cell = ExperienceCell {
                section: section.clone(),
                period,
                n,
                mean,
                ci_low: mean - half,
                ci_high: mean + half,
                winsor_cap: cap,
            };
            ((section, period), cell)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ym(s: &str) -> YearMonth {
        s.parse().unwrap()
    }

    fn samples(values: &[usize], month: &str) -> Vec<ExperienceSample> {
        values
            .iter()
            .map(|&v| ExperienceSample {
                section: "C".into(),
                month: ym(month),
                prior_firms: v,
            })
            .collect()
    }

    #[test]
    fn constant_sample_zero_width() {
        let cells = industry_experience(&samples(&[2; 50], "2020-05"), 0.999);
        let c = &cells[&("C".to_string(), Period::DuringCovid)];
        assert_eq!(c.mean, 2.0);
        assert_eq!(c.ci_low, c.ci_high);
    }

    #[test]
    fn small_sample_winsorisation_inactive() {
        let cells = industry_experience(&samples(&[1, 1, 1, 1000], "2019-09"), 0.999);
        let c = &cells[&("C".to_string(), Period::PreCovid)];
        assert_eq!(c.mean, 250.75);
        assert_eq!(c.winsor_cap, 1000.0);
    }

    #[test]
    fn brute_force_thousand() {
        let mut v = vec![1usize; 999];
        v.push(1_000_000);
        let raw: f64 = v.iter().map(|&x| x as f64).sum::<f64>() / 1000.0;
        // Brute force: smallest value whose empirical CDF reaches 0.999.
        let mut sorted: Vec<f64> = v.iter().map(|&x| x as f64).collect();
        sorted.sort_by(f64::total_cmp);
        let cap = sorted
            .iter()
            .copied()
            .find(|&t| sorted.iter().filter(|&&x| x <= t).count() as f64 / 1000.0 >= 0.999)
            .unwrap();
        let expected: f64 = sorted.iter().map(|&x| x.min(cap)).sum::<f64>() / 1000.0;
        let cells = industry_experience(&samples(&v, "2020-03"), 0.999);
        let c = &cells[&("C".to_string(), Period::DuringCovid)];
        assert_eq!(c.mean, expected);
        assert_eq!(c.mean, 1.0);
        assert!(raw > 1000.0);
    }

    #[test]
    fn empty_cells_absent_and_out_of_period_ignored() {
        let cells = industry_experience(&samples(&[3], "2018-01"), 0.999);
        assert!(cells.is_empty());
    }

    #[test]
    fn period_bounds() {
        assert_eq!(Period::of_month(ym("2019-08")), Some(Period::PreCovid));
        assert_eq!(Period::of_month(ym("2020-02")), Some(Period::PreCovid));
        assert_eq!(Period::of_month(ym("2020-03")), Some(Period::DuringCovid));
        assert_eq!(Period::of_month(ym("2021-07")), None);
    }
}
