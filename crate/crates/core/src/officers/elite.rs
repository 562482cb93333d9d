use std::fmt;

use serde::{Deserialize, Serialize};

use crate::calendar::{MonthWindow, YearMonth};

use super::identity::ResolvedPerson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OfficerHistory {
    FirstTime,
    AlreadyOfficer,
}

/// First-time iff the person held no appointment in any month before
/// `event_month`. Appointments starting in `event_month` itself, including
/// the triggering one, do not count.
pub fn classify_first_time(person: &ResolvedPerson, event_month: YearMonth) -> OfficerHistory {
    if person.prior_firm_count(event_month) == 0 {
        OfficerHistory::FirstTime
    } else {
        OfficerHistory::AlreadyOfficer
    }
}

/// Whether the person held officerships in at least `min_firms` distinct
/// firms by the end of `as_of`.
pub fn is_corporate_elite(person: &ResolvedPerson, as_of: YearMonth, min_firms: usize) -> bool {
    person.prior_firm_count(as_of.succ()) >= min_firms
}

/// Prior-firm bucket: 1..=9, or 10 meaning "10+".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FirmBucket(u8);

impl FirmBucket {
    pub const ALL: [FirmBucket; 10] = [
        FirmBucket(1),
        FirmBucket(2),
        FirmBucket(3),
        FirmBucket(4),
        FirmBucket(5),
        FirmBucket(6),
        FirmBucket(7),
        FirmBucket(8),
        FirmBucket(9),
        FirmBucket(10),
    ];

    pub fn of_count(n: usize) -> Option<Self> {
        match n {
            0 => None,
            1..=9 => Some(FirmBucket(n as u8)),
            _ => Some(FirmBucket(10)),
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for FirmBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            1 => f.write_str("1 Firm"),
            10 => f.write_str("10+ Firms"),
            n => write!(f, "{n} Firms"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliteTableRow {
    pub bucket: FirmBucket,
    pub pre_pandemic_total: u64,
    pub created_during: u64,
    /// `created_during / pre_pandemic_total`; can exceed 1 in the top bucket.
    pub creation_ratio: f64,
}

impl EliteTableRow {
    pub fn new(bucket: FirmBucket, pre_pandemic_total: u64, created_during: u64) -> Self {
        let creation_ratio = if pre_pandemic_total == 0 {
            0.0
        } else {
            created_during as f64 / pre_pandemic_total as f64
        };
        Self {
            bucket,
            pre_pandemic_total,
            created_during,
            creation_ratio,
        }
    }

    /// Ratio as a percentage rounded to one decimal.
    pub fn creation_percent(&self) -> f64 {
        (self.creation_ratio * 1000.0).round() / 10.0
    }
}

/// Creation probabilities by prior-firm count.
///
/// Persons are bucketed by the distinct firms they held by the end of
/// `cutoff`. `created_during` counts their appointments that start inside
/// `window` at firms for which `is_new_firm` holds.
pub fn elite_table<F>(persons: &[ResolvedPerson], cutoff: YearMonth, window: MonthWindow, is_new_firm: F) -> Vec<EliteTableRow>
where
    F: Fn(&str) -> bool,
{
    assert!(cutoff < window.start, "cutoff must precede the creation window");
    let mut totals = [0u64; 10];
    let mut created = [0u64; 10];
    for p in persons {
        let Some(bucket) = FirmBucket::of_count(p.prior_firm_count(cutoff.succ())) else {
            continue;
        };
        totals[bucket.index()] += 1;
        created[bucket.index()] += p
            .appointments
            .iter()
            .filter(|a| window.contains(a.appointed) && is_new_firm(&a.company_id))
            .count() as u64;
    }
    FirmBucket::ALL
        .iter()
        .map(|b| EliteTableRow::new(*b, totals[b.index()], created[b.index()]))
        .collect()
}

/// Shares of persons that are elite at each threshold, for sensitivity sweeps.
pub fn elite_share_sweep(persons: &[ResolvedPerson], as_of: YearMonth, thresholds: &[usize]) -> Vec<(usize, f64)> {
    thresholds
        .iter()
        .map(|&k| {
            let n = persons.iter().filter(|p| is_corporate_elite(p, as_of, k)).count();
            let share = if persons.is_empty() { 0.0 } else { n as f64 / persons.len() as f64 };
            (k, share)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::officers::identity::{Appointment, MatchProvenance, PersonKey};
    use crate::officers::{Gender, Region};
    use std::collections::BTreeSet;

    fn ym(s: &str) -> YearMonth {
        s.parse().unwrap()
    }

    fn person(appts: &[(&str, &str)]) -> ResolvedPerson {
        ResolvedPerson {
            person_id: "P".into(),
            key: PersonKey {
                first_forename: "A".into(),
                surname: "B".into(),
                birth_month: Some(ym("1980-01")),
            },
            name_variants: BTreeSet::new(),
            appointments: appts
                .iter()
                .map(|(c, m)| Appointment {
                    company_id: c.to_string(),
                    appointed: ym(m),
                    resigned: None,
                })
                .collect(),
            gender: Gender::Unresolved,
            region: Region::Excluded,
            provenance: MatchProvenance::Exact,
            ambiguous: false,
            postcode: None,
        }
    }

    #[test]
    fn first_time_rules() {
        let only = person(&[("N1", "2020-05")]);
        assert_eq!(classify_first_time(&only, ym("2020-05")), OfficerHistory::FirstTime);
        let old_hand = person(&[("O1", "2010-03"), ("N1", "2020-05")]);
        assert_eq!(classify_first_time(&old_hand, ym("2020-05")), OfficerHistory::AlreadyOfficer);
    }

    #[test]
    fn synthetic_thirty_percent() {
        let mut ps = Vec::new();
        for i in 0..10 {
            let mut appts = vec![(format!("OLD{i}"), "2015-01".to_string())];
            if i < 3 {
                appts.push((format!("NEW{i}"), "2020-06".to_string()));
            }
            let refs: Vec<(&str, &str)> = appts.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            ps.push(person(&refs));
        }
        let w: MonthWindow = "2020-03:2021-06".parse().unwrap();
        let rows = elite_table(&ps, ym("2020-02"), w, |c| c.starts_with("NEW"));
        assert_eq!(rows[0].pre_pandemic_total, 10);
        assert_eq!(rows[0].created_during, 3);
        assert_eq!(rows[0].creation_percent(), 30.0);
        let total: u64 = rows.iter().map(|r| r.pre_pandemic_total).sum();
        assert_eq!(total, 10);
    }

    #[test]
    fn cutoff_month_counts_toward_bucket() {
        let p = person(&[("A", "2020-02"), ("B", "2019-01")]);
        let w: MonthWindow = "2020-03:2021-06".parse().unwrap();
        let rows = elite_table(&[p], ym("2020-02"), w, |_| true);
        assert_eq!(rows[1].pre_pandemic_total, 1);
    }

    #[test]
    fn bucket_labels() {
        assert_eq!(FirmBucket::of_count(0), None);
        assert_eq!(FirmBucket::of_count(1).unwrap().to_string(), "1 Firm");
        assert_eq!(FirmBucket::of_count(37).unwrap().to_string(), "10+ Firms");
    }

    #[test]
    fn elite_threshold_sweep() {
        let ps = vec![
            person(&[("A", "2015-01")]),
            person(&[("A", "2015-01"), ("B", "2016-01")]),
            person(&[("A", "2015-01"), ("B", "2016-01"), ("C", "2017-01")]),
        ];
        let s = elite_share_sweep(&ps, ym("2020-02"), &[2, 3, 4]);
        assert_eq!(s, vec![(2, 2.0 / 3.0), (3, 1.0 / 3.0), (4, 0.0)]);
    }
}
