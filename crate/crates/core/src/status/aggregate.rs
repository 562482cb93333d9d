use std::collections::BTreeMap;
use std::io;

use rayon::prelude::*;

use crate::calendar::YearMonth;

use super::{EventKind, FirmEvent, FirmTimeline};

/// Per-month counts for one stratum. Merging tallies is associative and
/// commutative, so shards can be aggregated in any grouping.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventTally {
    /// Active firms in the first month, before that month's events.
    pub initial_active: u64,
    pub opened: Vec<u64>,
    pub closed: Vec<u64>,
    pub reopened: Vec<u64>,
    pub no_change: Vec<u64>,
}

impl EventTally {
    pub fn zeros(n_months: usize) -> Self {
        Self {
            initial_active: 0,
            opened: vec![0; n_months],
            closed: vec![0; n_months],
            reopened: vec![0; n_months],
            no_change: vec![0; n_months],
        }
    }

    pub fn merge(mut self, other: &EventTally) -> Self {
        self.initial_active += other.initial_active;
        for (a, b) in [
            (&mut self.opened, &other.opened),
            (&mut self.closed, &other.closed),
            (&mut self.reopened, &other.reopened),
            (&mut self.no_change, &other.no_change),
        ] {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self
    }

    fn add_timeline(&mut self, t: &FirmTimeline, start: YearMonth) {
        // Active before the first month's events: pre-existing firms active in
        // month 0 that did not open there.
        if t.first_month == start
            && t.statuses.first().is_some_and(|s| s.is_active())
            && !t.events.iter().any(|e| e.month == start && e.kind == EventKind::Opened)
        {
            self.initial_active += 1;
        }
        for e in &t.events {
            self.add_event(e, start);
        }
    }

    fn add_event(&mut self, e: &FirmEvent, start: YearMonth) {
        let off = e.month.months_since(start);
        if off < 0 || off as usize >= self.opened.len() {
            return;
        }
        let i = off as usize;
        match e.kind {
            EventKind::Opened => self.opened[i] += 1,
            EventKind::Closed => self.closed[i] += 1,
            EventKind::Reopened => self.reopened[i] += 1,
            EventKind::NoChange => self.no_change[i] += 1,
        }
    }
}

/// Monthly event counts for one stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSeries {
    pub stratum: String,
    pub start: YearMonth,
    pub opened: Vec<u64>,
    pub closed: Vec<u64>,
    pub reopened: Vec<u64>,
    pub no_change: Vec<u64>,
    /// `net_active[t] = net_active[t-1] + opened[t] + reopened[t] - closed[t]`.
    pub net_active: Vec<i64>,
}

impl EventSeries {
    fn from_tally(stratum: String, start: YearMonth, t: EventTally) -> Self {
        let mut level = t.initial_active as i64;
        let net_active = (0..t.opened.len())
            .map(|i| {
                level += t.opened[i] as i64 + t.reopened[i] as i64 - t.closed[i] as i64;
                level
            })
            .collect();
        Self {
            stratum,
            start,
            opened: t.opened,
            closed: t.closed,
            reopened: t.reopened,
            no_change: t.no_change,
            net_active,
        }
    }

    pub fn len(&self) -> usize {
        self.opened.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opened.is_empty()
    }

    pub fn months(&self) -> impl Iterator<Item = YearMonth> + '_ {
        (0..self.len() as i64).map(|i| self.start.add_months(i))
    }

    /// Opened + reopened - closed per month.
    pub fn net_change(&self) -> Vec<i64> {
        (0..self.len())
            .map(|i| self.opened[i] as i64 + self.reopened[i] as i64 - self.closed[i] as i64)
            .collect()
    }
}

/// Aggregates timelines into per-stratum monthly series over `n_months`
/// starting at `start`. Firms the stratifier cannot place fall under
/// `"UNKNOWN"` when it returns `None`.
pub fn aggregate_events<F>(
    timelines: &[FirmTimeline],
    start: YearMonth,
    n_months: usize,
    stratifier: F,
) -> Vec<EventSeries>
where
    F: Fn(&FirmTimeline) -> Option<String> + Sync,
{
    let tallies: BTreeMap<String, EventTally> = timelines
        .par_iter()
        .fold(BTreeMap::new, |mut acc: BTreeMap<String, EventTally>, t| {
            let key = stratifier(t).unwrap_or_else(|| "UNKNOWN".to_string());
            acc.entry(key)
                .or_insert_with(|| EventTally::zeros(n_months))
                .add_timeline(t, start);
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                let merged = match a.remove(&k) {
                    Some(x) => x.merge(&v),
                    None => v,
                };
                a.insert(k, merged);
            }
            a
        });
    tallies
        .into_iter()
        .map(|(k, t)| EventSeries::from_tally(k, start, t))
        .collect()
}

/// `company_id,month,event,reason_flag`
pub fn write_events<W: io::Write>(out: W, events: &[FirmEvent]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["company_id", "month", "event", "reason_flag"])?;
    for e in events {
        let flag = if e.inferred_dissolution {
            "inferred_dissolution"
        } else {
            ""
        };
        w.write_record([e.company_id.as_str(), &e.month.to_string(), e.kind.as_str(), flag])?;
    }
    w.flush()?;
    Ok(())
}

/// `month,opened,closed,reopened,net_active,no_change`
pub fn write_series<W: io::Write>(out: W, s: &EventSeries) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["month", "opened", "closed", "reopened", "net_active", "no_change"])?;
    for (i, m) in s.months().enumerate() {
        w.write_record([
            m.to_string(),
            s.opened[i].to_string(),
            s.closed[i].to_string(),
            s.reopened[i].to_string(),
            s.net_active[i].to_string(),
            s.no_change[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::CompanySnapshotRecord;
    use crate::status::build_timelines;

    fn ym(s: &str) -> YearMonth {
        s.parse().unwrap()
    }

    fn rec(id: &str, month: YearMonth) -> CompanySnapshotRecord {
        CompanySnapshotRecord {
            company_id: id.into(),
            name: String::new(),
            status: "Active".into(),
            incorporation_date: None,
            dissolution_date: None,
            sic_codes: vec![],
            postcode: None,
            snapshot_month: month,
        }
    }

    #[test]
    fn strata_sum_to_unstratified() {
        let months = [ym("2020-01"), ym("2020-02")];
        let snaps = vec![
            vec![],
            vec![rec("a1", months[1]), rec("a2", months[1]), rec("b1", months[1])],
        ];
        let b = build_timelines(&months, &snaps, None);
        let all = aggregate_events(&b.timelines, months[0], 2, |_| Some("all".into()));
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].opened, vec![0, 3]);
        let split = aggregate_events(&b.timelines, months[0], 2, |t| {
            Some(t.company_id[..1].to_string())
        });
        assert_eq!(split.len(), 2);
        assert_eq!(split[0].opened[1], 2);
        assert_eq!(split[1].opened[1], 1);
        let total: u64 = split.iter().map(|s| s.opened[1]).sum();
        assert_eq!(total, 3);
        assert_eq!(all[0].net_active, vec![0, 3]);
    }

    #[test]
    fn unknown_stratum_fallback() {
        let months = [ym("2020-01")];
        let b = build_timelines(&months, &[vec![rec("x", months[0])]], None);
        let s = aggregate_events(&b.timelines, months[0], 1, |_| None);
        assert_eq!(s[0].stratum, "UNKNOWN");
        assert_eq!(s[0].net_active, vec![1]);
    }
}
