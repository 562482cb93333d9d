use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::calendar::YearMonth;
use crate::ingest::{CompanySnapshotRecord, RejectedRow, SicCode};

use super::{classify_month, FirmEvent, FirmStatusClass};

/// Static attributes of a firm, taken from its latest snapshot row.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FirmProfile {
    pub name: String,
    pub sic_codes: Vec<SicCode>,
    pub postcode: Option<String>,
}

impl FirmProfile {
    /// Section letter of the first SIC code.
    pub fn sic_section(&self) -> Option<char> {
        self.sic_codes.first().and_then(SicCode::section)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirmTimeline {
    pub company_id: String,
    /// Month of first appearance.
    pub first_month: YearMonth,
    /// One status per month from `first_month` to the archive's last month.
    pub statuses: Vec<FirmStatusClass>,
    pub events: Vec<FirmEvent>,
    pub profile: FirmProfile,
}

impl FirmTimeline {
    pub fn status_at(&self, month: YearMonth) -> FirmStatusClass {
        let off = month.months_since(self.first_month);
        if off < 0 {
            return FirmStatusClass::AbsentFromRegister;
        }
        self.statuses
            .get(off as usize)
            .cloned()
            .unwrap_or(FirmStatusClass::AbsentFromRegister)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TimelineBuild {
    /// Sorted by company id.
    pub timelines: Vec<FirmTimeline>,
    pub rejections: Vec<RejectedRow>,
}

impl TimelineBuild {
    /// All events, ordered by (month, company id).
    pub fn events(&self) -> Vec<FirmEvent> {
        let mut ev: Vec<FirmEvent> = self
            .timelines
            .iter()
            .flat_map(|t| t.events.iter().cloned())
            .collect();
        ev.sort_by(|a, b| (a.month, &a.company_id).cmp(&(b.month, &b.company_id)));
        ev
    }
}

/// Builds one timeline per company from contiguous monthly snapshots.
///
/// `months[i]` labels `snapshots[i]`. When `register_start` equals the first
/// month, firms present then are Opened; otherwise they are pre-existing.
/// Duplicate (company, month) rows with a different status are logged and the
/// first one kept.
pub fn build_timelines(
    months: &[YearMonth],
    snapshots: &[Vec<CompanySnapshotRecord>],
    register_start: Option<YearMonth>,
) -> TimelineBuild {
    assert_eq!(months.len(), snapshots.len(), "one snapshot per month");
    let mut rejections = Vec::new();
    let mut grid: BTreeMap<&str, (Vec<Option<&CompanySnapshotRecord>>, usize)> = BTreeMap::new();
    for (mi, recs) in snapshots.iter().enumerate() {
        for (ri, rec) in recs.iter().enumerate() {
            let slot = grid
                .entry(rec.company_id.as_str())
                .or_insert_with(|| (vec![None; months.len()], mi));
            match slot.0[mi] {
                None => slot.0[mi] = Some(rec),
                Some(first) if first.status != rec.status => rejections.push(RejectedRow {
                    file: format!("companies_{}.csv", months[mi]),
                    row: ri + 1,
                    reason: format!(
                        "duplicate company {} with conflicting status {:?}",
                        rec.company_id, rec.status
                    ),
                }),
                Some(_) => {}
            }
        }
    }
    let opens_at_start = register_start.is_some() && register_start == months.first().copied();

    let timelines = grid
        .into_par_iter()
        .map(|(id, (cells, first_idx))| {
            let statuses: Vec<FirmStatusClass> = cells[first_idx..]
                .iter()
                .map(|c| match c {
                    Some(r) => FirmStatusClass::from_status(&r.status),
                    None => FirmStatusClass::AbsentFromRegister,
                })
                .collect();
            let mut history: Vec<FirmStatusClass> = vec![FirmStatusClass::AbsentFromRegister; first_idx];
            let mut events = Vec::new();
            for (off, curr) in statuses.iter().enumerate() {
                let mi = first_idx + off;
                let classified = if mi == 0 {
                    if opens_at_start {
                        classify_month(None, curr, &history)
                    } else {
                        None
                    }
                } else {
                    classify_month(history.last(), curr, &history)
                };
                if let Some(c) = classified {
                    events.push(FirmEvent {
                        company_id: id.to_string(),
                        month: months[mi],
                        kind: c.kind,
                        inferred_dissolution: c.inferred_dissolution,
                    });
                }
                history.push(curr.clone());
            }
            let latest = cells.iter().rev().flatten().next().expect("firm seen at least once");
            FirmTimeline {
                company_id: id.to_string(),
                first_month: months[first_idx],
                statuses,
                events,
                profile: FirmProfile {
                    name: latest.name.clone(),
                    sic_codes: latest.sic_codes.clone(),
                    postcode: latest.postcode.clone(),
                },
            }
        })
        .collect();
    TimelineBuild {
        timelines,
        rejections,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::status::EventKind;

    fn ym(s: &str) -> YearMonth {
        s.parse().unwrap()
    }

    fn rec(id: &str, status: &str, month: &str) -> CompanySnapshotRecord {
        CompanySnapshotRecord {
            company_id: id.into(),
            name: format!("FIRM {id}"),
            status: status.into(),
            incorporation_date: None,
            dissolution_date: None,
            sic_codes: vec![],
            postcode: None,
            snapshot_month: ym(month),
        }
    }

    fn kinds(t: &FirmTimeline) -> Vec<EventKind> {
        t.events.iter().map(|e| e.kind).collect()
    }

    #[test]
    fn pre_existing_firm_gets_no_opening() {
        let months = [ym("2020-01"), ym("2020-02")];
        let snaps = vec![vec![rec("1", "Active", "2020-01")], vec![rec("1", "Active", "2020-02")]];
        let b = build_timelines(&months, &snaps, None);
        assert_eq!(b.timelines[0].statuses.len(), 2);
        assert_eq!(kinds(&b.timelines[0]), vec![EventKind::NoChange]);

        let b = build_timelines(&months, &snaps, Some(ym("2020-01")));
        assert_eq!(kinds(&b.timelines[0]), vec![EventKind::Opened, EventKind::NoChange]);
    }

    #[test]
    fn late_arrival_is_opened() {
        let months = [ym("2020-01"), ym("2020-02")];
        let snaps = vec![vec![], vec![rec("2", "Active", "2020-02")]];
        let b = build_timelines(&months, &snaps, None);
        assert_eq!(kinds(&b.timelines[0]), vec![EventKind::Opened]);
        assert_eq!(b.timelines[0].first_month, ym("2020-02"));
    }

    #[test]
    fn persisting_closed_counts_once() {
        let months = [ym("2020-01"), ym("2020-02"), ym("2020-03")];
        let snaps = vec![
            vec![rec("3", "Active", "2020-01")],
            vec![rec("3", "In Administration", "2020-02")],
            vec![rec("3", "In Administration", "2020-03")],
        ];
        let b = build_timelines(&months, &snaps, None);
        assert_eq!(kinds(&b.timelines[0]), vec![EventKind::Closed]);
        assert_eq!(b.timelines[0].events[0].month, ym("2020-02"));
    }

    #[test]
    fn conflicting_duplicate_keeps_first() {
        let months = [ym("2020-01")];
        let snaps = vec![vec![
            rec("4", "Active", "2020-01"),
            rec("4", "In Administration", "2020-01"),
            rec("4", "Active", "2020-01"),
        ]];
        let b = build_timelines(&months, &snaps, None);
        assert_eq!(b.rejections.len(), 1);
        assert_eq!(b.rejections[0].row, 2);
        assert_eq!(b.timelines[0].statuses, vec![FirmStatusClass::Active]);
    }

    #[test]
    fn dropped_firm_inferred_closed() {
        let months = [ym("2020-01"), ym("2020-02"), ym("2020-03")];
        let snaps = vec![vec![rec("5", "Active", "2020-01")], vec![], vec![rec("5", "Active", "2020-03")]];
        let b = build_timelines(&months, &snaps, None);
        let t = &b.timelines[0];
        assert_eq!(kinds(t), vec![EventKind::Closed, EventKind::Reopened]);
        assert!(t.events[0].inferred_dissolution);
        assert_eq!(t.status_at(ym("2020-02")), FirmStatusClass::AbsentFromRegister);
    }
}
