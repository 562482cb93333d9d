//! Officer disambiguation.
//!
//! Records are blocked on (surname, birth month). Inside a block, distinct
//! first forenames are linked when their edit distance is at most the fuzzy
//! threshold, and each connected group becomes one person. Records without a
//! birth month never merge.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calendar::YearMonth;
use crate::ingest::OfficerEventRecord;

use super::demographics::Gender;
use super::levenshtein::levenshtein;
use super::region::Region;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PersonKey {
    pub first_forename: String,
    pub surname: String,
    pub birth_month: Option<YearMonth>,
}

impl PersonKey {
    pub fn from_record(r: &OfficerEventRecord) -> Self {
        Self {
            first_forename: r.name.first_forename().to_string(),
            surname: r.name.surname.clone(),
            birth_month: r.birth_month,
        }
    }

    /// All components present.
    pub fn exact_match_eligible(&self) -> bool {
        !self.first_forename.is_empty() && !self.surname.is_empty() && self.birth_month.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Appointment {
    pub company_id: String,
    pub appointed: YearMonth,
    pub resigned: Option<NaiveDate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchProvenance {
    Exact,
    /// Largest forename edit distance needed to connect the group.
    Fuzzy(usize),
    /// No birth month; kept as a singleton.
    NoBirthMonth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPerson {
    pub person_id: String,
    /// Canonical key: the lexicographically smallest forename of the group.
    pub key: PersonKey,
    pub name_variants: BTreeSet<String>,
    /// One entry per company, at the earliest appointment seen.
    pub appointments: Vec<Appointment>,
    pub gender: Gender,
    pub region: Region,
    pub provenance: MatchProvenance,
    /// Group joined through a chain of forenames that are not all pairwise
    /// within the threshold.
    pub ambiguous: bool,
    /// Most recent correspondence postcode seen.
    pub postcode: Option<String>,
}

impl ResolvedPerson {
    /// Distinct companies with an appointment in a month before `as_of`.
    pub fn prior_firm_count(&self, as_of: YearMonth) -> usize {
        self.appointments.iter().filter(|a| a.appointed < as_of).count()
    }

    pub fn first_appointment(&self) -> YearMonth {
        self.appointments
            .iter()
            .map(|a| a.appointed)
            .min()
            .expect("persons have at least one appointment")
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut x = x;
        while self.0[x] != r {
            let next = self.0[x];
            self.0[x] = r;
            x = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.0[hi] = lo;
        true
    }
}

/// Forename groups of one block: (forenames, bottleneck distance, clique).
fn group_forenames(names: &[&str], threshold: usize) -> Vec<(Vec<usize>, usize, bool)> {
    let n = names.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = levenshtein(names[i], names[j]);
            if d <= threshold {
                edges.push((d, i, j));
            }
        }
    }
    edges.sort_unstable();
    let mut uf = UnionFind::new(n);
    let mut bottleneck = vec![0usize; n];
    for &(d, i, j) in &edges {
        let (ri, rj) = (uf.find(i), uf.find(j));
        if ri != rj {
            let b = bottleneck[ri].max(bottleneck[rj]).max(d);
            uf.union(ri, rj);
            let root = uf.find(ri);
            bottleneck[root] = b;
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        groups.entry(uf.find(i)).or_default().push(i);
    }
    groups
        .into_iter()
        .map(|(root, members)| {
            let k = members.len();
            let linked = edges
                .iter()
                .filter(|(_, i, j)| members.contains(i) && members.contains(j))
                .count();
            (members, bottleneck[root], linked == k * (k - 1) / 2)
        })
        .collect()
}

fn build_person(key: PersonKey, records: &[&OfficerEventRecord], provenance: MatchProvenance, ambiguous: bool) -> ResolvedPerson {
    let mut by_company: BTreeMap<&str, Appointment> = BTreeMap::new();
    let mut variants = BTreeSet::new();
    let mut latest_postcode: Option<(YearMonth, &str)> = None;
    for r in records {
        variants.insert(r.name.to_string());
        let appointed = r.appointment_month();
        let entry = by_company.entry(r.company_id.as_str()).or_insert(Appointment {
            company_id: r.company_id.clone(),
            appointed,
            resigned: r.resignation_date,
        });
        if appointed < entry.appointed {
            entry.appointed = appointed;
        }
        if r.resignation_date.is_some() {
            entry.resigned = entry.resigned.max(r.resignation_date);
        }
        if let Some(pc) = r.correspondence_postcode.as_deref() {
            if latest_postcode.is_none_or(|(m, p)| (r.record_month, pc) > (m, p)) {
                latest_postcode = Some((r.record_month, pc));
            }
        }
    }
    ResolvedPerson {
        person_id: String::new(),
        key,
        name_variants: variants,
        appointments: by_company.into_values().collect(),
        gender: Gender::Unresolved,
        region: Region::Excluded,
        provenance,
        ambiguous,
        postcode: latest_postcode.map(|(_, p)| p.to_string()),
    }
}

/// Resolves person officer records into people.
///
/// The output does not depend on input order, and raising `fuzzy_threshold`
/// only ever joins groups. Person ids are assigned in key order.
pub fn resolve_identities(records: &[OfficerEventRecord], fuzzy_threshold: usize) -> Vec<ResolvedPerson> {
    let mut sorted: Vec<&OfficerEventRecord> = records.iter().collect();
    sorted.sort();

    let mut blocks: BTreeMap<(&str, YearMonth), BTreeMap<&str, Vec<&OfficerEventRecord>>> = BTreeMap::new();
    let mut singletons = Vec::new();
    for r in sorted {
        match r.birth_month {
            Some(bm) => blocks
                .entry((r.name.surname.as_str(), bm))
                .or_default()
                .entry(r.name.first_forename())
                .or_default()
                .push(r),
            None => singletons.push(r),
        }
    }

    let blocks: Vec<_> = blocks.into_iter().collect();
    let mut persons: Vec<ResolvedPerson> = blocks
        .par_iter()
        .flat_map_iter(|((surname, bm), by_forename)| {
            let names: Vec<&str> = by_forename.keys().copied().collect();
            group_forenames(&names, fuzzy_threshold)
                .into_iter()
                .map(|(members, bottleneck, clique)| {
                    let recs: Vec<&OfficerEventRecord> = members
                        .iter()
                        .flat_map(|&i| by_forename[names[i]].iter().copied())
                        .collect();
                    let provenance = if members.len() == 1 {
                        MatchProvenance::Exact
                    } else {
                        MatchProvenance::Fuzzy(bottleneck)
                    };
                    let key = PersonKey {
                        first_forename: names[members[0]].to_string(),
                        surname: surname.to_string(),
                        birth_month: Some(*bm),
                    };
                    build_person(key, &recs, provenance, !clique)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    persons.extend(singletons.into_iter().map(|r| {
        build_person(PersonKey::from_record(r), &[r], MatchProvenance::NoBirthMonth, false)
    }));
    persons.sort_by(|a, b| {
        (&a.key, &a.appointments).cmp(&(&b.key, &b.appointments))
    });
    for (i, p) in persons.iter_mut().enumerate() {
        p.person_id = format!("P{:07}", i + 1);
    }
    persons
}
