//! Monthly firm lifecycle classification from consecutive snapshots.
//!
//! Each firm is classified each month as Opened, Closed, Reopened or
//! NoChange:
//!
//! | previous month            | this month   | event                         |
//! |---------------------------|--------------|-------------------------------|
//! | never on register         | Active       | Opened                        |
//! | never on register         | closed-like  | none (appeared closed)        |
//! | Active                    | Active       | NoChange                      |
//! | Active                    | closed-like  | Closed                        |
//! | Active                    | absent       | Closed, `inferred_dissolution`|
//! | closed-like, or dropped   | Active       | Reopened                      |
//! | closed-like, or dropped   | closed-like  | none                          |
//! | closed-like, or dropped   | absent       | none                          |
//!
//! Firms present in the first snapshot are pre-existing and get no event that
//! month, unless the first snapshot is the configured register start.

mod aggregate;
mod timeline;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calendar::YearMonth;

pub use aggregate::{aggregate_events, write_events, write_series, EventSeries, EventTally};
pub use timeline::{build_timelines, FirmProfile, FirmTimeline, TimelineBuild};

/// Registry statuses treated as closure.
pub const CLOSED_STATUSES: &[&str] = &[
    "Active - Proposal to Strike Off",
    "Administration Order",
    "Administrative Receiver",
    "In Administration",
    "In Administration/Administrative Receiver",
    "In Administration/Receiver Manger",
    "Receiver Manager/Administrative Receiver",
    "Voluntary Arrangement/Receiver Manager",
];

fn status_key(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FirmStatusClass {
    Active,
    /// Carries the raw status string that matched the closed list.
    ClosedLike(String),
    AbsentFromRegister,
}

impl FirmStatusClass {
    /// Classifies a raw status of a firm present on the register.
    /// Matching ignores case and repeated whitespace.
    pub fn from_status(raw: &str) -> Self {
        let key = status_key(raw);
        if CLOSED_STATUSES.iter().any(|c| status_key(c) == key) {
            FirmStatusClass::ClosedLike(raw.trim().to_string())
        } else {
            FirmStatusClass::Active
        }
    }

    pub fn is_present(&self) -> bool {
        !matches!(self, FirmStatusClass::AbsentFromRegister)
    }

    pub fn is_active(&self) -> bool {
        matches!(self, FirmStatusClass::Active)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    Opened,
    Closed,
    Reopened,
    NoChange,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Opened => "Opened",
            EventKind::Closed => "Closed",
            EventKind::Reopened => "Reopened",
            EventKind::NoChange => "NoChange",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Opened" => Ok(EventKind::Opened),
            "Closed" => Ok(EventKind::Closed),
            "Reopened" => Ok(EventKind::Reopened),
            "NoChange" => Ok(EventKind::NoChange),
            _ => Err(format!("unknown event {s:?}")),
        }
    }
}

/// Event kind plus whether the closure was inferred from the firm vanishing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Classification {
    pub kind: EventKind,
    pub inferred_dissolution: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FirmEvent {
    pub company_id: String,
    pub month: YearMonth,
    pub kind: EventKind,
    pub inferred_dissolution: bool,
}

/// Classifies month `t`.
///
/// `history` holds the firm's statuses for the archive months before `t`
/// (oldest first). `prev` is `None` only when `t` is the register start, so
/// there is no prior month at all; otherwise it must equal `history.last()`.
pub fn classify_month(
    prev: Option<&FirmStatusClass>,
    curr: &FirmStatusClass,
    history: &[FirmStatusClass],
) -> Option<Classification> {
    use FirmStatusClass::*;
    let event = |kind| {
        Some(Classification {
            kind,
            inferred_dissolution: false,
        })
    };
    let ever_present = history.iter().any(FirmStatusClass::is_present);
    let prev_active = matches!(prev, Some(Active));
    match curr {
        Active if !ever_present => event(EventKind::Opened),
        Active if prev_active => event(EventKind::NoChange),
        Active => event(EventKind::Reopened),
        ClosedLike(_) if prev_active => event(EventKind::Closed),
        ClosedLike(_) => None,
        AbsentFromRegister if prev_active => Some(Classification {
            kind: EventKind::Closed,
            inferred_dissolution: true,
        }),
        AbsentFromRegister => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use FirmStatusClass::*;

    fn closed() -> FirmStatusClass {
        ClosedLike("In Administration".into())
    }

    #[test]
    fn status_matching_is_case_and_space_insensitive() {
        assert!(matches!(
            FirmStatusClass::from_status("active -  proposal to strike off"),
            ClosedLike(_)
        ));
        assert!(matches!(
            FirmStatusClass::from_status("In Administration/Receiver Manger"),
            ClosedLike(_)
        ));
        assert_eq!(FirmStatusClass::from_status("Active"), Active);
        assert_eq!(FirmStatusClass::from_status("Liquidation"), Active);
    }

    #[test]
    fn opened_on_first_appearance() {
        let h = [AbsentFromRegister];
        let c = classify_month(h.last(), &Active, &h).unwrap();
        assert_eq!(c.kind, EventKind::Opened);
    }

    #[test]
    fn closed_on_closed_status() {
        let h = [Active];
        let c = classify_month(h.last(), &closed(), &h).unwrap();
        assert_eq!(c.kind, EventKind::Closed);
        assert!(!c.inferred_dissolution);
    }

    #[test]
    fn reopened_after_closed_month() {
        let h = [Active, closed()];
        assert_eq!(classify_month(h.last(), &Active, &h).unwrap().kind, EventKind::Reopened);
    }

    #[test]
    fn no_change_between_active_months() {
        let h = [Active];
        assert_eq!(classify_month(h.last(), &Active, &h).unwrap().kind, EventKind::NoChange);
    }

    #[test]
    fn persisting_closed_is_silent() {
        let h = [Active, closed()];
        assert_eq!(classify_month(h.last(), &closed(), &h), None);
    }

    #[test]
    fn vanishing_firm_is_inferred_closed() {
        let h = [Active];
        let c = classify_month(h.last(), &AbsentFromRegister, &h).unwrap();
        assert_eq!(c.kind, EventKind::Closed);
        assert!(c.inferred_dissolution);
    }

    #[test]
    fn register_start_opens_active_firms() {
        assert_eq!(classify_month(None, &Active, &[]).unwrap().kind, EventKind::Opened);
        assert_eq!(classify_month(None, &closed(), &[]), None);
    }
}
