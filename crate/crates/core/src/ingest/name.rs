//! Officer name normalization.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Titles removed from the forename component.
pub const HONORIFICS: &[&str] = &[
    "MR", "MRS", "MS", "MISS", "MX", "DR", "SIR", "DAME", "LORD", "LADY", "PROF", "PROFESSOR",
    "REV", "REVEREND", "CAPT", "CAPTAIN", "COL", "COLONEL", "MAJOR", "HON", "RT", "BARON",
    "BARONESS", "VISCOUNT", "COUNTESS", "FR", "CLLR",
];

/// `SURNAME, FORENAMES` split into uppercase components.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct NormalizedName {
    pub surname: String,
    pub forenames: String,
}

impl NormalizedName {
    /// False when nothing survives normalization.
    pub fn is_usable(&self) -> bool {
        !self.surname.is_empty()
    }

    pub fn first_forename(&self) -> &str {
        self.forenames.split(' ').next().unwrap_or("")
    }

    /// All whitespace-separated tokens of both components.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.surname
            .split(' ')
            .chain(self.forenames.split(' '))
            .filter(|t| !t.is_empty())
    }
}

impl fmt::Display for NormalizedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.forenames.is_empty() {
            write!(f, "{},", self.surname)
        } else {
            write!(f, "{}, {}", self.surname, self.forenames)
        }
    }
}

fn clean(part: &str) -> Vec<String> {
    let upper: String = part
        .chars()
        .flat_map(char::to_uppercase)
        .filter_map(|c| {
            if c.is_alphanumeric() || c == '-' {
                Some(c)
            } else if c.is_whitespace() {
                Some(' ')
            } else {
                None
            }
        })
        .collect();
    upper.split_whitespace().map(str::to_string).collect()
}

fn is_honorific(tok: &str) -> bool {
    HONORIFICS.contains(&tok)
}

/// Uppercases, strips punctuation other than hyphens, collapses whitespace and
/// drops honorifics from the forenames. Input without a comma is read as
/// `FORENAMES SURNAME`.
pub fn normalize_name(raw: &str) -> NormalizedName {
    let (surname, forenames) = match raw.split_once(',') {
        Some((s, f)) => (clean(s), clean(f)),
        None => {
            let mut toks = clean(raw);
            match toks.pop() {
                Some(last) => (vec![last], toks),
                None => (Vec::new(), Vec::new()),
            }
        }
    };
    let forenames: Vec<String> = forenames.into_iter().filter(|t| !is_honorific(t)).collect();
    NormalizedName {
        surname: surname.join(" "),
        forenames: forenames.join(" "),
    }
}
