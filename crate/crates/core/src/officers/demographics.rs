use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::YearMonth;

#[derive(Debug, Error)]
pub enum DemographicsError {
    #[error("birth month {birth} is after observation month {observed}")]
    BirthAfterObservation { birth: YearMonth, observed: YearMonth },
    #[error("gender table line {line}: {reason}")]
    GenderTable { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Whole years of age, taking everyone to be born on the first of the month.
pub fn compute_age(birth_month: YearMonth, observation: YearMonth) -> Result<u32, DemographicsError> {
    let months = observation.months_since(birth_month);
    if months < 0 {
        return Err(DemographicsError::BirthAfterObservation {
            birth: birth_month,
            observed: observation,
        });
    }
    Ok((months / 12) as u32)
}

/// One provider's answer for a forename.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GenderLabel {
    Woman,
    Man,
    Unknown,
}

impl FromStr for GenderLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "woman" | "female" | "f" | "w" => Ok(GenderLabel::Woman),
            "man" | "male" | "m" => Ok(GenderLabel::Man),
            "unknown" | "u" | "andy" | "" => Ok(GenderLabel::Unknown),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Resolved gender of a person.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    Woman,
    Man,
    Unresolved,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Woman => "Woman",
            Gender::Man => "Man",
            Gender::Unresolved => "Unresolved",
        })
    }
}

/// Anything that can guess a gender label from a forename. A network-backed
/// provider can implement this; the crate ships only offline tables.
pub trait GenderProvider: Send + Sync {
    fn guess(&self, forename: &str) -> GenderLabel;
}

/// Offline frequency table read from `NAME,LABEL,CONFIDENCE` lines.
#[derive(Debug, Clone, Default)]
pub struct GenderProviderTable {
    pub locale: String,
    entries: HashMap<String, (GenderLabel, f64)>,
    /// Entries below this confidence answer `Unknown`.
    pub min_confidence: f64,
}

impl GenderProviderTable {
    pub fn parse(locale: &str, text: &str) -> Result<Self, DemographicsError> {
        let mut entries = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| DemographicsError::GenderTable { line: i + 1, reason };
            let mut parts = line.split(',');
            let (Some(name), Some(label), Some(conf)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err("expected NAME,LABEL,CONFIDENCE".into()));
            };
            let label: GenderLabel = label.parse().map_err(err)?;
            let conf: f64 = conf
                .trim()
                .parse()
                .map_err(|_| err(format!("bad confidence {conf:?}")))?;
            if !(0.0..=1.0).contains(&conf) {
                return Err(err(format!("confidence {conf} outside [0,1]")));
            }
            entries.insert(name.trim().to_uppercase(), (label, conf));
        }
        Ok(Self {
            locale: locale.to_string(),
            entries,
            min_confidence: 0.0,
        })
    }

    pub fn load(path: &Path) -> Result<Self, DemographicsError> {
        let text = std::fs::read_to_string(path).map_err(|source| DemographicsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let locale = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(&locale, &text)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, forename: &str) -> Option<(GenderLabel, f64)> {
        self.entries.get(&forename.to_uppercase()).copied()
    }
}

impl GenderProvider for GenderProviderTable {
    fn guess(&self, forename: &str) -> GenderLabel {
        match self.lookup(forename) {
            Some((label, conf)) if conf >= self.min_confidence => label,
            _ => GenderLabel::Unknown,
        }
    }
}

/// Majority vote across providers. `Unknown` answers abstain; a tie or no
/// votes at all is `Unresolved`.
pub fn infer_gender(forename: &str, providers: &[&dyn GenderProvider]) -> Gender {
    let (mut women, mut men) = (0usize, 0usize);
    for p in providers {
        match p.guess(forename) {
            GenderLabel::Woman => women += 1,
            GenderLabel::Man => men += 1,
            GenderLabel::Unknown => {}
        }
    }
    match women.cmp(&men) {
        std::cmp::Ordering::Greater => Gender::Woman,
        std::cmp::Ordering::Less => Gender::Man,
        std::cmp::Ordering::Equal => Gender::Unresolved,
    }
}
