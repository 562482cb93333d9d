//! Column mapping between the registry's bulk file headers and logical fields.
//!
//! A mapping file is plain `key = value` lines; `#` starts a comment.
//!
//! ```text
//! # company snapshot columns
//! companies.company_id = CompanyNumber
//! companies.postcode   = RegAddress.PostCode
//! officers.birth_month = DateOfBirth
//! dates = dmy
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::calendar::DateFormat;

use super::IngestError;

pub const COMPANY_FIELDS: &[(&str, &str)] = &[
    ("company_id", "CompanyNumber"),
    ("name", "CompanyName"),
    ("status", "CompanyStatus"),
    ("incorporation_date", "IncorporationDate"),
    ("dissolution_date", "DissolutionDate"),
    ("sic_1", "SICCode.SicText_1"),
    ("sic_2", "SICCode.SicText_2"),
    ("sic_3", "SICCode.SicText_3"),
    ("sic_4", "SICCode.SicText_4"),
    ("postcode", "RegAddress.PostCode"),
];

pub const COMPANY_MANDATORY: &[&str] = &["company_id", "name", "status"];

pub const OFFICER_FIELDS: &[(&str, &str)] = &[
    ("name", "Name"),
    ("company_id", "CompanyNumber"),
    ("birth_month", "DateOfBirth"),
    ("appointment_date", "AppointmentDate"),
    ("resignation_date", "ResignationDate"),
    ("postcode", "PostCode"),
    ("role", "OfficerRole"),
];

pub const OFFICER_MANDATORY: &[&str] = &["name", "company_id"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaMap {
    pub companies: BTreeMap<String, String>,
    pub officers: BTreeMap<String, String>,
    pub date_format: DateFormat,
}

impl Default for SchemaMap {
    fn default() -> Self {
        let to_map = |fields: &[(&str, &str)]| {
            fields
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect()
        };
        Self {
            companies: to_map(COMPANY_FIELDS),
            officers: to_map(OFFICER_FIELDS),
            date_format: DateFormat::Iso,
        }
    }
}

impl SchemaMap {
    /// Parses override lines on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let mut map = SchemaMap::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || IngestError::SchemaMap(format!("line {}: {line:?}", lineno + 1));
            let (key, value) = line.split_once('=').ok_or_else(bad)?;
            let (key, value) = (key.trim(), value.trim().to_string());
            if key == "dates" {
                map.date_format = value.parse().map_err(|_| bad())?;
                continue;
            }
            let (section, field) = key.split_once('.').ok_or_else(bad)?;
            let (target, known) = match section {
                "companies" => (&mut map.companies, COMPANY_FIELDS),
                "officers" => (&mut map.officers, OFFICER_FIELDS),
                _ => return Err(bad()),
            };
            if !known.iter().any(|(k, _)| *k == field) {
                return Err(bad());
            }
            target.insert(field.to_string(), value);
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        Self::parse(&text)
    }
}

/// Header positions for the logical fields of one file.
#[derive(Debug, Clone)]
pub(crate) struct ColumnIndex {
    positions: BTreeMap<String, usize>,
}

impl ColumnIndex {
    pub(crate) fn resolve(
        headers: &csv::StringRecord,
        mapping: &BTreeMap<String, String>,
        mandatory: &[&str],
        file: &str,
    ) -> Result<Self, IngestError> {
        let trimmed: Vec<&str> = headers.iter().map(str::trim).collect();
        let mut positions = BTreeMap::new();
        for (field, column) in mapping {
            if let Some(pos) = trimmed.iter().position(|h| h == column) {
                positions.insert(field.clone(), pos);
            }
        }
        for field in mandatory {
            if !positions.contains_key(*field) {
                return Err(IngestError::MissingColumn {
                    file: file.to_string(),
                    column: mapping.get(*field).cloned().unwrap_or_default(),
                });
            }
        }
        Ok(Self { positions })
    }

    /// Trimmed cell value; empty cells read as `None`.
    pub(crate) fn get<'r>(&self, row: &'r csv::StringRecord, field: &str) -> Option<&'r str> {
        let pos = *self.positions.get(field)?;
        row.get(pos).map(str::trim).filter(|s| !s.is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply_on_defaults() {
        let m = SchemaMap::parse("companies.company_id = Number # id\n\ndates = dmy\n").unwrap();
        assert_eq!(m.companies["company_id"], "Number");
        assert_eq!(m.companies["status"], "CompanyStatus");
        assert_eq!(m.date_format, DateFormat::DayMonthYear);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(SchemaMap::parse("companies.colour = X").is_err());
        assert!(SchemaMap::parse("nonsense").is_err());
    }
}
