//! Registry snapshot and officer file ingestion.
//!
//! Monthly company snapshots (`companies_YYYY-MM.csv`) and officer files
//! (`officers_YYYY-MM.csv`) are parsed into typed records. Malformed rows are
//! logged with a reason and skipped; only a missing mandatory column aborts a
//! file.

mod archive;
mod name;
mod records;
mod schema;

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use archive::{load_archive, SnapshotArchive};
pub use name::{normalize_name, NormalizedName, HONORIFICS};
pub use records::{
    filter_corporate_officers, is_corporate_name, parse_company_snapshot, parse_officer_file,
    read_companies, read_officers, write_companies, write_officers, CompanySnapshotRecord,
    CorporatePartition, OfficerEventRecord, SicCode, CORPORATE_WORDS,
};
pub use schema::{SchemaMap, COMPANY_FIELDS, OFFICER_FIELDS};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}: missing mandatory column {column:?}")]
    MissingColumn { file: String, column: String },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema map: {0}")]
    SchemaMap(String),
    #[error("snapshot archive: {0}")]
    Archive(String),
    #[error("normalized records: {0}")]
    Normalized(String),
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        IngestError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// One skipped input row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RejectedRow {
    pub file: String,
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub reason: String,
}

/// Records parsed from one file plus the rows that were skipped.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub rejections: Vec<RejectedRow>,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Self {
            records: Vec::new(),
            rejections: Vec::new(),
        }
    }
}

/// Writes the rejection log as one JSON object per line.
pub fn write_rejections<W: io::Write>(mut out: W, rows: &[RejectedRow]) -> io::Result<()> {
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
