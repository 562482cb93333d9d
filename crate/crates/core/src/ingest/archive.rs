use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::calendar::{MonthWindow, YearMonth};

use super::records::{parse_company_snapshot, parse_officer_file};
use super::{CompanySnapshotRecord, IngestError, OfficerEventRecord, Parsed, RejectedRow, SchemaMap};

/// A contiguous run of monthly snapshots.
#[derive(Debug, Clone, Default)]
pub struct SnapshotArchive {
    pub months: Vec<YearMonth>,
    /// Company records per month, aligned with `months`.
    pub companies: Vec<Vec<CompanySnapshotRecord>>,
    /// Officer records per month; empty vectors when no officer file exists.
    pub officers: Vec<Vec<OfficerEventRecord>>,
    pub rejections: Vec<RejectedRow>,
}

impl SnapshotArchive {
    pub fn company_rows(&self) -> usize {
        self.companies.iter().map(Vec::len).sum()
    }

    pub fn officer_rows(&self) -> usize {
        self.officers.iter().map(Vec::len).sum()
    }
}

/// Finds `<prefix>_YYYY-MM.csv` files in `dir`, sorted by month.
pub(crate) fn monthly_files(dir: &Path, prefix: &str) -> Result<Vec<(YearMonth, PathBuf)>, IngestError> {
    let entries = std::fs::read_dir(dir).map_err(|e| IngestError::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| IngestError::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(stem) = name
            .strip_prefix(prefix)
            .and_then(|s| s.strip_prefix('_'))
            .and_then(|s| s.strip_suffix(".csv"))
        else {
            continue;
        };
        if let Ok(month) = stem.parse::<YearMonth>() {
            out.push((month, entry.path()));
        }
    }
    out.sort();
    Ok(out)
}

fn check_contiguous(months: &[YearMonth]) -> Result<(), IngestError> {
    for pair in months.windows(2) {
        if pair[1] != pair[0].succ() {
            return Err(IngestError::Archive(format!(
                "months not contiguous: {} followed by {}",
                pair[0], pair[1]
            )));
        }
    }
    Ok(())
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Loads every monthly snapshot in `snapshots` (and officer files in
/// `officers`, when given) inside `window`. Files are parsed in parallel;
/// the rejection log is ordered by (file month, row).
pub fn load_archive(
    snapshots: &Path,
    officers: Option<&Path>,
    schema: &SchemaMap,
    window: Option<MonthWindow>,
) -> Result<SnapshotArchive, IngestError> {
    let in_window = |m: &YearMonth| window.map(|w| w.contains(*m)).unwrap_or(true);
    let company_files: Vec<_> = monthly_files(snapshots, "companies")?
        .into_iter()
        .filter(|(m, _)| in_window(m))
        .collect();
    if company_files.is_empty() {
        return Err(IngestError::Archive(format!(
            "no companies_YYYY-MM.csv files in {}",
            snapshots.display()
        )));
    }
    let months: Vec<YearMonth> = company_files.iter().map(|(m, _)| *m).collect();
    check_contiguous(&months)?;

    let parsed: Vec<Parsed<CompanySnapshotRecord>> = company_files
        .par_iter()
        .map(|(m, path)| {
            let f = File::open(path).map_err(|e| IngestError::io(path, e))?;
            parse_company_snapshot(BufReader::new(f), *m, schema, &file_label(path))
        })
        .collect::<Result<_, _>>()?;

    let officer_files = match officers {
        Some(dir) => monthly_files(dir, "officers")?
            .into_iter()
            .filter(|(m, _)| months.contains(m))
            .collect(),
        None => Vec::new(),
    };
    let parsed_officers: Vec<(YearMonth, Parsed<OfficerEventRecord>)> = officer_files
        .par_iter()
        .map(|(m, path)| {
            let f = File::open(path).map_err(|e| IngestError::io(path, e))?;
            Ok((*m, parse_officer_file(BufReader::new(f), *m, schema, &file_label(path))?))
        })
        .collect::<Result<_, IngestError>>()?;

    let mut archive = SnapshotArchive {
        months: months.clone(),
        companies: Vec::with_capacity(months.len()),
        officers: vec![Vec::new(); months.len()],
        rejections: Vec::new(),
    };
    for p in parsed {
        archive.rejections.extend(p.rejections);
        archive.companies.push(p.records);
    }
    for (m, p) in parsed_officers {
        let idx = months.iter().position(|x| *x == m).expect("filtered to archive months");
        archive.rejections.extend(p.rejections);
        archive.officers[idx] = p.records;
    }
    Ok(archive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    const HEADER: &str = "CompanyName,CompanyNumber,CompanyStatus\n";

    #[test]
    fn loads_contiguous_months_in_order() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("companies_2020-02.csv"), format!("{HEADER}B,2,Active\n")).unwrap();
        fs::write(dir.path().join("companies_2020-01.csv"), format!("{HEADER}A,1,Active\n,9,Active\n")).unwrap();
        fs::write(dir.path().join("readme.txt"), "x").unwrap();
        let a = load_archive(dir.path(), None, &SchemaMap::default(), None).unwrap();
        assert_eq!(a.months.len(), 2);
        assert_eq!(a.months[0].to_string(), "2020-01");
        assert_eq!(a.company_rows(), 3);
        assert!(a.rejections.is_empty());
    }

    #[test]
    fn gap_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("companies_2020-01.csv"), HEADER).unwrap();
        fs::write(dir.path().join("companies_2020-03.csv"), HEADER).unwrap();
        assert!(load_archive(dir.path(), None, &SchemaMap::default(), None).is_err());
        let w: MonthWindow = "2020-03:2020-12".parse().unwrap();
        assert!(load_archive(dir.path(), None, &SchemaMap::default(), Some(w)).is_ok());
    }

    #[test]
    fn empty_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_archive(dir.path(), None, &SchemaMap::default(), None).is_err());
    }
}
