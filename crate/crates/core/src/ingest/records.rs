use std::fmt;
use std::io;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calendar::{DateFormat, YearMonth};

use super::name::{normalize_name, NormalizedName};
use super::schema::{ColumnIndex, SchemaMap, COMPANY_MANDATORY, OFFICER_MANDATORY};
use super::{IngestError, Parsed, RejectedRow};

/// Five-digit UK SIC 2007 code.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SicCode(String);

impl SicCode {
    /// Reads the leading code of a bulk-product SIC text such as
    /// `"62020 - Information technology consultancy activities"`.
    /// `Ok(None)` for blank or "None Supplied".
    pub fn from_sic_text(text: &str) -> Result<Option<SicCode>, String> {
        let t = text.trim();
        if t.is_empty() || t.eq_ignore_ascii_case("none supplied") {
            return Ok(None);
        }
        let code: String = t.chars().take_while(|c| !c.is_whitespace() && *c != '-').collect();
        if code.len() == 5 && code.bytes().all(|b| b.is_ascii_digit()) {
            Ok(Some(SicCode(code)))
        } else {
            Err(format!("invalid sic code {t:?}"))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Two-digit division.
    pub fn division(&self) -> u32 {
        self.0[..2].parse().expect("validated digits")
    }

    /// Section letter A..U, `None` for divisions outside the classification.
    pub fn section(&self) -> Option<char> {
        let s = match self.division() {
            1..=3 => 'A',
            5..=9 => 'B',
            10..=33 => 'C',
            35 => 'D',
            36..=39 => 'E',
            41..=43 => 'F',
            45..=47 => 'G',
            49..=53 => 'H',
            55..=56 => 'I',
            58..=63 => 'J',
            64..=66 => 'K',
            68 => 'L',
            69..=75 => 'M',
            77..=82 => 'N',
            84 => 'O',
            85 => 'P',
            86..=88 => 'Q',
            90..=93 => 'R',
            94..=96 => 'S',
            97..=98 => 'T',
            99 => 'U',
            _ => return None,
        };
        Some(s)
    }
}

impl fmt::Display for SicCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompanySnapshotRecord {
    pub company_id: String,
    pub name: String,
    pub status: String,
    pub incorporation_date: Option<NaiveDate>,
    pub dissolution_date: Option<NaiveDate>,
    pub sic_codes: Vec<SicCode>,
    pub postcode: Option<String>,
    pub snapshot_month: YearMonth,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OfficerEventRecord {
    pub officer_raw_name: String,
    pub name: NormalizedName,
    pub company_id: String,
    pub birth_month: Option<YearMonth>,
    pub appointment_date: Option<NaiveDate>,
    pub resignation_date: Option<NaiveDate>,
    pub correspondence_postcode: Option<String>,
    pub record_month: YearMonth,
    /// The registry's own role marks the officer as a corporate body.
    pub registry_corporate: bool,
}

impl OfficerEventRecord {
    /// Month the appointment started, falling back to the first month the
    /// record was observed.
    pub fn appointment_month(&self) -> YearMonth {
        self.appointment_date
            .map(YearMonth::of_date)
            .unwrap_or(self.record_month)
    }
}

fn collapse_upper(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_uppercase()
}

fn parse_opt_date(raw: Option<&str>, fmt: DateFormat) -> Result<Option<NaiveDate>, String> {
    match raw {
        None => Ok(None),
        Some(s) => fmt
            .parse(s)
            .map(Some)
            .map_err(|_| format!("invalid date {s:?}")),
    }
}

fn csv_reader<R: io::Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input)
}

/// Parses one monthly company snapshot. `file` labels rejection entries.
pub fn parse_company_snapshot<R: io::Read>(
    input: R,
    month: YearMonth,
    schema: &SchemaMap,
    file: &str,
) -> Result<Parsed<CompanySnapshotRecord>, IngestError> {
    let mut rdr = csv_reader(input);
    let cols = ColumnIndex::resolve(rdr.headers()?, &schema.companies, COMPANY_MANDATORY, file)?;
    let mut out = Parsed::default();
    let mut row = csv::StringRecord::new();
    let mut n = 0;
    loop {
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {
                n += 1;
                match company_row(&cols, &row, month, schema.date_format) {
                    Ok(rec) => out.records.push(rec),
                    Err(reason) => out.rejections.push(RejectedRow {
                        file: file.to_string(),
                        row: n,
                        reason,
                    }),
                }
            }
            Err(e) if !e.is_io_error() => {
                n += 1;
                out.rejections.push(RejectedRow {
                    file: file.to_string(),
                    row: n,
                    reason: format!("malformed row: {e}"),
                });
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

fn company_row(
    cols: &ColumnIndex,
    row: &csv::StringRecord,
    month: YearMonth,
    fmt: DateFormat,
) -> Result<CompanySnapshotRecord, String> {
    let company_id = cols.get(row, "company_id").ok_or("empty company id")?;
    let status = cols.get(row, "status").ok_or("empty status")?;
    let mut sic_codes = Vec::new();
    for key in ["sic_1", "sic_2", "sic_3", "sic_4"] {
        if let Some(text) = cols.get(row, key) {
            if let Some(code) = SicCode::from_sic_text(text)? {
                sic_codes.push(code);
            }
        }
    }
    Ok(CompanySnapshotRecord {
        company_id: company_id.to_string(),
        name: collapse_upper(cols.get(row, "name").unwrap_or("")),
        status: status.to_string(),
        incorporation_date: parse_opt_date(cols.get(row, "incorporation_date"), fmt)?,
        dissolution_date: parse_opt_date(cols.get(row, "dissolution_date"), fmt)?,
        sic_codes,
        postcode: cols.get(row, "postcode").map(collapse_upper),
        snapshot_month: month,
    })
}

/// Parses one monthly officer appointment file.
pub fn parse_officer_file<R: io::Read>(
    input: R,
    month: YearMonth,
    schema: &SchemaMap,
    file: &str,
) -> Result<Parsed<OfficerEventRecord>, IngestError> {
    let mut rdr = csv_reader(input);
    let cols = ColumnIndex::resolve(rdr.headers()?, &schema.officers, OFFICER_MANDATORY, file)?;
    let mut out = Parsed::default();
    let mut row = csv::StringRecord::new();
    let mut n = 0;
    loop {
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {
                n += 1;
                match officer_row(&cols, &row, month, schema.date_format) {
                    Ok(rec) => out.records.push(rec),
                    Err(reason) => out.rejections.push(RejectedRow {
                        file: file.to_string(),
                        row: n,
                        reason,
                    }),
                }
            }
            Err(e) if !e.is_io_error() => {
                n += 1;
                out.rejections.push(RejectedRow {
                    file: file.to_string(),
                    row: n,
                    reason: format!("malformed row: {e}"),
                });
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

fn officer_row(
    cols: &ColumnIndex,
    row: &csv::StringRecord,
    month: YearMonth,
    fmt: DateFormat,
) -> Result<OfficerEventRecord, String> {
    let company_id = cols.get(row, "company_id").ok_or("empty company id")?;
    let raw_name = cols.get(row, "name").unwrap_or("");
    let name = normalize_name(raw_name);
    if !name.is_usable() {
        return Err("unusable name".to_string());
    }
    let birth_month = match cols.get(row, "birth_month") {
        None => None,
        Some(s) => Some(
            s.parse::<YearMonth>()
                .map_err(|_| format!("invalid birth month {s:?}"))?,
        ),
    };
    let appointment_date = parse_opt_date(cols.get(row, "appointment_date"), fmt)?;
    let resignation_date = parse_opt_date(cols.get(row, "resignation_date"), fmt)?;
    if let (Some(a), Some(r)) = (appointment_date, resignation_date) {
        if r < a {
            return Err("resignation before appointment".to_string());
        }
    }
    let registry_corporate = cols
        .get(row, "role")
        .map(|r| r.to_ascii_lowercase().contains("corporate"))
        .unwrap_or(false);
    Ok(OfficerEventRecord {
        officer_raw_name: raw_name.to_string(),
        name,
        company_id: company_id.to_string(),
        birth_month,
        appointment_date,
        resignation_date,
        correspondence_postcode: cols.get(row, "postcode").map(collapse_upper),
        record_month: month,
        registry_corporate,
    })
}

/// Words marking an officer name as a corporate body. Matched as whole tokens.
pub const CORPORATE_WORDS: &[&str] = &[
    "COMMERCIAL",
    "COMPANY",
    "CORPORATE",
    "DETAILS",
    "EXCHANGE",
    "HOLDINGS",
    "INTERNATIONAL",
    "INVESTMENTS",
    "LIMITED",
    "LTD",
    "NON-DESTRUCTIVE",
    "PARTNERSHIPS",
    "PRIVATE",
    "PROSECUTION",
    "SECRETARIAT",
    "SERVICES",
];

pub fn is_corporate_name(name: &NormalizedName) -> bool {
    name.tokens().any(|t| CORPORATE_WORDS.contains(&t))
}

#[derive(Debug, Clone, Default)]
pub struct CorporatePartition {
    pub persons: Vec<OfficerEventRecord>,
    pub companies: Vec<OfficerEventRecord>,
    /// `companies / total`; zero for empty input.
    pub corporate_share: f64,
}

/// Splits officer records into people and corporate bodies. A record is
/// corporate when the registry role says so or its name holds a corporate word.
pub fn filter_corporate_officers(records: Vec<OfficerEventRecord>) -> CorporatePartition {
    let total = records.len();
    let (companies, persons): (Vec<_>, Vec<_>) = records
        .into_iter()
        .partition(|r| r.registry_corporate || is_corporate_name(&r.name));
    let corporate_share = if total == 0 {
        0.0
    } else {
        companies.len() as f64 / total as f64
    };
    CorporatePartition {
        persons,
        companies,
        corporate_share,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CompanyRow {
    company_id: String,
    name: String,
    status: String,
    incorporation_date: Option<NaiveDate>,
    dissolution_date: Option<NaiveDate>,
    sic_codes: String,
    postcode: Option<String>,
    snapshot_month: YearMonth,
}

#[derive(Debug, Serialize, Deserialize)]
struct OfficerRow {
    officer_raw_name: String,
    surname: String,
    forenames: String,
    company_id: String,
    birth_month: Option<YearMonth>,
    appointment_date: Option<NaiveDate>,
    resignation_date: Option<NaiveDate>,
    correspondence_postcode: Option<String>,
    record_month: YearMonth,
    registry_corporate: bool,
}

/// Normalized company records as CSV with a fixed header; SIC codes joined by `;`.
pub fn write_companies<W: io::Write>(out: W, recs: &[CompanySnapshotRecord]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    for r in recs {
        w.serialize(CompanyRow {
            company_id: r.company_id.clone(),
            name: r.name.clone(),
            status: r.status.clone(),
            incorporation_date: r.incorporation_date,
            dissolution_date: r.dissolution_date,
            sic_codes: r
                .sic_codes
                .iter()
                .map(SicCode::as_str)
                .collect::<Vec<_>>()
                .join(";"),
            postcode: r.postcode.clone(),
            snapshot_month: r.snapshot_month,
        })?;
    }
    w.flush().map_err(|e| IngestError::Csv(e.into()))?;
    Ok(())
}

pub fn read_companies<R: io::Read>(input: R) -> Result<Vec<CompanySnapshotRecord>, IngestError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize::<CompanyRow>() {
        let row = row?;
        let sic_codes = row
            .sic_codes
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| {
                SicCode::from_sic_text(s)
                    .map_err(IngestError::Normalized)?
                    .ok_or_else(|| IngestError::Normalized(format!("empty sic code in {s:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(CompanySnapshotRecord {
            company_id: row.company_id,
            name: row.name,
            status: row.status,
            incorporation_date: row.incorporation_date,
            dissolution_date: row.dissolution_date,
            sic_codes,
            postcode: row.postcode,
            snapshot_month: row.snapshot_month,
        });
    }
    Ok(out)
}

pub fn write_officers<W: io::Write>(out: W, recs: &[OfficerEventRecord]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    for r in recs {
        w.serialize(OfficerRow {
            officer_raw_name: r.officer_raw_name.clone(),
            surname: r.name.surname.clone(),
            forenames: r.name.forenames.clone(),
            company_id: r.company_id.clone(),
            birth_month: r.birth_month,
            appointment_date: r.appointment_date,
            resignation_date: r.resignation_date,
            correspondence_postcode: r.correspondence_postcode.clone(),
            record_month: r.record_month,
            registry_corporate: r.registry_corporate,
        })?;
    }
    w.flush().map_err(|e| IngestError::Csv(e.into()))?;
    Ok(())
}

pub fn read_officers<R: io::Read>(input: R) -> Result<Vec<OfficerEventRecord>, IngestError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize::<OfficerRow>() {
        let row = row?;
        out.push(OfficerEventRecord {
            officer_raw_name: row.officer_raw_name,
            name: NormalizedName {
                surname: row.surname,
                forenames: row.forenames,
            },
            company_id: row.company_id,
            birth_month: row.birth_month,
            appointment_date: row.appointment_date,
            resignation_date: row.resignation_date,
            correspondence_postcode: row.correspondence_postcode,
            record_month: row.record_month,
            registry_corporate: row.registry_corporate,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ym(s: &str) -> YearMonth {
        s.parse().unwrap()
    }

    const COMPANY_HEADER: &str =
        "CompanyName, CompanyNumber,CompanyStatus,IncorporationDate,DissolutionDate,SICCode.SicText_1,RegAddress.PostCode\n";

    #[test]
    fn well_formed_company_row() {
        let text = format!(
            "{COMPANY_HEADER}acme  widgets,00000001,Active,2015-04-01,,62020 - IT consultancy,EC1A 1BB\n"
        );
        let p = parse_company_snapshot(text.as_bytes(), ym("2020-03"), &SchemaMap::default(), "f").unwrap();
        assert!(p.rejections.is_empty());
        let r = &p.records[0];
        assert_eq!(r.company_id, "00000001");
        assert_eq!(r.name, "ACME WIDGETS");
        assert_eq!(r.snapshot_month, ym("2020-03"));
        assert_eq!(r.postcode.as_deref(), Some("EC1A 1BB"));
        assert_eq!(r.sic_codes[0].section(), Some('J'));
    }

    #[test]
    fn empty_postcode_is_absent_not_rejected() {
        let text = format!("{COMPANY_HEADER}X,00000002,Active,,,,\n");
        let p = parse_company_snapshot(text.as_bytes(), ym("2020-03"), &SchemaMap::default(), "f").unwrap();
        assert!(p.rejections.is_empty());
        assert_eq!(p.records[0].postcode, None);
        assert!(p.records[0].sic_codes.is_empty());
    }

    #[test]
    fn impossible_date_goes_to_rejection_log() {
        let schema = SchemaMap::parse("dates = dmy").unwrap();
        let text = format!("{COMPANY_HEADER}X,00000003,Active,31/02/2020,,,\nY,00000004,Active,28/02/2020,,,\n");
        let p = parse_company_snapshot(text.as_bytes(), ym("2020-03"), &schema, "companies_2020-03.csv").unwrap();
        assert_eq!(p.records.len(), 1);
        assert_eq!(p.rejections.len(), 1);
        assert_eq!(p.rejections[0].row, 1);
        assert!(p.rejections[0].reason.contains("invalid date"));
    }

    #[test]
    fn missing_mandatory_column_is_fatal() {
        let text = "CompanyName,CompanyStatus\nX,Active\n";
        let err = parse_company_snapshot(text.as_bytes(), ym("2020-03"), &SchemaMap::default(), "f");
        assert!(matches!(err, Err(IngestError::MissingColumn { .. })));
    }

    const OFFICER_HEADER: &str = "Name,CompanyNumber,DateOfBirth,AppointmentDate,ResignationDate,PostCode,OfficerRole\n";

    #[test]
    fn officer_rows() {
        let text = format!(
            "{OFFICER_HEADER}\"SMITH, JOHN\",00000001,1989-01,2019-05-01,,SW1A 1AA,director\n\
             \"DOE, JANE\",00000001,,,,,director\n\
             \"ROE, RICHARD\",,1970-02,,,,director\n\
             \"POE, ED\",00000002,1970-02,2020-01-01,2019-01-01,,director\n"
        );
        let p = parse_officer_file(text.as_bytes(), ym("2020-03"), &SchemaMap::default(), "o").unwrap();
        assert_eq!(p.records.len(), 2);
        assert_eq!(p.records[0].birth_month, Some(ym("1989-01")));
        assert_eq!(p.records[0].name.first_forename(), "JOHN");
        assert_eq!(p.records[1].birth_month, None);
        let reasons: Vec<_> = p.rejections.iter().map(|r| (r.row, r.reason.as_str())).collect();
        assert_eq!(
            reasons,
            vec![(3, "empty company id"), (4, "resignation before appointment")]
        );
    }

    fn officer(name: &str, corporate: bool) -> OfficerEventRecord {
        OfficerEventRecord {
            officer_raw_name: name.into(),
            name: normalize_name(name),
            company_id: "1".into(),
            birth_month: None,
            appointment_date: None,
            resignation_date: None,
            correspondence_postcode: None,
            record_month: ym("2020-01"),
            registry_corporate: corporate,
        }
    }

    #[test]
    fn corporate_words_match_whole_tokens() {
        assert!(is_corporate_name(&normalize_name("ACME HOLDINGS")));
        assert!(is_corporate_name(&normalize_name("Acme Ltd.")));
        assert!(!is_corporate_name(&normalize_name("ACME LTDX")));
        assert!(!is_corporate_name(&normalize_name("SERVICESON, JOHN")));
        assert!(!is_corporate_name(&normalize_name("JANE DOE")));
        assert!(is_corporate_name(&normalize_name("NON-DESTRUCTIVE TESTING")));
    }

    #[test]
    fn partition_takes_union_of_signals() {
        let recs = vec![
            officer("ACME HOLDINGS", false),
            officer("JANE DOE", false),
            officer("NOMINEE ONE", true),
            officer("JOHN SMITH", false),
        ];
        let p = filter_corporate_officers(recs);
        assert_eq!(p.persons.len(), 2);
        assert_eq!(p.companies.len(), 2);
        assert!((p.corporate_share - 0.5).abs() < 1e-12);
    }

    #[test]
    fn normalized_files_round_trip() {
        let text = format!(
            "{COMPANY_HEADER}acme,00000001,Active,2015-04-01,,62020 - IT,EC1A 1BB\n"
        );
        let recs = parse_company_snapshot(text.as_bytes(), ym("2020-03"), &SchemaMap::default(), "f")
            .unwrap()
            .records;
        let mut buf = Vec::new();
        write_companies(&mut buf, &recs).unwrap();
        assert_eq!(read_companies(buf.as_slice()).unwrap(), recs);

        let orecs = vec![officer("SMITH, JOHN", false)];
        let mut buf = Vec::new();
        write_officers(&mut buf, &orecs).unwrap();
        assert_eq!(read_officers(buf.as_slice()).unwrap(), orecs);
    }
}
