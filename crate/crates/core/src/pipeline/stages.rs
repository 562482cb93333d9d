use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{Measure, PipelineConfig};
use super::{create, report, write_json, PipelineError, Stage};
use crate::breaks::{run_battery, seasonally_adjust, write_battery_csv};
use crate::calendar::YearMonth;
use crate::excess::{quarterly_rollup, run_counterfactual, CounterfactualConfig, ExcessReport};
use crate::ingest::{
    filter_corporate_officers, load_archive, read_companies, read_officers, write_companies, write_officers,
    write_rejections, CompanySnapshotRecord, OfficerEventRecord, SchemaMap,
};
use crate::officers::{enrich_persons, GenderProvider, GenderProviderTable, PostcodeRegions, Region, ResolvedPerson};
use crate::selection::{auto_sarima, AutoOptions};
use crate::status::{aggregate_events, build_timelines, write_events, EventKind, EventSeries, FirmTimeline, TimelineBuild};
use crate::ts::{forecast_with_levels, MonthlySeries, SarimaSpec};

pub(crate) const LONDON: &str = "Greater London";

fn fail(stage: Stage, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

fn open(stage: Stage, path: &Path) -> Result<BufReader<fs::File>, PipelineError> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| fail(stage, format!("{}: {e}", path.display())))
}

/// Key used for a (stratum, measure) series in file names and battery rows.
pub fn series_key(stratum: &str, measure: Measure) -> String {
    format!("{stratum}/{measure}")
}

fn file_stem(key: &str) -> String {
    key.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn sorted_files(dir: &Path, prefix: &str) -> Result<Vec<PathBuf>, PipelineError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| PipelineError::io(dir, e))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(prefix) && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn regions(config: &PipelineConfig, stage: Stage) -> Result<PostcodeRegions, PipelineError> {
    match &config.postcode_map {
        Some(p) => PostcodeRegions::load(p).map_err(|e| fail(stage, e)),
        None => Ok(PostcodeRegions::default()),
    }
}

/// Input files and parameters that determine a stage's outputs.
pub(super) fn inputs(config: &PipelineConfig, stage: Stage) -> Result<(Vec<PathBuf>, serde_json::Value), PipelineError> {
    let out = |s: Stage, f: &str| config.output.join(s.name()).join(f);
    let mut files = Vec::new();
    let params = match stage {
        Stage::Ingest => {
            files.extend(sorted_files(&config.snapshots, "companies_")?);
            if let Some(d) = &config.officers {
                files.extend(sorted_files(d, "officers_")?);
            }
            files.extend(config.schema.iter().cloned());
            json!({})
        }
        Stage::Diff | Stage::Series => {
            files.push(out(Stage::Ingest, "companies.csv"));
            files.push(out(Stage::Ingest, "summary.json"));
            files.extend(config.postcode_map.iter().cloned());
            json!({ "register_start": config.register_start })
        }
        Stage::Resolve => {
            files.push(out(Stage::Ingest, "officers.csv"));
            files.extend(config.gender_tables.iter().cloned());
            files.extend(config.postcode_map.iter().cloned());
            json!({ "fuzzy_threshold": config.fuzzy_threshold, "cutoff": config.pre_covid.end })
        }
        Stage::Fit => {
            files.push(out(Stage::Series, "series.csv"));
            json!({
                "train": config.train, "eval": config.eval, "strata": config.strata,
                "measures": config.measures, "bounds": config.bounds, "period": config.period,
                "levels": config.levels,
            })
        }
        Stage::Excess => {
            files.push(out(Stage::Series, "series.csv"));
            files.push(out(Stage::Fit, "models.json"));
            json!({
                "train": config.train, "eval": config.eval, "levels": config.levels,
                "convention": config.convention, "parameter_uncertainty": config.parameter_uncertainty,
                "period": config.period,
            })
        }
        Stage::Breaks => {
            files.push(out(Stage::Series, "series.csv"));
            json!({
                "breaks": config.breaks, "strata": config.strata, "measures": config.measures,
                "seasonal_adjustment": config.seasonal_adjustment, "train": config.train,
                "period": config.period,
            })
        }
        Stage::Report => {
            files.push(out(Stage::Diff, "firms.csv"));
            files.push(out(Stage::Resolve, "persons.jsonl"));
            files.push(out(Stage::Series, "series.csv"));
            files.push(out(Stage::Excess, "reports.json"));
            json!({
                "pre_covid": config.pre_covid, "during_covid": config.during_covid,
                "strata": config.strata, "winsor_quantile": config.winsor_quantile,
            })
        }
    };
    for f in &files {
        if !f.is_file() {
            return Err(fail(stage, format!("missing input {}", f.display())));
        }
    }
    Ok((files, params))
}

pub(super) fn run(config: &PipelineConfig, stage: Stage, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    match stage {
        Stage::Ingest => {
            let schema = match &config.schema {
                Some(p) => SchemaMap::load(p).map_err(|e| fail(stage, e))?,
                None => SchemaMap::default(),
            };
            let (_, files) = ingest_archive(&config.snapshots, config.officers.as_deref(), &schema, dir)?;
            Ok(files)
        }
        Stage::Diff => run_diff(config, dir),
        Stage::Series => run_series(config, dir),
        Stage::Resolve => run_resolve(config, dir),
        Stage::Fit => run_fit(config, dir),
        Stage::Excess => run_excess(config, dir),
        Stage::Breaks => run_breaks(config, dir),
        Stage::Report => report::run_report(config, dir),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub months: Vec<YearMonth>,
    pub company_rows: usize,
    pub officer_rows: usize,
    pub corporate_officer_rows: usize,
    /// Share of officer rows removed as corporate bodies.
    pub corporate_share: f64,
    pub rejected_rows: usize,
}

/// Loads the archive and writes `companies.csv`, `officers.csv`,
/// `corporate_officers.csv`, `rejections.jsonl` and `summary.json` to `out`.
pub fn ingest_archive(
    snapshots: &Path,
    officers: Option<&Path>,
    schema: &SchemaMap,
    out: &Path,
) -> Result<(IngestSummary, Vec<PathBuf>), PipelineError> {
    let stage = Stage::Ingest;
    let archive = load_archive(snapshots, officers, schema, None).map_err(|e| fail(stage, e))?;
    let companies: Vec<CompanySnapshotRecord> = archive.companies.iter().flatten().cloned().collect();
    let officer_rows: Vec<OfficerEventRecord> = archive.officers.iter().flatten().cloned().collect();
    let n_officers = officer_rows.len();
    let partition = filter_corporate_officers(officer_rows);
    let summary = IngestSummary {
        months: archive.months.clone(),
        company_rows: companies.len(),
        officer_rows: n_officers,
        corporate_officer_rows: partition.companies.len(),
        corporate_share: partition.corporate_share,
        rejected_rows: archive.rejections.len(),
    };
    let files = [
        out.join("companies.csv"),
        out.join("officers.csv"),
        out.join("corporate_officers.csv"),
        out.join("rejections.jsonl"),
        out.join("summary.json"),
    ];
    let mut w = create(&files[0])?;
    write_companies(&mut w, &companies).map_err(|e| fail(stage, e))?;
    w.flush().map_err(|e| PipelineError::io(&files[0], e))?;
    for (path, recs) in [(&files[1], &partition.persons), (&files[2], &partition.companies)] {
        let mut w = create(path)?;
        write_officers(&mut w, recs).map_err(|e| fail(stage, e))?;
        w.flush().map_err(|e| PipelineError::io(path, e))?;
    }
    let mut w = create(&files[3])?;
    write_rejections(&mut w, &archive.rejections)
        .and_then(|_| w.flush())
        .map_err(|e| PipelineError::io(&files[3], e))?;
    write_json(&files[4], &summary)?;
    log::info!(
        "ingested {} months, {} company rows, {} officer rows ({} rejected rows)",
        summary.months.len(),
        summary.company_rows,
        summary.officer_rows,
        summary.rejected_rows
    );
    Ok((summary, files.to_vec()))
}

fn read_summary(stage: Stage, path: &Path) -> Result<IngestSummary, PipelineError> {
    serde_json::from_reader(open(stage, path)?).map_err(|e| fail(stage, format!("{}: {e}", path.display())))
}

/// Timelines from a normalized `companies.csv` and the archive months.
pub(crate) fn timelines_from(
    stage: Stage,
    companies: &Path,
    months: &[YearMonth],
    register_start: Option<YearMonth>,
) -> Result<TimelineBuild, PipelineError> {
    let recs = read_companies(open(stage, companies)?).map_err(|e| fail(stage, e))?;
    let index: BTreeMap<YearMonth, usize> = months.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    let mut snapshots = vec![Vec::new(); months.len()];
    for r in recs {
        let i = *index
            .get(&r.snapshot_month)
            .ok_or_else(|| fail(stage, format!("record month {} outside the archive", r.snapshot_month)))?;
        snapshots[i].push(r);
    }
    Ok(build_timelines(months, &snapshots, register_start))
}

/// Per-firm attributes used by the report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirmRow {
    pub company_id: String,
    pub first_month: YearMonth,
    /// Month of the firm's Opened event, if it opened inside the archive.
    pub opened: Option<YearMonth>,
    /// Month of the firm's first Closed event.
    pub closed: Option<YearMonth>,
    pub section: Option<String>,
    pub postcode: Option<String>,
    pub region: String,
    /// Registered address in Greater London.
    pub london: bool,
}

pub fn firm_rows(timelines: &[FirmTimeline], regions: &PostcodeRegions) -> Vec<FirmRow> {
    timelines
        .iter()
        .map(|t| {
            let first = |kind| t.events.iter().find(|e| e.kind == kind).map(|e| e.month);
            let region = t
                .profile
                .postcode
                .as_deref()
                .map_or(Region::Excluded, |p| regions.map_region(p));
            FirmRow {
                company_id: t.company_id.clone(),
                first_month: t.first_month,
                opened: first(EventKind::Opened),
                closed: first(EventKind::Closed),
                section: t.profile.sic_section().map(String::from),
                postcode: t.profile.postcode.clone(),
                london: region.name() == Some(LONDON),
                region: region.to_string(),
            }
        })
        .collect()
}

pub fn write_firms<W: Write>(out: W, firms: &[FirmRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for f in firms {
        w.serialize(f)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_firms<R: std::io::Read>(input: R) -> csv::Result<Vec<FirmRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

fn run_diff(config: &PipelineConfig, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let stage = Stage::Diff;
    let ingest = config.output.join(Stage::Ingest.name());
    let summary = read_summary(stage, &ingest.join("summary.json"))?;
    let build = timelines_from(stage, &ingest.join("companies.csv"), &summary.months, config.register_start)?;
    let regions = regions(config, stage)?;
    let files = vec![dir.join("events.csv"), dir.join("firms.csv"), dir.join("rejections.jsonl")];
    let mut w = create(&files[0])?;
    write_events(&mut w, &build.events()).map_err(|e| fail(stage, e))?;
    w.flush().map_err(|e| PipelineError::io(&files[0], e))?;
    let mut w = create(&files[1])?;
    write_firms(&mut w, &firm_rows(&build.timelines, &regions)).map_err(|e| fail(stage, e))?;
    w.flush().map_err(|e| PipelineError::io(&files[1], e))?;
    let mut w = create(&files[2])?;
    write_rejections(&mut w, &build.rejections)
        .and_then(|_| w.flush())
        .map_err(|e| PipelineError::io(&files[2], e))?;
    Ok(files)
}

/// Event series for the whole register (`ALL`), each SIC section
/// (`UNKNOWN` when a firm has no code), and the Greater London subset of
/// each (`ALL/London`, `G/London`, ...), sorted by stratum name.
pub fn build_series(build: &TimelineBuild, months: &[YearMonth], regions: &PostcodeRegions) -> Vec<EventSeries> {
    let Some(&start) = months.first() else {
        return Vec::new();
    };
    let n = months.len();
    let london = |t: &FirmTimeline| {
        t.profile
            .postcode
            .as_deref()
            .is_some_and(|p| regions.map_region(p).name() == Some(LONDON))
    };
    let section = |t: &FirmTimeline| t.profile.sic_section().map_or("UNKNOWN".to_string(), String::from);
    let mut out = aggregate_events(&build.timelines, start, n, |_| Some("ALL".to_string()));
    out.extend(aggregate_events(&build.timelines, start, n, |t| Some(section(t))));
    for all in [true, false] {
        let series = aggregate_events(&build.timelines, start, n, |t| {
            Some(match (london(t), all) {
                (false, _) => String::new(),
                (true, true) => "ALL/London".to_string(),
                (true, false) => format!("{}/London", section(t)),
            })
        });
        out.extend(series.into_iter().filter(|s| !s.stratum.is_empty()));
    }
    out.sort_by(|a, b| a.stratum.cmp(&b.stratum));
    out
}

/// Long format: `stratum,month,opened,closed,reopened,net_active,no_change`.
pub fn write_series_table<W: Write>(out: W, series: &[EventSeries]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stratum", "month", "opened", "closed", "reopened", "net_active", "no_change"])?;
    for s in series {
        for (i, m) in s.months().enumerate() {
            w.write_record([
                s.stratum.clone(),
                m.to_string(),
                s.opened[i].to_string(),
                s.closed[i].to_string(),
                s.reopened[i].to_string(),
                s.net_active[i].to_string(),
                s.no_change[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct SeriesRow {
    #[serde(default)]
    stratum: String,
    month: YearMonth,
    opened: u64,
    closed: u64,
    reopened: u64,
    net_active: i64,
    no_change: u64,
}

/// Reads [`write_series_table`] output. Months must be contiguous within
/// each stratum. Per-stratum files without a `stratum` column load as one
/// series with an empty stratum name.
pub fn read_series_table<R: std::io::Read>(input: R) -> Result<Vec<EventSeries>, String> {
    let mut out: Vec<EventSeries> = Vec::new();
    for row in csv::Reader::from_reader(input).deserialize::<SeriesRow>() {
        let r = row.map_err(|e| e.to_string())?;
        match out.last_mut() {
            Some(s) if s.stratum == r.stratum => {
                if r.month != s.start.add_months(s.len() as i64) {
                    return Err(format!("stratum {}: month {} out of sequence", r.stratum, r.month));
                }
                s.opened.push(r.opened);
                s.closed.push(r.closed);
                s.reopened.push(r.reopened);
                s.net_active.push(r.net_active);
                s.no_change.push(r.no_change);
            }
            _ => out.push(EventSeries {
                stratum: r.stratum,
                start: r.month,
                opened: vec![r.opened],
                closed: vec![r.closed],
                reopened: vec![r.reopened],
                no_change: vec![r.no_change],
                net_active: vec![r.net_active],
            }),
        }
    }
    Ok(out)
}

fn run_series(config: &PipelineConfig, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let stage = Stage::Series;
    let ingest = config.output.join(Stage::Ingest.name());
    let summary = read_summary(stage, &ingest.join("summary.json"))?;
    let build = timelines_from(stage, &ingest.join("companies.csv"), &summary.months, config.register_start)?;
    let series = build_series(&build, &summary.months, &regions(config, stage)?);
    let path = dir.join("series.csv");
    let mut w = create(&path)?;
    write_series_table(&mut w, &series).map_err(|e| fail(stage, e))?;
    w.flush().map_err(|e| PipelineError::io(&path, e))?;
    Ok(vec![path])
}

fn load_series(config: &PipelineConfig, stage: Stage) -> Result<Vec<EventSeries>, PipelineError> {
    let path = config.output.join(Stage::Series.name()).join("series.csv");
    read_series_table(open(stage, &path)?).map_err(|e| fail(stage, format!("{}: {e}", path.display())))
}

/// Configured (stratum, measure) pairs with their monthly series, or the
/// reason a series is unavailable.
fn selected_series(config: &PipelineConfig, all: &[EventSeries]) -> Vec<(String, Measure, Result<MonthlySeries, String>)> {
    let mut out = Vec::new();
    for stratum in &config.strata {
        for &measure in &config.measures {
            let s = all
                .iter()
                .find(|s| &s.stratum == stratum)
                .ok_or_else(|| format!("no firms in stratum {stratum}"))
                .and_then(|s| MonthlySeries::new(s.start, measure.values(s), config.period).map_err(|e| e.to_string()));
            out.push((stratum.clone(), measure, s));
        }
    }
    out
}

/// Persons from the normalized officer rows, with gender and region.
pub fn resolve_persons(
    records: &[OfficerEventRecord],
    fuzzy_threshold: usize,
    gender_tables: &[GenderProviderTable],
    regions: &PostcodeRegions,
) -> Vec<ResolvedPerson> {
    let mut persons = crate::officers::resolve_identities(records, fuzzy_threshold);
    let providers: Vec<&dyn GenderProvider> = gender_tables.iter().map(|t| t as &dyn GenderProvider).collect();
    enrich_persons(&mut persons, &providers, regions);
    persons
}

pub fn read_persons<R: std::io::Read>(input: R) -> Result<Vec<ResolvedPerson>, String> {
    BufReader::new(input)
        .lines()
        .map(|l| {
            let l = l.map_err(|e| e.to_string())?;
            serde_json::from_str(&l).map_err(|e| e.to_string())
        })
        .collect()
}

fn run_resolve(config: &PipelineConfig, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let stage = Stage::Resolve;
    let src = config.output.join(Stage::Ingest.name()).join("officers.csv");
    let records = read_officers(open(stage, &src)?).map_err(|e| fail(stage, e))?;
    let tables = config
        .gender_tables
        .iter()
        .map(|p| GenderProviderTable::load(p).map_err(|e| fail(stage, e)))
        .collect::<Result<Vec<_>, _>>()?;
    let persons = resolve_persons(&records, config.fuzzy_threshold, &tables, &regions(config, stage)?);
    let files = vec![dir.join("persons.jsonl"), dir.join("persons.csv")];
    let mut w = create(&files[0])?;
    for p in &persons {
        serde_json::to_writer(&mut w, p).map_err(|e| fail(stage, e))?;
        w.write_all(b"\n").map_err(|e| PipelineError::io(&files[0], e))?;
    }
    w.flush().map_err(|e| PipelineError::io(&files[0], e))?;
    let mut w = create(&files[1])?;
    report::write_persons_csv(&mut w, &persons, config.pre_covid.end).map_err(|e| fail(stage, e))?;
    w.flush().map_err(|e| PipelineError::io(&files[1], e))?;
    log::info!("resolved {} officer rows into {} persons", records.len(), persons.len());
    Ok(files)
}

/// Outcome of model selection for one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub stratum: String,
    pub measure: Measure,
    pub spec: Option<SarimaSpec>,
    pub label: Option<String>,
    pub aicc: Option<f64>,
    pub models_evaluated: usize,
    /// Full parameter dump of the selected model.
    pub fitted: Option<serde_json::Value>,
    pub error: Option<String>,
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn run_fit(config: &PipelineConfig, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let stage = Stage::Fit;
    let all = load_series(config, stage)?;
    let horizon = config.eval.end.months_since(config.train.end).max(1) as usize;
    let opts = AutoOptions {
        bounds: config.bounds,
        ..AutoOptions::default()
    };
    let selected = selected_series(config, &all);
    let results: Vec<_> = selected
        .par_iter()
        .map(|(stratum, measure, series)| {
            let outcome = series.clone().and_then(|s| {
                let train = s.window(config.train).map_err(|e| e.to_string())?;
                let auto = auto_sarima(&train, &opts).map_err(|e| e.to_string())?;
                let fc = forecast_with_levels(&auto.search.best, horizon, &config.levels).map_err(|e| e.to_string())?;
                Ok((auto, fc))
            });
            (stratum, *measure, outcome)
        })
        .collect();
    let models_path = dir.join("models.json");
    let forecasts_path = dir.join("forecasts.csv");
    let mut files = vec![models_path.clone(), forecasts_path.clone()];
    let mut records = Vec::new();
    let mut fw = csv::Writer::from_writer(create(&forecasts_path)?);
    let mut header = vec!["stratum".to_string(), "measure".into(), "month".into(), "horizon".into(), "forecast".into()];
    for l in &config.levels {
        header.push(format!("lower{l}"));
        header.push(format!("upper{l}"));
    }
    fw.write_record(&header).map_err(|e| fail(stage, e))?;
    for (stratum, measure, outcome) in results {
        let key = series_key(stratum, measure);
        match outcome {
            Ok((auto, fc)) => {
                let best = &auto.search.best;
                for h in 0..fc.horizon() {
                    let mut row = vec![
                        stratum.clone(),
                        measure.to_string(),
                        fc.start.add_months(h as i64).to_string(),
                        (h + 1).to_string(),
                        fmt(fc.mean[h]),
                    ];
                    for iv in &fc.intervals {
                        row.push(fmt(iv.lower[h]));
                        row.push(fmt(iv.upper[h]));
                    }
                    fw.write_record(&row).map_err(|e| fail(stage, e))?;
                }
                let trace = dir.join("traces").join(format!("{}.csv", file_stem(&key)));
                let mut tw = create(&trace)?;
                auto.search
                    .trace
                    .write_csv(&mut tw)
                    .and_then(|_| tw.flush())
                    .map_err(|e| PipelineError::io(&trace, e))?;
                files.push(trace);
                records.push(ModelRecord {
                    stratum: stratum.clone(),
                    measure,
                    spec: Some(best.spec),
                    label: Some(best.spec.to_string()),
                    aicc: Some(best.aicc),
                    models_evaluated: auto.search.trace.visited.len(),
                    fitted: Some(best.dump()),
                    error: None,
                });
            }
            Err(e) => {
                log::warn!("{key}: no model: {e}");
                records.push(ModelRecord {
                    stratum: stratum.clone(),
                    measure,
                    spec: None,
                    label: None,
                    aicc: None,
                    models_evaluated: 0,
                    fitted: None,
                    error: Some(e),
                });
            }
        }
    }
    fw.flush().map_err(|e| PipelineError::io(&forecasts_path, e))?;
    write_json(&models_path, &records)?;
    Ok(files)
}

fn run_excess(config: &PipelineConfig, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let stage = Stage::Excess;
    let all = load_series(config, stage)?;
    let models_path = config.output.join(Stage::Fit.name()).join("models.json");
    let models: Vec<ModelRecord> =
        serde_json::from_reader(open(stage, &models_path)?).map_err(|e| fail(stage, format!("{}: {e}", models_path.display())))?;
    let base = CounterfactualConfig {
        train: config.train,
        eval: config.eval,
        levels: config.levels.clone(),
        convention: config.convention,
        parameter_uncertainty: config.parameter_uncertainty,
        ..CounterfactualConfig::default()
    };
    let results: Vec<(String, Result<ExcessReport, String>)> = models
        .par_iter()
        .map(|m| {
            let key = series_key(&m.stratum, m.measure);
            let outcome = match (&m.spec, &m.error) {
                (Some(spec), _) => all
                    .iter()
                    .find(|s| s.stratum == m.stratum)
                    .ok_or_else(|| format!("no firms in stratum {}", m.stratum))
                    .and_then(|s| MonthlySeries::new(s.start, m.measure.values(s), config.period).map_err(|e| e.to_string()))
                    .and_then(|series| {
                        let cfg = CounterfactualConfig {
                            spec: Some(*spec),
                            ..base.clone()
                        };
                        run_counterfactual(&key, &series, &cfg).map_err(|e| e.to_string())
                    }),
                (None, e) => Err(format!("no model: {}", e.as_deref().unwrap_or("unknown"))),
            };
            (key, outcome)
        })
        .collect();
    let mut files = vec![dir.join("excess.csv"), dir.join("quarterly.csv"), dir.join("reports.json"), dir.join("summary.json")];
    let mut monthly = csv::Writer::from_writer(create(&files[0])?);
    let mut quarterly = csv::Writer::from_writer(create(&files[1])?);
    let mut head = vec!["series".to_string(), "month".into(), "horizon".into(), "actual".into(), "forecast".into(), "excess".into()];
    let mut qhead = vec![
        "series".to_string(),
        "year".into(),
        "quarter".into(),
        "months".into(),
        "partial".into(),
        "actual".into(),
        "forecast".into(),
        "excess".into(),
    ];
    for l in &config.levels {
        head.extend([format!("lower{l}"), format!("upper{l}")]);
        qhead.extend([format!("lower{l}"), format!("upper{l}")]);
    }
    head.push("cumulative".into());
    for l in &config.levels {
        head.extend([format!("cumulative_lower{l}"), format!("cumulative_upper{l}")]);
    }
    monthly.write_record(&head).map_err(|e| fail(stage, e))?;
    quarterly.write_record(&qhead).map_err(|e| fail(stage, e))?;
    let mut reports = Vec::new();
    let mut summary = Vec::new();
    for (key, outcome) in results {
        match outcome {
            Ok(r) => {
                for m in &r.months {
                    let mut row = vec![
                        key.clone(),
                        m.month.to_string(),
                        m.horizon.to_string(),
                        fmt(m.actual),
                        fmt(m.forecast),
                        fmt(m.excess),
                    ];
                    row.extend(m.bounds.iter().flat_map(|b| [fmt(b.lower), fmt(b.upper)]));
                    row.push(fmt(m.cumulative));
                    row.extend(m.cumulative_bounds.iter().flat_map(|b| [fmt(b.lower), fmt(b.upper)]));
                    monthly.write_record(&row).map_err(|e| fail(stage, e))?;
                }
                for q in quarterly_rollup(&r) {
                    let mut row = vec![
                        key.clone(),
                        q.year.to_string(),
                        q.quarter.to_string(),
                        q.months.to_string(),
                        q.partial.to_string(),
                        fmt(q.actual),
                        fmt(q.forecast),
                        fmt(q.excess),
                    ];
                    row.extend(q.bounds.iter().flat_map(|b| [fmt(b.lower), fmt(b.upper)]));
                    quarterly.write_record(&row).map_err(|e| fail(stage, e))?;
                }
                let path = dir.join("reports").join(format!("{}.csv", file_stem(&key)));
                r.write_csv(create(&path)?).map_err(|e| fail(stage, e))?;
                files.push(path);
                let last = r.months.last();
                summary.push(json!({
                    "series": key,
                    "model": r.model.spec.to_string(),
                    "aicc": r.model.aicc,
                    "convention": r.convention.label(),
                    "total": r.total(),
                    "cumulative_bounds": last.map(|m| &m.cumulative_bounds),
                }));
                reports.push(r);
            }
            Err(e) => {
                log::warn!("{key}: {e}");
                summary.push(json!({ "series": key, "error": e }));
            }
        }
    }
    monthly.flush().map_err(|e| PipelineError::io(&files[0], e))?;
    quarterly.flush().map_err(|e| PipelineError::io(&files[1], e))?;
    write_json(&files[2], &reports)?;
    write_json(&files[3], &summary)?;
    files.sort();
    Ok(files)
}

fn run_breaks(config: &PipelineConfig, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let stage = Stage::Breaks;
    let all = load_series(config, stage)?;
    let mut named = Vec::new();
    let mut notes = Vec::new();
    for (stratum, measure, series) in selected_series(config, &all) {
        let key = series_key(&stratum, measure);
        match series {
            Ok(s) => {
                if config.seasonal_adjustment {
                    match seasonally_adjust(&s, config.train) {
                        Ok(adj) => {
                            named.push((key.clone(), s));
                            named.push((format!("{key} (seasonally adjusted)"), adj));
                            continue;
                        }
                        Err(e) => notes.push(json!({ "series": key, "note": format!("not seasonally adjusted: {e}") })),
                    }
                }
                named.push((key, s));
            }
            Err(e) => notes.push(json!({ "series": key, "note": e })),
        }
    }
    let rows = run_battery(&named, &config.breaks);
    let files = vec![dir.join("breaks.csv"), dir.join("notes.json")];
    let mut w = create(&files[0])?;
    write_battery_csv(&rows, &mut w).map_err(|e| fail(stage, e))?;
    w.flush().map_err(|e| PipelineError::io(&files[0], e))?;
    write_json(&files[1], &notes)?;
    Ok(files)
}
