use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{Measure, PipelineConfig};
use super::stages::{read_firms, read_persons, read_series_table, FirmRow};
use super::{create, write_json, PipelineError, Stage};
use crate::calendar::{MonthWindow, YearMonth};
use crate::excess::{Bounds, ExcessReport};
use crate::officers::{
    compute_age, elite_table, experience_samples, industry_experience, EliteTableRow, Gender, ResolvedPerson,
};
use crate::status::EventSeries;

/// Pre-Covid and during-Covid windows compared by the sector table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorWindows {
    pub pre: MonthWindow,
    pub during: MonthWindow,
}

/// One row of the sector summary. Officer columns describe the pre-Covid
/// window; ratio columns are during-Covid over pre-Covid monthly means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorRow {
    pub stratum: String,
    pub officers: usize,
    /// Women over women plus men; unresolved genders are left out.
    pub pct_female: Option<f64>,
    pub mean_age: Option<f64>,
    pub pct_under_35: Option<f64>,
    pub pct_over_60: Option<f64>,
    pub firms: Option<f64>,
    pub open: Option<f64>,
    pub close: Option<f64>,
    /// Change in the share of active firms registered in Greater London.
    pub london: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn window_values(series: &EventSeries, measure: Measure, window: MonthWindow) -> Option<Vec<f64>> {
    let values = measure.values(series);
    window
        .months()
        .map(|m| {
            let i = m.months_since(series.start);
            (0..values.len() as i64).contains(&i).then(|| values[i as usize])
        })
        .collect()
}

fn ratio(series: &EventSeries, measure: Measure, w: SectorWindows) -> Option<f64> {
    let pre = mean(window_values(series, measure, w.pre)?.into_iter())?;
    let during = mean(window_values(series, measure, w.during)?.into_iter())?;
    (pre != 0.0).then(|| during / pre)
}

fn london_share(all: &EventSeries, london: Option<&EventSeries>, window: MonthWindow) -> Option<f64> {
    let total = window_values(all, Measure::NetActive, window)?;
    let inside = match london {
        Some(s) => window_values(s, Measure::NetActive, window)?,
        None => vec![0.0; total.len()],
    };
    mean(total.iter().zip(&inside).filter(|(t, _)| **t > 0.0).map(|(t, l)| l / t))
}

/// Whether the person held an appointment at one of `firms` at some point
/// in `window`.
fn officer_in(person: &ResolvedPerson, firms: &HashSet<&str>, window: MonthWindow) -> bool {
    person.appointments.iter().any(|a| {
        firms.contains(a.company_id.as_str())
            && a.appointed <= window.end
            && a.resigned.is_none_or(|r| YearMonth::of_date(r) >= window.start)
    })
}

/// Sector summary rows for each stratum (`ALL` or a SIC section letter).
/// Strata without firms are left out and reported in the returned notes.
pub fn sector_table(
    strata: &[String],
    series: &[EventSeries],
    firms: &[FirmRow],
    persons: &[ResolvedPerson],
    windows: SectorWindows,
) -> (Vec<SectorRow>, Vec<String>) {
    let find = |name: &str| series.iter().find(|s| s.stratum == name);
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for stratum in strata {
        let members: HashSet<&str> = firms
            .iter()
            .filter(|f| stratum == "ALL" || f.section.as_deref() == Some(stratum.as_str()))
            .map(|f| f.company_id.as_str())
            .collect();
        let Some(s) = find(stratum).filter(|_| !members.is_empty()) else {
            notes.push(format!("stratum {stratum}: no firms, row omitted"));
            continue;
        };
        let officers: Vec<&ResolvedPerson> =
            persons.iter().filter(|p| officer_in(p, &members, windows.pre)).collect();
        let women = officers.iter().filter(|p| p.gender == Gender::Woman).count();
        let men = officers.iter().filter(|p| p.gender == Gender::Man).count();
        let ages: Vec<f64> = officers
            .iter()
            .filter_map(|p| p.key.birth_month)
            .filter_map(|b| compute_age(b, windows.pre.end).ok())
            .map(f64::from)
            .collect();
        let share = |pred: fn(f64) -> bool| mean(ages.iter().map(|&a| if pred(a) { 1.0 } else { 0.0 }));
        let london = find(&format!("{stratum}/London"));
        let london_ratio = london_share(s, london, windows.pre)
            .zip(london_share(s, london, windows.during))
            .and_then(|(pre, during)| (pre != 0.0).then(|| during / pre));
        rows.push(SectorRow {
            stratum: stratum.clone(),
            officers: officers.len(),
            pct_female: (women + men > 0).then(|| women as f64 / (women + men) as f64),
            mean_age: mean(ages.iter().copied()),
            pct_under_35: share(|a| a < 35.0),
            pct_over_60: share(|a| a > 60.0),
            firms: ratio(s, Measure::NetActive, windows),
            open: ratio(s, Measure::Opened, windows),
            close: ratio(s, Measure::Closed, windows),
            london: london_ratio,
        });
    }
    (rows, notes)
}

fn cell(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(String::new, |v| format!("{v:.decimals$}"))
}

pub fn write_sector_table<W: Write>(out: W, rows: &[SectorRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "stratum", "officers", "pct_female", "mean_age", "pct_under_35", "pct_over_60", "firms", "open", "close", "london",
    ])?;
    for r in rows {
        w.write_record([
            r.stratum.clone(),
            r.officers.to_string(),
            cell(r.pct_female, 2),
            cell(r.mean_age, 2),
            cell(r.pct_under_35, 2),
            cell(r.pct_over_60, 2),
            cell(r.firms, 2),
            cell(r.open, 2),
            cell(r.close, 2),
            cell(r.london, 2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Elite table with persons bucketed at the end of the pre-Covid window
/// and new firms being those whose opening falls in the Covid window.
pub fn elite_rows(persons: &[ResolvedPerson], firms: &[FirmRow], windows: SectorWindows) -> Vec<EliteTableRow> {
    let new: HashSet<&str> = firms
        .iter()
        .filter(|f| f.opened.is_some_and(|m| windows.during.contains(m)))
        .map(|f| f.company_id.as_str())
        .collect();
    elite_table(persons, windows.pre.end, windows.during, |id| new.contains(id))
}

pub fn write_elite_table<W: Write>(out: W, rows: &[EliteTableRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["prior_firms", "pre_pandemic_total", "created_during", "creation_percent"])?;
    for r in rows {
        w.write_record([
            r.bucket.to_string(),
            r.pre_pandemic_total.to_string(),
            r.created_during.to_string(),
            format!("{:.1}", r.creation_percent()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One month of excess plot data. Forecast and bounds are present only in
/// evaluation months.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub month: YearMonth,
    pub actual: f64,
    pub forecast: Option<f64>,
    pub bounds: Vec<Bounds>,
}

pub fn excess_plot_rows(actual: &crate::ts::MonthlySeries, report: &ExcessReport) -> Vec<PlotRow> {
    let by_month: HashMap<YearMonth, _> = report.months.iter().map(|m| (m.month, m)).collect();
    actual
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let month = actual.month_at(i);
            let m = by_month.get(&month);
            PlotRow {
                month,
                actual: v,
                forecast: m.map(|m| m.forecast),
                bounds: m.map(|m| forecast_bounds(m, report)).unwrap_or_default(),
            }
        })
        .collect()
}

/// Bounds on the forecast itself, recovered from the excess bounds.
fn forecast_bounds(m: &crate::excess::ExcessMonth, report: &ExcessReport) -> Vec<Bounds> {
    let h = m.horizon - 1;
    report
        .forecast
        .intervals
        .iter()
        .filter(|iv| h < iv.lower.len())
        .map(|iv| Bounds {
            level: iv.level,
            lower: iv.lower[h],
            upper: iv.upper[h],
        })
        .collect()
}

fn write_plot<W: Write>(out: W, rows: &[PlotRow], levels: &[f64]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["month".to_string(), "actual".into(), "forecast".into()];
    for l in levels {
        header.extend([format!("lower{l}"), format!("upper{l}")]);
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.month.to_string(), format!("{:.6}", r.actual), cell(r.forecast, 6)];
        for l in levels {
            let b = r.bounds.iter().find(|b| b.level == *l);
            rec.push(cell(b.map(|b| b.lower), 6));
            rec.push(cell(b.map(|b| b.upper), 6));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `person_id,first_forename,surname,birth_month,gender,region,provenance,ambiguous,firms,prior_firms_at_cutoff`.
pub fn write_persons_csv<W: Write>(out: W, persons: &[ResolvedPerson], cutoff: YearMonth) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "person_id",
        "first_forename",
        "surname",
        "birth_month",
        "gender",
        "region",
        "provenance",
        "ambiguous",
        "firms",
        "prior_firms_at_cutoff",
    ])?;
    for p in persons {
        w.write_record([
            p.person_id.clone(),
            p.key.first_forename.clone(),
            p.key.surname.clone(),
            p.key.birth_month.map(|m| m.to_string()).unwrap_or_default(),
            p.gender.to_string(),
            p.region.to_string(),
            format!("{:?}", p.provenance),
            p.ambiguous.to_string(),
            p.appointments.len().to_string(),
            p.prior_firm_count(cutoff.succ()).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn stage_err(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Stage {
        stage: Stage::Report,
        message: e.to_string(),
    }
}

fn reader(path: &Path) -> Result<std::io::BufReader<std::fs::File>, PipelineError> {
    std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|e| PipelineError::io(path, e))
}

pub(super) fn run_report(config: &PipelineConfig, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let root = &config.output;
    let firms = read_firms(reader(&root.join("diff/firms.csv"))?).map_err(stage_err)?;
    let persons = read_persons(reader(&root.join("resolve/persons.jsonl"))?).map_err(stage_err)?;
    let series = read_series_table(reader(&root.join("series/series.csv"))?).map_err(stage_err)?;
    let reports: Vec<ExcessReport> =
        serde_json::from_reader(reader(&root.join("excess/reports.json"))?).map_err(stage_err)?;
    let windows = SectorWindows {
        pre: config.pre_covid,
        during: config.during_covid,
    };
    let mut files = vec![
        dir.join("sector_table.csv"),
        dir.join("elite_table.csv"),
        dir.join("experience.csv"),
        dir.join("notes.json"),
    ];

    let (rows, mut notes) = sector_table(&config.strata, &series, &firms, &persons, windows);
    let mut w = create(&files[0])?;
    write_sector_table(&mut w, &rows).map_err(stage_err)?;
    w.flush().map_err(|e| PipelineError::io(&files[0], e))?;

    let mut w = create(&files[1])?;
    write_elite_table(&mut w, &elite_rows(&persons, &firms, windows)).map_err(stage_err)?;
    w.flush().map_err(|e| PipelineError::io(&files[1], e))?;

    let new_firms: HashMap<String, String> = firms
        .iter()
        .filter_map(|f| Some((f.company_id.clone(), f.section.clone()?)).filter(|_| f.opened.is_some()))
        .collect();
    let cells = industry_experience(&experience_samples(&persons, &new_firms), config.winsor_quantile);
    let mut w = csv::Writer::from_writer(create(&files[2])?);
    w.write_record(["section", "period", "n", "mean", "ci_low", "ci_high", "winsor_cap"])
        .map_err(stage_err)?;
    for c in cells.values() {
        w.write_record([
            c.section.clone(),
            c.period.to_string(),
            c.n.to_string(),
            format!("{:.4}", c.mean),
            format!("{:.4}", c.ci_low),
            format!("{:.4}", c.ci_high),
            format!("{:.4}", c.winsor_cap),
        ])
        .map_err(stage_err)?;
    }
    w.flush().map_err(|e| PipelineError::io(&files[2], e))?;

    for r in &reports {
        let Some((stratum, measure)) = r.stratum.rsplit_once('/') else {
            notes.push(format!("{}: not a stratum/measure key", r.stratum));
            continue;
        };
        let Ok(measure) = measure.parse::<Measure>() else {
            notes.push(format!("{}: unknown measure", r.stratum));
            continue;
        };
        let Some(s) = series.iter().find(|s| s.stratum == stratum) else {
            notes.push(format!("{}: no series", r.stratum));
            continue;
        };
        let actual = crate::ts::MonthlySeries::new(s.start, measure.values(s), config.period).map_err(stage_err)?;
        let path = dir.join("plots").join(format!("excess_{stratum}_{measure}.csv"));
        let mut w = create(&path)?;
        write_plot(&mut w, &excess_plot_rows(&actual, r), &r.levels).map_err(stage_err)?;
        w.flush().map_err(|e| PipelineError::io(&path, e))?;
        files.push(path);
    }
    write_json(&files[3], &json!({ "notes": notes }))?;
    files.sort();
    Ok(files)
}
