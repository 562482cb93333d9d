use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use firmcast::breaks::{run_battery, write_battery_csv, BatteryConfig};
use firmcast::calendar::{MonthWindow, YearMonth};
use firmcast::excess::{run_counterfactual, CounterfactualConfig, SignConvention};
use firmcast::fixture::{write_fixture, FixtureSpec};
use firmcast::ingest::{read_officers, SchemaMap};
use firmcast::officers::{elite_table, GenderProviderTable, PostcodeRegions};
use firmcast::pipeline::{
    firm_rows, ingest_archive, read_series_table, resolve_persons, run_pipeline, write_elite_table, write_firms, write_persons_csv,
    IngestSummary, Measure, PipelineConfig, PipelineError, Stage, StageStatus,
};
use firmcast::selection::{auto_sarima, AutoOptions, SearchBounds};
use firmcast::status::{aggregate_events, build_timelines, write_events, write_series, FirmTimeline};
use firmcast::ts::{forecast_with_levels, MonthlySeries};

#[derive(Parser)]
#[command(name = "firmcast", version, about = "Firm lifecycle series and SARIMA counterfactuals from registry snapshots")]
struct Cli {
    /// Seed recorded in the manifest and used by `fixture`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Pipeline configuration; runs every stage up to this one.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize snapshot and officer files.
    Ingest {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long, required_unless_present = "config")]
        snapshots: Option<PathBuf>,
        #[arg(long)]
        officers: Option<PathBuf>,
        #[arg(long, required_unless_present = "config")]
        out: Option<PathBuf>,
        #[arg(long)]
        schema_map: Option<PathBuf>,
    },
    /// Status transitions and stratified event series.
    Diff {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Output directory of `ingest`.
        #[arg(long, required_unless_present = "config")]
        normalized: Option<PathBuf>,
        #[arg(long, required_unless_present = "config")]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "none")]
        strata: Vec<Stratifier>,
        #[arg(long)]
        postcode_map: Option<PathBuf>,
    },
    /// Resolve officer identities and build the elite table.
    Resolve {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Output directory of `ingest`.
        #[arg(long, required_unless_present = "config")]
        officers: Option<PathBuf>,
        /// Directory of gender tables or a single table.
        #[arg(long)]
        gender_tables: Option<PathBuf>,
        #[arg(long)]
        postcode_map: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        fuzzy: usize,
        #[arg(long, default_value = "2020-02")]
        cutoff: YearMonth,
        /// Creation window for the elite table.
        #[arg(long, default_value = "2020-03:2021-06")]
        window: MonthWindow,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Extract one `month,value` series from a series table.
    Series {
        #[command(flatten)]
        cfg: ConfigArg,
        /// `series.csv` written by the pipeline, or a per-stratum `series_<name>.csv` from `diff`.
        #[arg(long, required_unless_present = "config")]
        table: Option<PathBuf>,
        #[arg(long, default_value = "ALL")]
        stratum: String,
        #[arg(long, default_value = "opened")]
        measure: Measure,
        #[arg(long, required_unless_present = "config")]
        out: Option<PathBuf>,
    },
    /// Stepwise SARIMA selection on a `month,value` series.
    Fit {
        #[command(flatten)]
        cfg: ConfigArg,
        #[command(flatten)]
        model: ModelArgs,
        /// Search trace output.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Fitted model dump output (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select a model and forecast with prediction intervals.
    Forecast {
        #[command(flatten)]
        cfg: ConfigArg,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 12)]
        horizon: usize,
        #[arg(long, value_delimiter = ',', default_value = "80,95")]
        levels: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Counterfactual excess over an evaluation window.
    Excess {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long, required_unless_present = "config")]
        series: Option<PathBuf>,
        #[arg(long, default_value = "2011-01:2020-01")]
        train: MonthWindow,
        #[arg(long, default_value = "2020-03:2021-06")]
        eval: MonthWindow,
        #[arg(long, value_delimiter = ',', default_value = "80,95")]
        levels: Vec<f64>,
        #[arg(long, default_value = "actual-minus-forecast")]
        convention: Convention,
        #[arg(long, default_value_t = 12)]
        period: usize,
        #[arg(long, required_unless_present = "config")]
        out: Option<PathBuf>,
    },
    /// Structural break battery over a directory of series.
    Breaks {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long, required_unless_present = "config")]
        series_dir: Option<PathBuf>,
        #[arg(long, default_value = "2020-03")]
        chow_candidate: YearMonth,
        #[arg(long, default_value_t = 12)]
        period: usize,
        #[arg(long, required_unless_present = "config")]
        out: Option<PathBuf>,
    },
    /// Sector, elite and experience tables plus plot data.
    Report {
        #[arg(long)]
        config: PathBuf,
    },
    /// The whole pipeline.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a synthetic registry archive and a config for it.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 36)]
        months: usize,
        #[arg(long, default_value_t = 5000)]
        firms: usize,
        #[arg(long, default_value_t = 8000)]
        officers: usize,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, required_unless_present = "config")]
    series: Option<PathBuf>,
    /// Upper bound on p, q, P and Q.
    #[arg(long)]
    max_order: Option<usize>,
    /// Maximum number of models fitted.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = 12)]
    period: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stratifier {
    Sic,
    Region,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    ActualMinusForecast,
    ForecastMinusActual,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Failed(_) => 3,
            CliError::Pipeline(e) => e.exit_code() as u8,
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).init();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    match dispatch(cli.command, cli.seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn pipeline(path: &Path, seed: Option<u64>, through: Stage) -> Result<(), CliError> {
    let mut config = PipelineConfig::load(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let manifest = run_pipeline(&config, through)?;
    for r in manifest.stages.iter().filter(|r| r.status != StageStatus::NotRun) {
        println!("{:<8} {:<7} {:>7} ms", r.stage.name(), format!("{:?}", r.status).to_lowercase(), r.duration_ms);
    }
    Ok(())
}

fn dispatch(command: Command, seed: Option<u64>) -> Result<(), CliError> {
    use Command::*;
    match command {
        Ingest { cfg: ConfigArg { config: Some(c) }, .. } => pipeline(&c, seed, Stage::Ingest),
        Diff { cfg: ConfigArg { config: Some(c) }, .. } => pipeline(&c, seed, Stage::Diff),
        Resolve { cfg: ConfigArg { config: Some(c) }, .. } => pipeline(&c, seed, Stage::Resolve),
        Series { cfg: ConfigArg { config: Some(c) }, .. } => pipeline(&c, seed, Stage::Series),
        Fit { cfg: ConfigArg { config: Some(c) }, .. } | Forecast { cfg: ConfigArg { config: Some(c) }, .. } => {
            pipeline(&c, seed, Stage::Fit)
        }
        Excess { cfg: ConfigArg { config: Some(c) }, .. } => pipeline(&c, seed, Stage::Excess),
        Breaks { cfg: ConfigArg { config: Some(c) }, .. } => pipeline(&c, seed, Stage::Breaks),
        Report { config } => pipeline(&config, seed, Stage::Report),
        Run { config } => pipeline(&config, seed, Stage::Report),
        Ingest { snapshots, officers, out, schema_map, .. } => {
            let schema = match schema_map {
                Some(p) => SchemaMap::load(&p).map_err(invalid)?,
                None => SchemaMap::default(),
            };
            let out = out.expect("required by clap");
            fs::create_dir_all(&out).map_err(failed)?;
            let (summary, _) = ingest_archive(&snapshots.expect("required by clap"), officers.as_deref(), &schema, &out)?;
            println!(
                "{} months, {} company rows, {} officer rows, {} rejected",
                summary.months.len(),
                summary.company_rows,
                summary.officer_rows,
                summary.rejected_rows
            );
            Ok(())
        }
        Diff { normalized, out, strata, postcode_map, .. } => {
            diff(&normalized.expect("required by clap"), &out.expect("required by clap"), &strata, postcode_map.as_deref())
        }
        Resolve { officers, gender_tables, postcode_map, fuzzy, cutoff, window, out, .. } => resolve(
            &officers.expect("required by clap"),
            gender_tables.as_deref(),
            postcode_map.as_deref(),
            fuzzy,
            cutoff,
            window,
            &out,
        ),
        Series { table, stratum, measure, out, .. } => {
            let table = table.expect("required by clap");
            let all = read_series_table(fs::File::open(&table).map_err(invalid)?).map_err(invalid)?;
            let s = all
                .iter()
                .find(|s| s.stratum == stratum || (all.len() == 1 && s.stratum.is_empty()))
                .ok_or_else(|| invalid(format!("no stratum {stratum} in {}", table.display())))?;
            let series = MonthlySeries::monthly(s.start, measure.values(s)).map_err(failed)?;
            series.write_csv(create(&out.expect("required by clap"))?).map_err(failed)
        }
        Fit { model, trace, out, .. } => {
            let (series, opts) = model_inputs(&model)?;
            let auto = auto_sarima(&series, &opts).map_err(failed)?;
            if let Some(path) = trace {
                let mut w = create(&path)?;
                auto.search.trace.write_csv(&mut w).and_then(|_| w.flush()).map_err(failed)?;
            }
            let dump = serde_json::to_string_pretty(&auto.search.best.dump()).map_err(failed)?;
            match out {
                Some(path) => fs::write(&path, dump + "\n").map_err(failed),
                None => {
                    let _ = writeln!(std::io::stdout(), "{dump}");
                    Ok(())
                }
            }
        }
        Forecast { model, horizon, levels, out, .. } => {
            let (series, opts) = model_inputs(&model)?;
            let auto = auto_sarima(&series, &opts).map_err(failed)?;
            let fc = forecast_with_levels(&auto.search.best, horizon, &levels).map_err(invalid)?;
            let mut w = csv::Writer::from_writer(output(out.as_deref())?);
            let mut header = vec!["month".to_string(), "forecast".into()];
            for l in &levels {
                header.extend([format!("lower{l}"), format!("upper{l}")]);
            }
            w.write_record(&header).map_err(failed)?;
            for h in 0..fc.horizon() {
                let mut row = vec![fc.start.add_months(h as i64).to_string(), format!("{:.6}", fc.mean[h])];
                for iv in &fc.intervals {
                    row.extend([format!("{:.6}", iv.lower[h]), format!("{:.6}", iv.upper[h])]);
                }
                w.write_record(&row).map_err(failed)?;
            }
            w.flush().map_err(failed)
        }
        Excess { series, train, eval, levels, convention, period, out, .. } => {
            let path = series.expect("required by clap");
            let s = read_series(&path, period)?;
            let config = CounterfactualConfig {
                train,
                eval,
                levels,
                convention: match convention {
                    Convention::ActualMinusForecast => SignConvention::ActualMinusForecast,
                    Convention::ForecastMinusActual => SignConvention::ForecastMinusActual,
                },
                ..CounterfactualConfig::default()
            };
            config.validate().map_err(invalid)?;
            let stratum = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let report = run_counterfactual(&stratum, &s, &config).map_err(failed)?;
            report.write_csv(create(&out.expect("required by clap"))?).map_err(failed)?;
            println!("{stratum}: {} total excess {:.1}", report.model.spec, report.total());
            Ok(())
        }
        Breaks { series_dir, chow_candidate, period, out, .. } => {
            let dir = series_dir.expect("required by clap");
            let mut files: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(invalid)?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                .collect();
            files.sort();
            let named = files
                .iter()
                .map(|p| Ok((p.file_stem().unwrap_or_default().to_string_lossy().into_owned(), read_series(p, period)?)))
                .collect::<Result<Vec<_>, CliError>>()?;
            let config = BatteryConfig {
                chow_candidate,
                ..BatteryConfig::default()
            };
            let rows = run_battery(&named, &config);
            let mut w = create(&out.expect("required by clap"))?;
            write_battery_csv(&rows, &mut w).map_err(failed)?;
            w.flush().map_err(failed)
        }
        Fixture { out, months, firms, officers } => {
            let spec = FixtureSpec {
                months,
                firms,
                officers,
                seed: seed.unwrap_or(FixtureSpec::default().seed),
                ..FixtureSpec::default()
            };
            if months == 0 || firms == 0 {
                return Err(invalid("fixture needs at least one month and one firm"));
            }
            let layout = write_fixture(&out, &spec).map_err(failed)?;
            println!("{}", layout.config.display());
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(failed)?;
    }
    fs::File::create(path).map(BufWriter::new).map_err(failed)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn read_series(path: &Path, period: usize) -> Result<MonthlySeries, CliError> {
    let f = fs::File::open(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    MonthlySeries::read_csv(f, period).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn model_inputs(args: &ModelArgs) -> Result<(MonthlySeries, AutoOptions), CliError> {
    let series = read_series(args.series.as_deref().expect("required by clap"), args.period)?;
    let mut bounds = args.max_order.map_or_else(SearchBounds::default, SearchBounds::uniform);
    if let Some(b) = args.budget {
        bounds.budget = b;
    }
    Ok((series, AutoOptions { bounds, ..AutoOptions::default() }))
}

fn file_name(stratum: &str) -> String {
    stratum.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn diff(normalized: &Path, out: &Path, strata: &[Stratifier], postcode_map: Option<&Path>) -> Result<(), CliError> {
    let summary: IngestSummary = serde_json::from_reader(
        fs::File::open(normalized.join("summary.json")).map_err(|e| invalid(format!("{}: {e}", normalized.display())))?,
    )
    .map_err(invalid)?;
    let companies = firmcast::ingest::read_companies(fs::File::open(normalized.join("companies.csv")).map_err(invalid)?)
        .map_err(invalid)?;
    let index: HashMap<YearMonth, usize> = summary.months.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    let mut snapshots = vec![Vec::new(); summary.months.len()];
    for r in companies {
        let i = *index.get(&r.snapshot_month).ok_or_else(|| invalid(format!("month {} not in summary", r.snapshot_month)))?;
        snapshots[i].push(r);
    }
    let build = build_timelines(&summary.months, &snapshots, None);
    let regions = match postcode_map {
        Some(p) => PostcodeRegions::load(p).map_err(invalid)?,
        None => PostcodeRegions::default(),
    };
    fs::create_dir_all(out).map_err(failed)?;
    let mut w = create(&out.join("events.csv"))?;
    write_events(&mut w, &build.events()).and_then(|_| Ok(w.flush()?)).map_err(failed)?;
    let mut w = create(&out.join("firms.csv"))?;
    write_firms(&mut w, &firm_rows(&build.timelines, &regions)).and_then(|_| Ok(w.flush()?)).map_err(failed)?;
    let Some(&start) = summary.months.first() else {
        return Err(invalid("archive has no months"));
    };
    let n = summary.months.len();
    for s in strata {
        let series = match s {
            Stratifier::None => aggregate_events(&build.timelines, start, n, |_| Some("ALL".to_string())),
            Stratifier::Sic => aggregate_events(&build.timelines, start, n, |t: &FirmTimeline| t.profile.sic_section().map(String::from)),
            Stratifier::Region => aggregate_events(&build.timelines, start, n, |t: &FirmTimeline| {
                t.profile.postcode.as_deref().map(|p| regions.map_region(p).to_string())
            }),
        };
        for es in &series {
            let mut w = create(&out.join(format!("series_{}.csv", file_name(&es.stratum))))?;
            write_series(&mut w, es).and_then(|_| Ok(w.flush()?)).map_err(failed)?;
        }
    }
    println!("{} firms, {} events", build.timelines.len(), build.events().len());
    Ok(())
}

fn gender_tables(path: Option<&Path>) -> Result<Vec<GenderProviderTable>, CliError> {
    let Some(path) = path else {
        return Ok(Vec::new());
    };
    let files = if path.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(path)
            .map_err(invalid)?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    files.iter().map(|f| GenderProviderTable::load(f).map_err(invalid)).collect()
}

fn resolve(
    normalized: &Path,
    gender: Option<&Path>,
    postcode_map: Option<&Path>,
    fuzzy: usize,
    cutoff: YearMonth,
    window: MonthWindow,
    out: &Path,
) -> Result<(), CliError> {
    if window.start <= cutoff {
        return Err(invalid("the elite window must start after the cutoff"));
    }
    let src = if normalized.is_dir() { normalized.join("officers.csv") } else { normalized.to_path_buf() };
    let records = read_officers(fs::File::open(&src).map_err(|e| invalid(format!("{}: {e}", src.display())))?)
        .map_err(invalid)?;
    let tables = gender_tables(gender)?;
    let regions = match postcode_map {
        Some(p) => PostcodeRegions::load(p).map_err(invalid)?,
        None => PostcodeRegions::default(),
    };
    let persons = resolve_persons(&records, fuzzy, &tables, &regions);
    fs::create_dir_all(out).map_err(failed)?;
    let mut w = create(&out.join("persons.csv"))?;
    write_persons_csv(&mut w, &persons, cutoff).and_then(|_| Ok(w.flush()?)).map_err(failed)?;
    // Without firm timelines, a firm is new when its earliest appointment falls in the window.
    let mut first: HashMap<&str, YearMonth> = HashMap::new();
    for a in persons.iter().flat_map(|p| &p.appointments) {
        let e = first.entry(a.company_id.as_str()).or_insert(a.appointed);
        *e = (*e).min(a.appointed);
    }
    let new: HashSet<&str> = first.iter().filter(|(_, m)| window.contains(**m)).map(|(id, _)| *id).collect();
    let rows = elite_table(&persons, cutoff, window, |id| new.contains(id));
    let mut w = create(&out.join("elite_table.csv"))?;
    write_elite_table(&mut w, &rows).and_then(|_| Ok(w.flush()?)).map_err(failed)?;
    println!("{} officer rows, {} persons", records.len(), persons.len());
    Ok(())
}
