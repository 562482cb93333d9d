//! Pipeline configuration file.
//!
//! Plain `key = value` lines; `#` starts a comment, list values are comma
//! separated and relative paths are resolved against the file's directory.
//!
//! ```text
//! snapshots     = data/snapshots        # companies_YYYY-MM.csv files
//! officers      = data/officers         # officers_YYYY-MM.csv files (optional)
//! output        = out
//! schema        = columns.map           # optional column mapping
//! gender_tables = names_uk.csv, names_intl.csv
//! postcode_map  = regions.csv           # optional, bundled table otherwise
//! train         = 2011-01:2020-01
//! eval          = 2020-03:2021-06
//! pre_covid     = 2019-08:2020-02
//! during_covid  = 2020-03:2021-06
//! strata        = ALL, G, J
//! measures      = opened, closed, net_active
//! seed          = 20240101
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::breaks::BatteryConfig;
use crate::calendar::{MonthWindow, YearMonth};
use crate::excess::SignConvention;
use crate::selection::SearchBounds;
use crate::status::EventSeries;

/// A monthly count or level derived from the event series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Opened,
    Closed,
    Reopened,
    NetActive,
    NetChange,
}

impl Measure {
    pub const ALL: [Measure; 5] = [Measure::Opened, Measure::Closed, Measure::Reopened, Measure::NetActive, Measure::NetChange];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Opened => "opened",
            Measure::Closed => "closed",
            Measure::Reopened => "reopened",
            Measure::NetActive => "net_active",
            Measure::NetChange => "net_change",
        }
    }

    pub fn values(self, s: &EventSeries) -> Vec<f64> {
        let counts = |v: &[u64]| v.iter().map(|&x| x as f64).collect();
        match self {
            Measure::Opened => counts(&s.opened),
            Measure::Closed => counts(&s.closed),
            Measure::Reopened => counts(&s.reopened),
            Measure::NetActive => s.net_active.iter().map(|&x| x as f64).collect(),
            Measure::NetChange => s.net_change().into_iter().map(|x| x as f64).collect(),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| format!("unknown measure {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub snapshots: PathBuf,
    pub officers: Option<PathBuf>,
    pub output: PathBuf,
    pub schema: Option<PathBuf>,
    pub gender_tables: Vec<PathBuf>,
    pub postcode_map: Option<PathBuf>,
    /// First month of the register; firms present then count as opened.
    pub register_start: Option<YearMonth>,
    pub train: MonthWindow,
    pub eval: MonthWindow,
    pub pre_covid: MonthWindow,
    pub during_covid: MonthWindow,
    /// `ALL` for the whole register, or SIC section letters.
    pub strata: Vec<String>,
    pub measures: Vec<Measure>,
    pub fuzzy_threshold: usize,
    pub bounds: SearchBounds,
    pub period: usize,
    pub levels: Vec<f64>,
    pub convention: SignConvention,
    pub parameter_uncertainty: bool,
    pub breaks: BatteryConfig,
    pub seasonal_adjustment: bool,
    /// Quantile at which prior-firm counts are capped.
    pub winsor_quantile: f64,
    pub seed: u64,
}

fn window(a: (i32, u32), b: (i32, u32)) -> MonthWindow {
    let ym = |(y, m)| YearMonth::new(y, m).expect("valid month");
    MonthWindow::new(ym(a), ym(b)).expect("ordered")
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            snapshots: PathBuf::new(),
            officers: None,
            output: PathBuf::from("out"),
            schema: None,
            gender_tables: Vec::new(),
            postcode_map: None,
            register_start: None,
            train: window((2011, 1), (2020, 1)),
            eval: window((2020, 3), (2021, 6)),
            pre_covid: window((2019, 8), (2020, 2)),
            during_covid: window((2020, 3), (2021, 6)),
            strata: vec!["ALL".to_string()],
            measures: vec![Measure::Opened, Measure::Closed, Measure::NetActive],
            fuzzy_threshold: 1,
            bounds: SearchBounds::default(),
            period: 12,
            levels: vec![80.0, 95.0],
            convention: SignConvention::default(),
            parameter_uncertainty: true,
            breaks: BatteryConfig::default(),
            seasonal_adjustment: true,
            winsor_quantile: 0.999,
            seed: 20240101,
        }
    }
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got {value:?}")),
    }
}

fn parse<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| e.to_string())
}

impl PipelineConfig {
    /// Parses configuration text. Relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut c = PipelineConfig::default();
        let mut have_snapshots = false;
        let path = |v: &str| base.join(v);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let invalid = |msg: String| PipelineError::Config(format!("line {}: {msg}", lineno + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let res: Result<(), String> = (|| {
                match key {
                    "snapshots" => {
                        c.snapshots = path(value);
                        have_snapshots = true;
                    }
                    "officers" => c.officers = Some(path(value)),
                    "output" => c.output = path(value),
                    "schema" => c.schema = Some(path(value)),
                    "gender_tables" => c.gender_tables = list(value).map(path).collect(),
                    "postcode_map" => c.postcode_map = Some(path(value)),
                    "register_start" => c.register_start = Some(parse(value)?),
                    "train" => c.train = parse(value)?,
                    "eval" => c.eval = parse(value)?,
                    "pre_covid" => c.pre_covid = parse(value)?,
                    "during_covid" => c.during_covid = parse(value)?,
                    "strata" => c.strata = list(value).map(str::to_string).collect(),
                    "measures" => c.measures = list(value).map(parse).collect::<Result<_, _>>()?,
                    "fuzzy_threshold" => c.fuzzy_threshold = parse(value)?,
                    "max_p" => c.bounds.max_p = parse(value)?,
                    "max_q" => c.bounds.max_q = parse(value)?,
                    "max_P" => c.bounds.max_sp = parse(value)?,
                    "max_Q" => c.bounds.max_sq = parse(value)?,
                    "max_d" => c.bounds.max_d = parse(value)?,
                    "max_D" => c.bounds.max_sd = parse(value)?,
                    "budget" => c.bounds.budget = parse(value)?,
                    "period" => c.period = parse(value)?,
                    "levels" => c.levels = list(value).map(parse).collect::<Result<_, _>>()?,
                    "convention" => {
                        c.convention = match value {
                            "actual-minus-forecast" => SignConvention::ActualMinusForecast,
                            "forecast-minus-actual" => SignConvention::ForecastMinusActual,
                            _ => return Err(format!("unknown convention {value:?}")),
                        }
                    }
                    "parameter_uncertainty" => c.parameter_uncertainty = parse_bool(value)?,
                    "chow_candidate" => c.breaks.chow_candidate = parse(value)?,
                    "max_breaks" => c.breaks.max_breaks = parse(value)?,
                    "min_segment" => c.breaks.min_segment = parse(value)?,
                    "seasonal_adjustment" => c.seasonal_adjustment = parse_bool(value)?,
                    "winsor_quantile" => c.winsor_quantile = parse(value)?,
                    "seed" => c.seed = parse(value)?,
                    _ => return Err(format!("unknown key {key:?}")),
                }
                Ok(())
            })();
            res.map_err(invalid)?;
        }
        if !have_snapshots {
            return Err(PipelineError::Config("missing required key \"snapshots\"".into()));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Checks windows, values and that every input path exists. Nothing is
    /// written.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let err = |m: String| Err(PipelineError::Config(m));
        if self.train.end >= self.eval.start {
            return err(format!("train window {} must end before eval window {}", self.train, self.eval));
        }
        if self.pre_covid.end >= self.during_covid.start {
            return err(format!(
                "pre-Covid window {} must end before during-Covid window {}",
                self.pre_covid, self.during_covid
            ));
        }
        if self.strata.is_empty() {
            return err("no strata configured".into());
        }
        if let Some(s) = self.strata.iter().find(|s| !is_stratum_name(s)) {
            return err(format!("stratum {s:?} is neither ALL nor a SIC section letter"));
        }
        if self.measures.is_empty() {
            return err("no measures configured".into());
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !(*l > 0.0 && *l < 100.0)) {
            return err(format!("interval levels {:?} must lie in (0, 100)", self.levels));
        }
        if self.period == 0 {
            return err("period must be positive".into());
        }
        if !(self.winsor_quantile > 0.0 && self.winsor_quantile <= 1.0) {
            return err(format!("winsor quantile {} not in (0, 1]", self.winsor_quantile));
        }
        if !self.snapshots.is_dir() {
            return err(format!("snapshot directory {} does not exist", self.snapshots.display()));
        }
        let has_snapshot = std::fs::read_dir(&self.snapshots)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", self.snapshots.display())))?
            .filter_map(Result::ok)
            .any(|e| {
                let name = e.file_name();
                let name = name.to_string_lossy();
                name.starts_with("companies_") && name.ends_with(".csv")
            });
        if !has_snapshot {
            return err(format!("no companies_YYYY-MM.csv files in {}", self.snapshots.display()));
        }
        if let Some(d) = &self.officers {
            if !d.is_dir() {
                return err(format!("officer directory {} does not exist", d.display()));
            }
        }
        for f in self.schema.iter().chain(&self.gender_tables).chain(&self.postcode_map) {
            if !f.is_file() {
                return err(format!("{} does not exist", f.display()));
            }
        }
        Ok(())
    }
}

pub(crate) fn is_stratum_name(s: &str) -> bool {
    s == "ALL" || (s.len() == 1 && ('A'..='U').contains(&s.chars().next().unwrap_or(' ')))
}
