//! The end-to-end pipeline: ingest, diff, resolve, series, fit, excess,
//! breaks and report.
//!
//! Each stage reads files written by earlier stages (or the raw archive) and
//! writes its own subdirectory of the output directory. `manifest.json`
//! records, per stage, a hash of its inputs and parameters, the hashes of
//! its outputs and its duration. A stage whose input hash and outputs are
//! unchanged since the last run is skipped.

mod config;
mod report;
mod stages;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{Measure, PipelineConfig};
pub use report::{
    elite_rows, excess_plot_rows, sector_table, write_elite_table, write_persons_csv, write_sector_table, PlotRow, SectorRow,
    SectorWindows,
};
pub use stages::{
    build_series, firm_rows, ingest_archive, read_firms, read_persons, read_series_table, resolve_persons, series_key,
    write_firms, write_series_table, FirmRow, IngestSummary, ModelRecord,
};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: Stage, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl PipelineError {
    /// Process exit status: 2 for validation errors, 3 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { .. } | PipelineError::Io { .. } => 3,
        }
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Diff,
    Resolve,
    Series,
    Fit,
    Excess,
    Breaks,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Diff,
        Stage::Resolve,
        Stage::Series,
        Stage::Fit,
        Stage::Excess,
        Stage::Breaks,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Diff => "diff",
            Stage::Resolve => "resolve",
            Stage::Series => "series",
            Stage::Fit => "fit",
            Stage::Excess => "excess",
            Stage::Breaks => "breaks",
            Stage::Report => "report",
        }
    }

    /// Stages this one reads outputs from.
    pub fn depends_on(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Diff | Stage::Resolve | Stage::Series => &[Stage::Ingest],
            Stage::Fit | Stage::Breaks => &[Stage::Series],
            Stage::Excess => &[Stage::Series, Stage::Fit],
            Stage::Report => &[Stage::Diff, Stage::Resolve, Stage::Series, Stage::Excess],
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ran,
    Cached,
    Failed,
    NotRun,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    pub input_hash: Option<String>,
    pub output_hash: Option<String>,
    pub outputs: Vec<OutputFile>,
    pub duration_ms: u64,
    pub error: Option<String>,
}

impl StageRecord {
    fn not_run(stage: Stage) -> Self {
        StageRecord {
            stage,
            status: StageStatus::NotRun,
            input_hash: None,
            output_hash: None,
            outputs: Vec::new(),
            duration_ms: 0,
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    /// Every stage has status `ran` or `cached`.
    pub complete: bool,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn stage(&self, stage: Stage) -> &StageRecord {
        self.stages.iter().find(|r| r.stage == stage).expect("manifest lists every stage")
    }

    pub fn load(path: &Path) -> Option<Manifest> {
        let text = fs::read_to_string(path).ok()?;
        serde_json::from_str(&text).ok()
    }

    fn write(&self, path: &Path) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        fs::write(path, text).map_err(|e| PipelineError::io(path, e))
    }
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut hasher = Sha256::new();
    let mut f = fs::File::open(path)?;
    io::copy(&mut f, &mut hasher)?;
    Ok(hex::encode(hasher.finalize()))
}

fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Hash over the stage name, its parameters and each input file's name and
/// content. Input paths are identified by file name under their parent, so
/// moving the archive does not invalidate the cache.
fn input_hash(stage: Stage, params: &serde_json::Value, inputs: &[PathBuf]) -> Result<String, PipelineError> {
    let mut h = Sha256::new();
    h.update(stage.name().as_bytes());
    h.update([0]);
    h.update(params.to_string().as_bytes());
    for path in inputs {
        let label = path
            .parent()
            .and_then(Path::file_name)
            .map(|p| format!("{}/", p.to_string_lossy()))
            .unwrap_or_default()
            + &path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let digest = sha256_file(path).map_err(|e| PipelineError::io(path, e))?;
        h.update([0]);
        h.update(label.as_bytes());
        h.update([0]);
        h.update(digest.as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

fn output_hash(outputs: &[OutputFile]) -> String {
    let mut h = Sha256::new();
    for o in outputs {
        h.update(o.path.as_bytes());
        h.update([0]);
        h.update(o.sha256.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

fn hash_outputs(root: &Path, files: &[PathBuf]) -> Result<Vec<OutputFile>, PipelineError> {
    let mut out = files
        .iter()
        .map(|p| {
            Ok(OutputFile {
                path: relative(root, p),
                sha256: sha256_file(p).map_err(|e| PipelineError::io(p, e))?,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

fn outputs_intact(root: &Path, rec: &StageRecord) -> bool {
    rec.outputs
        .iter()
        .all(|o| sha256_file(&root.join(&o.path)).is_ok_and(|h| h == o.sha256))
}

/// Runs every stage up to and including `through`, skipping stages whose
/// inputs are unchanged. The manifest is rewritten after every stage, so a
/// failure leaves a record of how far the run got.
pub fn run_pipeline(config: &PipelineConfig, through: Stage) -> Result<Manifest, PipelineError> {
    config.validate()?;
    let root = &config.output;
    fs::create_dir_all(root).map_err(|e| PipelineError::io(root, e))?;
    let manifest_path = root.join(MANIFEST);
    let previous = Manifest::load(&manifest_path);
    let mut manifest = Manifest {
        seed: config.seed,
        complete: false,
        stages: Stage::ALL
            .iter()
            .map(|&s| {
                previous
                    .as_ref()
                    .and_then(|m| m.stages.iter().find(|r| r.stage == s).cloned())
                    .unwrap_or_else(|| StageRecord::not_run(s))
            })
            .collect(),
    };
    let mut failure = None;
    for (i, &stage) in Stage::ALL.iter().enumerate() {
        if stage > through {
            break;
        }
        if failure.is_some() {
            manifest.stages[i] = StageRecord::not_run(stage);
            continue;
        }
        let started = Instant::now();
        let record = run_stage(config, stage, &manifest.stages[i]);
        let mut record = match record {
            Ok(r) => r,
            Err(e) => {
                log::error!("stage {stage} failed: {e}");
                failure = Some(PipelineError::Stage {
                    stage,
                    message: e.to_string(),
                });
                StageRecord {
                    status: StageStatus::Failed,
                    error: Some(e.to_string()),
                    ..StageRecord::not_run(stage)
                }
            }
        };
        record.duration_ms = started.elapsed().as_millis() as u64;
        log::info!("stage {stage}: {:?} in {} ms", record.status, record.duration_ms);
        manifest.stages[i] = record;
        manifest.complete = manifest
            .stages
            .iter()
            .all(|r| matches!(r.status, StageStatus::Ran | StageStatus::Cached));
        manifest.write(&manifest_path)?;
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

fn run_stage(config: &PipelineConfig, stage: Stage, previous: &StageRecord) -> Result<StageRecord, PipelineError> {
    let root = &config.output;
    let (inputs, params) = stages::inputs(config, stage)?;
    let hash = input_hash(stage, &params, &inputs)?;
    let reusable = matches!(previous.status, StageStatus::Ran | StageStatus::Cached)
        && previous.input_hash.as_deref() == Some(hash.as_str())
        && outputs_intact(root, previous);
    if reusable {
        return Ok(StageRecord {
            status: StageStatus::Cached,
            ..previous.clone()
        });
    }
    let dir = root.join(stage.name());
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
    }
    fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
    let files = stages::run(config, stage, &dir)?;
    let outputs = hash_outputs(root, &files)?;
    Ok(StageRecord {
        stage,
        status: StageStatus::Ran,
        input_hash: Some(hash),
        output_hash: Some(output_hash(&outputs)),
        outputs,
        duration_ms: 0,
        error: None,
    })
}

/// Buffered file writer that reports the path on failure.
pub(crate) fn create(path: &Path) -> Result<BufWriter<fs::File>, PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| PipelineError::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| PipelineError::io(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| PipelineError::io(path, e))
}
