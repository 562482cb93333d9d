//! Generates a synthetic registry archive and runs the full pipeline on it.
//!
//! `cargo run --release --example pipeline_run -- [DIR] [MONTHS] [FIRMS] [OFFICERS]`

use std::path::PathBuf;

use firmcast::fixture::{write_fixture, FixtureSpec};
use firmcast::pipeline::{run_pipeline, PipelineConfig, Stage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = args.first().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("firmcast-demo"));
    let arg = |i: usize, default: usize| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let defaults = FixtureSpec::default();
    let spec = FixtureSpec {
        months: arg(1, defaults.months),
        firms: arg(2, defaults.firms),
        officers: arg(3, defaults.officers),
        ..defaults
    };
    let layout = write_fixture(&dir, &spec)?;
    let config = PipelineConfig::load(&layout.config)?;
    let manifest = run_pipeline(&config, Stage::Report)?;
    for r in &manifest.stages {
        println!("{:<8} {:?} {:>6} ms {} outputs", r.stage.name(), r.status, r.duration_ms, r.outputs.len());
    }
    println!("\n{}", std::fs::read_to_string(config.output.join("report/sector_table.csv"))?);
    println!("{}", std::fs::read_to_string(config.output.join("report/elite_table.csv"))?);
    Ok(())
}
