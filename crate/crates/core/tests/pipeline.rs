use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use firmcast::fixture::{write_fixture, FixtureLayout, FixtureSpec};
use firmcast::pipeline::{run_pipeline, Manifest, PipelineConfig, PipelineError, Stage, StageStatus, MANIFEST};

fn fixture(dir: &Path, months: usize) -> (FixtureLayout, PipelineConfig) {
    let layout = write_fixture(dir, &FixtureSpec::small(months, 300, 450)).unwrap();
    let config = PipelineConfig::load(&layout.config).unwrap();
    (layout, config)
}

/// Every file under `root` keyed by relative path.
fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn without_durations(mut m: Manifest) -> Manifest {
    for r in &mut m.stages {
        r.duration_ms = 0;
    }
    m
}

#[test]
fn empty_snapshot_dir_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("snapshots")).unwrap();
    let config = PipelineConfig::parse("snapshots = snapshots\noutput = out\n", dir.path()).unwrap();
    let err = run_pipeline(&config, Stage::Report).unwrap_err();
    assert!(matches!(err, PipelineError::Config(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn three_month_fixture_records_all_stages() {
    let dir = tempfile::tempdir().unwrap();
    let (_, config) = fixture(dir.path(), 3);
    let manifest = run_pipeline(&config, Stage::Report).unwrap();
    assert_eq!(manifest.stages.len(), 8);
    let names: Vec<_> = manifest.stages.iter().map(|r| r.stage).collect();
    assert_eq!(names, Stage::ALL.to_vec());
    assert!(manifest.complete);
    for r in &manifest.stages {
        assert_eq!(r.status, StageStatus::Ran, "{}", r.stage);
        assert!(r.input_hash.is_some() && r.output_hash.is_some());
        assert!(!r.outputs.is_empty());
    }
    // Too short to fit: models carry per-series errors instead of failing the stage.
    let models = fs::read_to_string(config.output.join("fit/models.json")).unwrap();
    assert!(models.contains("\"error\": \""));
    let on_disk = Manifest::load(&config.output.join(MANIFEST)).unwrap();
    assert_eq!(on_disk, manifest);
}

#[test]
fn second_run_is_cached() {
    let dir = tempfile::tempdir().unwrap();
    let (_, config) = fixture(dir.path(), 30);
    let first = run_pipeline(&config, Stage::Report).unwrap();
    assert!(first.stages.iter().all(|r| r.status == StageStatus::Ran));
    let second = run_pipeline(&config, Stage::Report).unwrap();
    for (a, b) in first.stages.iter().zip(&second.stages) {
        assert_eq!(b.status, StageStatus::Cached, "{}", b.stage);
        assert_eq!(a.input_hash, b.input_hash);
        assert_eq!(a.outputs, b.outputs);
    }
}

#[test]
fn tampered_output_is_rebuilt() {
    let dir = tempfile::tempdir().unwrap();
    let (_, config) = fixture(dir.path(), 3);
    let first = run_pipeline(&config, Stage::Series).unwrap();
    fs::write(config.output.join("series/series.csv"), "stratum\n").unwrap();
    let second = run_pipeline(&config, Stage::Series).unwrap();
    assert_eq!(second.stage(Stage::Series).status, StageStatus::Ran);
    assert_eq!(second.stage(Stage::Diff).status, StageStatus::Cached);
    assert_eq!(first.stage(Stage::Series).outputs, second.stage(Stage::Series).outputs);
}

#[test]
fn single_byte_change_invalidates_downstream() {
    let dir = tempfile::tempdir().unwrap();
    let (layout, config) = fixture(dir.path(), 3);
    let first = run_pipeline(&config, Stage::Report).unwrap();
    let mut snapshots: Vec<_> = fs::read_dir(&layout.snapshots).unwrap().map(|e| e.unwrap().path()).collect();
    snapshots.sort();
    let target = snapshots.last().unwrap();
    let mut bytes = fs::read(target).unwrap();
    let pos = bytes.len() - 2;
    bytes[pos] = if bytes[pos] == b'1' { b'2' } else { b'1' };
    fs::write(target, bytes).unwrap();
    let second = run_pipeline(&config, Stage::Report).unwrap();
    assert_ne!(first.stage(Stage::Ingest).input_hash, second.stage(Stage::Ingest).input_hash);
    assert_eq!(second.stage(Stage::Ingest).status, StageStatus::Ran);
    // Officer files are unchanged, so resolution reuses its outputs once ingest rewrites the same officers.csv.
    assert_eq!(second.stage(Stage::Resolve).status, StageStatus::Cached);
}

#[test]
fn config_change_reruns_dependent_stages_only() {
    let dir = tempfile::tempdir().unwrap();
    let (layout, config) = fixture(dir.path(), 3);
    run_pipeline(&config, Stage::Report).unwrap();
    let text = fs::read_to_string(&layout.config).unwrap() + "fuzzy_threshold = 0\n";
    let changed = PipelineConfig::parse(&text, layout.config.parent().unwrap()).unwrap();
    let m = run_pipeline(&changed, Stage::Report).unwrap();
    assert_eq!(m.stage(Stage::Ingest).status, StageStatus::Cached);
    assert_eq!(m.stage(Stage::Series).status, StageStatus::Cached);
    assert_eq!(m.stage(Stage::Resolve).status, StageStatus::Ran);
}

#[test]
fn runs_in_separate_directories_are_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (_, ca) = fixture(a.path(), 30);
    let (_, cb) = fixture(b.path(), 30);
    let ma = run_pipeline(&ca, Stage::Report).unwrap();
    let mb = run_pipeline(&cb, Stage::Report).unwrap();
    assert_eq!(without_durations(ma), without_durations(mb));
    let (mut ta, mut tb) = (tree(&ca.output), tree(&cb.output));
    ta.remove(MANIFEST);
    tb.remove(MANIFEST);
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        assert!(v == &tb[k], "{k} differs");
    }
}

#[test]
fn deleted_output_reruns_its_stage() {
    let dir = tempfile::tempdir().unwrap();
    let (_, config) = fixture(dir.path(), 3);
    run_pipeline(&config, Stage::Ingest).unwrap();
    fs::remove_file(config.output.join("ingest/summary.json")).unwrap();
    // Ingest outputs are no longer intact, so it reruns and the pipeline proceeds.
    let m = run_pipeline(&config, Stage::Diff).unwrap();
    assert_eq!(m.stage(Stage::Ingest).status, StageStatus::Ran);
    assert_eq!(m.stage(Stage::Report).status, StageStatus::NotRun);
    assert!(!m.complete);
}

#[test]
fn stage_failure_halts_later_stages() {
    let dir = tempfile::tempdir().unwrap();
    let (layout, config) = fixture(dir.path(), 3);
    fs::write(&layout.gender_tables[0], "ANNA,woman\n").unwrap();
    let err = run_pipeline(&config, Stage::Report).unwrap_err();
    assert!(matches!(err, PipelineError::Stage { stage: Stage::Resolve, .. }), "{err}");
    assert_eq!(err.exit_code(), 3);
    let m = Manifest::load(&config.output.join(MANIFEST)).unwrap();
    assert!(!m.complete);
    assert_eq!(m.stage(Stage::Diff).status, StageStatus::Ran);
    assert_eq!(m.stage(Stage::Resolve).status, StageStatus::Failed);
    assert!(m.stage(Stage::Resolve).error.is_some());
    for s in [Stage::Series, Stage::Fit, Stage::Excess, Stage::Breaks, Stage::Report] {
        assert_eq!(m.stage(s).status, StageStatus::NotRun, "{s}");
    }
}
