//! Diffs consecutive registry snapshots into opened/closed/reopened counts.
//!
//! `cargo run --release --example registry_diff`

use firmcast::fixture::{write_fixture, FixtureSpec};
use firmcast::ingest::{load_archive, SchemaMap};
use firmcast::status::{aggregate_events, build_timelines};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile_dir("registry-diff")?;
    let layout = write_fixture(&dir, &FixtureSpec::small(24, 1500, 2000))?;
    let archive = load_archive(&layout.snapshots, None, &SchemaMap::default(), None)?;
    println!("{} snapshots, {} rejected rows", archive.months.len(), archive.rejections.len());

    let build = build_timelines(&archive.months, &archive.companies, None);
    println!("{} firms, {} events", build.timelines.len(), build.events().len());

    let start = archive.months[0];
    let by_section = aggregate_events(&build.timelines, start, archive.months.len(), |t| {
        t.profile.sic_section().map(String::from)
    });
    println!("\nsection  opened  closed  reopened  net_active(last)");
    for s in &by_section {
        println!(
            "{:<8} {:>6}  {:>6}  {:>8}  {:>10}",
            s.stratum,
            s.opened.iter().sum::<u64>(),
            s.closed.iter().sum::<u64>(),
            s.reopened.iter().sum::<u64>(),
            s.net_active.last().copied().unwrap_or_default()
        );
    }
    Ok(())
}

fn tempfile_dir(name: &str) -> std::io::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join(format!("firmcast-{name}"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
