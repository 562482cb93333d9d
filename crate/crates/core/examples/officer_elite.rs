//! Resolves officer identities and tabulates creation by prior-firm count.
//!
//! `cargo run --release --example officer_elite`

use firmcast::calendar::MonthWindow;
use firmcast::fixture::{write_fixture, FixtureSpec};
use firmcast::ingest::{filter_corporate_officers, load_archive, SchemaMap};
use firmcast::officers::{elite_table, Gender, GenderProviderTable, PostcodeRegions};
use firmcast::pipeline::resolve_persons;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("firmcast-officer-elite");
    let layout = write_fixture(&dir, &FixtureSpec::small(36, 3000, 4500))?;
    let archive = load_archive(&layout.snapshots, Some(&layout.officers), &SchemaMap::default(), None)?;
    let records: Vec<_> = archive.officers.into_iter().flatten().collect();
    let partition = filter_corporate_officers(records);
    println!(
        "{} person filings, {} corporate filings ({:.2}% corporate)",
        partition.persons.len(),
        partition.companies.len(),
        100.0 * partition.corporate_share
    );

    let tables = layout
        .gender_tables
        .iter()
        .map(|p| GenderProviderTable::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let persons = resolve_persons(&partition.persons, 1, &tables, &PostcodeRegions::default());
    let fuzzy = persons.iter().filter(|p| p.name_variants.len() > 1).count();
    let women = persons.iter().filter(|p| p.gender == Gender::Woman).count();
    println!("{} persons ({fuzzy} joined across spelling variants), {women} women", persons.len());

    let window: MonthWindow = "2020-03:2021-06".parse()?;
    let mut first = std::collections::HashMap::new();
    for a in persons.iter().flat_map(|p| &p.appointments) {
        first.entry(a.company_id.clone()).and_modify(|m| *m = a.appointed.min(*m)).or_insert(a.appointed);
    }
    let rows = elite_table(&persons, "2020-02".parse()?, window, |id| first.get(id).is_some_and(|m| window.contains(*m)));
    println!("\nprior firms  persons  created  per 100");
    for r in rows {
        println!("{:<11} {:>8} {:>8} {:>8.1}", r.bucket.to_string(), r.pre_pandemic_total, r.created_during, r.creation_percent());
    }
    Ok(())
}
