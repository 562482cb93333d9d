//! Seeded synthetic registry archive for tests, examples and the CLI.
//!
//! The archive mimics the bulk products: monthly company snapshots with the
//! registry's own column names and officer files holding the appointments
//! made each month (the first file also lists every earlier appointment).
//! Openings rise and closures fall from `shock_start`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calendar::{MonthWindow, YearMonth};

const SECTORS: &[(&str, f64)] = &[
    ("47110 - Retail sale in non-specialised stores", 0.22),
    ("62020 - Information technology consultancy activities", 0.20),
    ("69201 - Accounting and auditing activities", 0.15),
    ("41202 - Construction of domestic buildings", 0.15),
    ("56101 - Licensed restaurants", 0.10),
    ("68209 - Other letting and operating of own or leased real estate", 0.10),
    ("01110 - Growing of cereals", 0.08),
];
const LONDON: &[&str] = &["EC1A 1BB", "N1 9GU", "SW1A 2AA", "E1 6AN", "W1D 3QU"];
const ELSEWHERE: &[&str] = &["M1 1AE", "B1 1BB", "LS1 4AP", "EH1 1YZ", "CF10 1EP", "BS1 4DJ", "NE1 7RU"];
const WOMEN: &[&str] = &[
    "ALICE", "AMELIA", "CHARLOTTE", "CLAIRE", "DEBORAH", "ELEANOR", "EMMA", "FIONA", "GRACE", "HANNAH", "ISABEL",
    "JESSICA", "KATHERINE", "LAURA", "MARGARET", "NATALIE", "OLIVIA", "PRIYA", "REBECCA", "SARAH", "SOPHIE",
    "VICTORIA",
];
const MEN: &[&str] = &[
    "ADAM", "ANDREW", "BENJAMIN", "CHRISTOPHER", "DANIEL", "DAVID", "EDWARD", "GEORGE", "HARRY", "JAMES", "JONATHAN",
    "MATTHEW", "MICHAEL", "NICHOLAS", "OLIVER", "PATRICK", "RICHARD", "ROBERT", "SAMUEL", "STEPHEN", "THOMAS",
    "WILLIAM",
];
const SURNAMES: &[&str] = &[
    "ADAMS", "AHMED", "BAKER", "BROWN", "CAMPBELL", "CLARKE", "COOPER", "DAVIES", "EDWARDS", "EVANS", "FOSTER",
    "GREEN", "HALL", "HARRIS", "HUGHES", "JACKSON", "JOHNSON", "JONES", "KHAN", "KING", "LEWIS", "MARTIN", "MORGAN",
    "MURPHY", "PATEL", "PRICE", "ROBERTS", "ROBINSON", "SCOTT", "SINGH", "SMITH", "TAYLOR", "THOMAS", "THOMPSON",
    "TURNER", "WALKER", "WARD", "WATSON", "WHITE", "WILSON", "WOOD", "WRIGHT", "YOUNG",
];
const CORPORATE: &[&str] = &["ACME HOLDINGS LIMITED", "NORTHGATE SECRETARIAT LTD", "CITY CORPORATE SERVICES LIMITED"];
/// Relative monthly opening intensity, January first.
const SEASON: [f64; 12] = [1.25, 1.0, 1.1, 1.0, 0.95, 0.9, 1.0, 0.9, 1.05, 1.1, 0.95, 0.8];
const STRIKE_OFF: &str = "Active - Proposal to Strike Off";

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub start: YearMonth,
    pub months: usize,
    pub firms: usize,
    pub officers: usize,
    pub seed: u64,
    /// First month of the shock regime.
    pub shock_start: YearMonth,
    /// Multiplier on the opening rate from `shock_start`.
    pub open_multiplier: f64,
    /// Multiplier on the closure hazard from `shock_start`.
    pub close_multiplier: f64,
    /// Monthly closure hazard of an active firm before the shock.
    pub close_hazard: f64,
    /// Share of firms already on the register in the first month.
    pub preexisting_share: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            start: YearMonth::new(2018, 7).expect("valid month"),
            months: 36,
            firms: 5000,
            officers: 8000,
            seed: 20240101,
            shock_start: YearMonth::new(2020, 3).expect("valid month"),
            open_multiplier: 1.3,
            close_multiplier: 0.6,
            close_hazard: 0.01,
            preexisting_share: 0.5,
        }
    }
}

impl FixtureSpec {
    /// A small archive of `months` months, useful for quick pipeline checks.
    pub fn small(months: usize, firms: usize, officers: usize) -> Self {
        FixtureSpec {
            months,
            firms,
            officers,
            ..FixtureSpec::default()
        }
    }

    pub fn window(&self) -> MonthWindow {
        MonthWindow::new(self.start, self.start.add_months(self.months as i64 - 1)).expect("at least one month")
    }
}

/// Paths written by [`write_fixture`], all inside the target directory.
#[derive(Debug, Clone)]
pub struct FixtureLayout {
    pub snapshots: PathBuf,
    pub officers: PathBuf,
    pub gender_tables: Vec<PathBuf>,
    pub config: PathBuf,
}

struct Firm {
    id: String,
    sic: &'static str,
    postcode: &'static str,
    incorporated: NaiveDate,
    /// Archive month index of the first snapshot row.
    first: usize,
    /// Status per month from `first`; `None` once dissolved.
    statuses: Vec<Option<&'static str>>,
    dissolved: Option<NaiveDate>,
}

struct Person {
    surname: &'static str,
    forename: &'static str,
    middle: Option<&'static str>,
    birth: YearMonth,
    postcode: &'static str,
    /// Occasional misspelt forename on some filings.
    typo: bool,
}

struct Filing {
    month: usize,
    name: String,
    company: usize,
    birth: Option<YearMonth>,
    appointed: NaiveDate,
    postcode: &'static str,
    role: &'static str,
}

fn date_in(month: YearMonth, rng: &mut ChaCha8Rng) -> NaiveDate {
    month.first_day() + chrono::Days::new(rng.random_range(0..28))
}

fn simulate_firms(spec: &FixtureSpec, rng: &mut ChaCha8Rng) -> Vec<Firm> {
    let n = spec.months;
    let preexisting = ((spec.firms as f64) * spec.preexisting_share).round() as usize;
    let shock = spec.shock_start.months_since(spec.start).max(0) as usize;
    let open_weights: Vec<f64> = (1..n)
        .map(|i| {
            let month = spec.start.add_months(i as i64);
            SEASON[month.month() as usize - 1] * if i >= shock { spec.open_multiplier } else { 1.0 }
        })
        .collect();
    let opening = (n > 1).then(|| WeightedIndex::new(&open_weights).expect("positive weights"));
    let sector = WeightedIndex::new(SECTORS.iter().map(|s| s.1)).expect("positive weights");
    let mut firms = Vec::with_capacity(spec.firms);
    for k in 0..spec.firms {
        let (first, incorporated) = match &opening {
            Some(opening) if k >= preexisting => {
                let i = 1 + opening.sample(rng);
                (i, date_in(spec.start.add_months(i as i64), rng))
            }
            _ => (0, date_in(spec.start.add_months(-rng.random_range(1..120)), rng)),
        };
        let postcode = if rng.random::<f64>() < 0.3 {
            *LONDON.choose(rng).expect("non-empty")
        } else {
            *ELSEWHERE.choose(rng).expect("non-empty")
        };
        let mut statuses = Vec::with_capacity(n - first);
        let mut state: Option<&'static str> = Some("Active");
        let mut proposal_age = 0;
        let mut dissolved = None;
        for i in first..n {
            let hazard = spec.close_hazard * if i >= shock { spec.close_multiplier } else { 1.0 };
            if i > first {
                state = match state {
                    Some("Active") if rng.random::<f64>() < hazard => {
                        proposal_age = 0;
                        Some(STRIKE_OFF)
                    }
                    Some(STRIKE_OFF) => {
                        proposal_age += 1;
                        if rng.random::<f64>() < 0.1 {
                            Some("Active")
                        } else if proposal_age >= 2 {
                            dissolved = Some(date_in(spec.start.add_months(i as i64), rng));
                            None
                        } else {
                            Some(STRIKE_OFF)
                        }
                    }
                    other => other,
                };
            }
            statuses.push(state);
        }
        firms.push(Firm {
            id: format!("FX{:06}", k + 1),
            sic: SECTORS[sector.sample(rng)].0,
            postcode,
            incorporated,
            first,
            statuses,
            dissolved,
        });
    }
    firms
}

fn simulate_people(spec: &FixtureSpec, rng: &mut ChaCha8Rng) -> Vec<Person> {
    let mut seen = HashSet::new();
    let mut people = Vec::with_capacity(spec.officers);
    while people.len() < spec.officers {
        let names = if rng.random::<f64>() < 0.35 { WOMEN } else { MEN };
        let forename = *names.choose(rng).expect("non-empty");
        let surname = *SURNAMES.choose(rng).expect("non-empty");
        let birth = YearMonth::new(rng.random_range(1945..1999), rng.random_range(1..=12)).expect("valid month");
        if !seen.insert((forename, surname, birth)) {
            continue;
        }
        let middle = (rng.random::<f64>() < 0.4).then(|| *names.choose(rng).expect("non-empty"));
        let postcode = if rng.random::<f64>() < 0.3 {
            *LONDON.choose(rng).expect("non-empty")
        } else {
            *ELSEWHERE.choose(rng).expect("non-empty")
        };
        people.push(Person {
            surname,
            forename,
            middle,
            birth,
            postcode,
            typo: rng.random::<f64>() < 0.02,
        });
    }
    people
}

/// Drops the last letter: a one-edit misspelling.
fn misspelt(forename: &str) -> &str {
    &forename[..forename.len() - 1]
}

fn filings(spec: &FixtureSpec, firms: &[Firm], people: &[Person], rng: &mut ChaCha8Rng) -> Vec<Filing> {
    let mut order: Vec<usize> = (0..people.len()).collect();
    order.shuffle(rng);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (k, &p) in order.iter().enumerate() {
        if firms.is_empty() {
            break;
        }
        let company = if k < firms.len() { k } else { rng.random_range(0..firms.len()) };
        pairs.push((p, company));
    }
    // A small set of serial officers with many firms.
    let serial = (people.len() / 20).max(1);
    for &p in order.iter().take(serial) {
        for _ in 0..rng.random_range(1..10) {
            if !firms.is_empty() {
                pairs.push((p, rng.random_range(0..firms.len())));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let last = spec.months - 1;
    let mut out = Vec::with_capacity(pairs.len() + firms.len() / 30);
    for (p, company) in pairs {
        let firm = &firms[company];
        let delay = rng.random_range(0..4);
        let month = (firm.first + delay).min(last).min(firm.first + firm.statuses.len() - 1);
        let appointed = if month == firm.first {
            firm.incorporated
        } else {
            date_in(spec.start.add_months(month as i64), rng)
        };
        let person = &people[p];
        let forename = if person.typo && rng.random::<f64>() < 0.5 {
            misspelt(person.forename)
        } else {
            person.forename
        };
        let mut name = format!("{}, {}", person.surname, title_case(forename));
        if let Some(m) = person.middle {
            let _ = write!(name, " {}", title_case(m));
        }
        out.push(Filing {
            month,
            name,
            company,
            birth: Some(person.birth),
            appointed,
            postcode: person.postcode,
            role: "director",
        });
    }
    for (company, firm) in firms.iter().enumerate().step_by(30) {
        out.push(Filing {
            month: firm.first,
            name: CORPORATE.choose(rng).expect("non-empty").to_string(),
            company,
            birth: None,
            appointed: firm.incorporated,
            postcode: "EC1A 1BB",
            role: "corporate-secretary",
        });
    }
    out
}

fn title_case(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_string() + &chars.as_str().to_lowercase(),
        None => String::new(),
    }
}

fn write_snapshots(dir: &Path, spec: &FixtureSpec, firms: &[Firm]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for i in 0..spec.months {
        let month = spec.start.add_months(i as i64);
        let file = fs::File::create(dir.join(format!("companies_{month}.csv")))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record([
            "CompanyName",
            "CompanyNumber",
            "CompanyStatus",
            "IncorporationDate",
            "DissolutionDate",
            "SICCode.SicText_1",
            "RegAddress.PostCode",
        ])?;
        for (k, f) in firms.iter().enumerate() {
            if i < f.first {
                continue;
            }
            let Some(status) = f.statuses[i - f.first] else { continue };
            w.write_record([
                format!("FIXTURE COMPANY {} LIMITED", k + 1).as_str(),
                &f.id,
                status,
                &f.incorporated.to_string(),
                "",
                f.sic,
                f.postcode,
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn write_officer_files(dir: &Path, spec: &FixtureSpec, firms: &[Firm], filings: &[Filing]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut by_month: Vec<Vec<&Filing>> = vec![Vec::new(); spec.months];
    for f in filings {
        by_month[f.month].push(f);
    }
    for (i, rows) in by_month.iter_mut().enumerate() {
        rows.sort_by(|a, b| (&firms[a.company].id, &a.name).cmp(&(&firms[b.company].id, &b.name)));
        let month = spec.start.add_months(i as i64);
        let file = fs::File::create(dir.join(format!("officers_{month}.csv")))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(["Name", "CompanyNumber", "DateOfBirth", "AppointmentDate", "ResignationDate", "PostCode", "OfficerRole"])?;
        for f in rows.iter() {
            let firm = &firms[f.company];
            let resigned = firm
                .dissolved
                .filter(|d| *d >= f.appointed)
                .map(|d| d.to_string())
                .unwrap_or_default();
            w.write_record([
                f.name.as_str(),
                &firm.id,
                &f.birth.map(|b| b.to_string()).unwrap_or_default(),
                &f.appointed.to_string(),
                &resigned,
                f.postcode,
                f.role,
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn write_gender_tables(dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut full = String::from("# NAME,LABEL,CONFIDENCE\n");
    let mut partial = String::from("# NAME,LABEL,CONFIDENCE\n");
    for (names, label) in [(WOMEN, "woman"), (MEN, "man")] {
        for (i, n) in names.iter().enumerate() {
            let _ = writeln!(full, "{n},{label},0.98");
            if i % 2 == 0 {
                let _ = writeln!(partial, "{n},{label},0.95");
            }
        }
    }
    let paths = vec![dir.join("names_uk.csv"), dir.join("names_intl.csv")];
    fs::write(&paths[0], full)?;
    fs::write(&paths[1], partial)?;
    Ok(paths)
}

/// Pipeline configuration for an archive written by [`write_fixture`].
/// Paths are relative to the configuration file.
pub fn fixture_config(spec: &FixtureSpec) -> String {
    let window = spec.window();
    let train_end = spec.shock_start.add_months(-2).max(window.start);
    format!(
        "# synthetic registry archive, seed {seed}\n\
         snapshots = snapshots\n\
         officers = officers\n\
         output = out\n\
         gender_tables = gender/names_uk.csv, gender/names_intl.csv\n\
         train = {train_start}:{train_end}\n\
         eval = {eval_start}:{eval_end}\n\
         strata = ALL, G, J\n\
         measures = opened, closed, net_active\n\
         seed = {seed}\n",
        seed = spec.seed,
        train_start = window.start.succ().min(train_end),
        train_end = train_end,
        eval_start = spec.shock_start,
        eval_end = window.end.max(spec.shock_start),
    )
}

/// Writes a complete archive and a matching `pipeline.conf` under `dir`.
/// The same spec always produces byte-identical files.
pub fn write_fixture(dir: &Path, spec: &FixtureSpec) -> io::Result<FixtureLayout> {
    if spec.months == 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "fixture needs at least one month"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let firms = simulate_firms(spec, &mut rng);
    let people = simulate_people(spec, &mut rng);
    let filings = filings(spec, &firms, &people, &mut rng);
    let layout = FixtureLayout {
        snapshots: dir.join("snapshots"),
        officers: dir.join("officers"),
        gender_tables: write_gender_tables(&dir.join("gender"))?,
        config: dir.join("pipeline.conf"),
    };
    write_snapshots(&layout.snapshots, spec, &firms)?;
    write_officer_files(&layout.officers, spec, &firms, &filings)?;
    let mut conf = BufWriter::new(fs::File::create(&layout.config)?);
    conf.write_all(fixture_config(spec).as_bytes())?;
    conf.flush()?;
    Ok(layout)
}
