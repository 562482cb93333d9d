//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line, even when all pass.
//!
//! `cargo test --test acceptance`

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use firmcast::breaks::optimal_segmentation;
use firmcast::calendar::YearMonth;
use firmcast::excess::{run_counterfactual, CounterfactualConfig};
use firmcast::fixture::{write_fixture, FixtureSpec};
use firmcast::ingest::CompanySnapshotRecord;
use firmcast::officers::{compute_age, levenshtein, EliteTableRow, FirmBucket};
use firmcast::pipeline::{run_pipeline, Manifest, PipelineConfig, Stage, MANIFEST};
use firmcast::selection::{
    exhaustive_search, kpss_test, stepwise_search, KpssKind, SearchBounds, StepwiseOptions, UnitRootDecision,
};
use firmcast::status::{build_timelines, classify_month, EventKind, FirmStatusClass};
use firmcast::ts::{aicc, fit, fit_fixed, forecast, simulate, simulate_from, MonthlySeries, SarimaParams, SarimaSpec};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn ym(s: &str) -> YearMonth {
    s.parse().unwrap()
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

// 1 ---------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
enum S {
    Active,
    Closed,
    Absent,
}

impl S {
    fn class(self) -> FirmStatusClass {
        match self {
            S::Active => FirmStatusClass::Active,
            S::Closed => FirmStatusClass::ClosedLike("In Administration".into()),
            S::Absent => FirmStatusClass::AbsentFromRegister,
        }
    }
}

/// Event in month `t` of `seq`, read straight off the transition rules:
/// a first appearance as Active opens; Active after Active is no change;
/// Active after anything else, once seen, reopens; leaving Active closes.
fn rule(seq: &[S], t: usize) -> Option<(EventKind, bool)> {
    let seen_before = seq[..t].iter().any(|s| *s != S::Absent);
    let prev = if t == 0 { None } else { Some(seq[t - 1]) };
    match (seq[t], prev) {
        (S::Active, _) if !seen_before => Some((EventKind::Opened, false)),
        (S::Active, Some(S::Active)) => Some((EventKind::NoChange, false)),
        (S::Active, _) => Some((EventKind::Reopened, false)),
        (S::Closed, Some(S::Active)) => Some((EventKind::Closed, false)),
        (S::Absent, Some(S::Active)) => Some((EventKind::Closed, true)),
        _ => None,
    }
}

fn criterion_1() -> Verdict {
    let all = [S::Active, S::Closed, S::Absent];
    let seqs: Vec<Vec<S>> = (0..81)
        .map(|mut k| {
            (0..4)
                .map(|_| {
                    let s = all[k % 3];
                    k /= 3;
                    s
                })
                .collect()
        })
        .collect();
    let mut checked = 0;
    let mut mismatches = 0;
    for seq in &seqs {
        let classes: Vec<_> = seq.iter().map(|s| s.class()).collect();
        for t in 0..4 {
            let prev = (t > 0).then(|| &classes[t - 1]);
            let got = classify_month(prev, &classes[t], &classes[..t]).map(|c| (c.kind, c.inferred_dissolution));
            checked += 1;
            if got != rule(seq, t) {
                mismatches += 1;
            }
        }
    }
    // The same sequences through the snapshot diff, with the register starting
    // in the first month; firms absent throughout never reach a snapshot.
    let months: Vec<YearMonth> = (0..4).map(|i| ym("2020-01").add_months(i)).collect();
    let mut snapshots = vec![Vec::new(); 4];
    for (i, seq) in seqs.iter().enumerate() {
        for (t, s) in seq.iter().enumerate() {
            if *s != S::Absent {
                snapshots[t].push(CompanySnapshotRecord {
                    company_id: format!("{i:03}"),
                    name: format!("FIRM {i}"),
                    status: if *s == S::Active { "Active" } else { "In Administration" }.into(),
                    incorporation_date: None,
                    dissolution_date: None,
                    sic_codes: Vec::new(),
                    postcode: None,
                    snapshot_month: months[t],
                });
            }
        }
    }
    let build = build_timelines(&months, &snapshots, Some(months[0]));
    let mut diffed = 0;
    for tl in &build.timelines {
        let seq = &seqs[tl.company_id.parse::<usize>().unwrap()];
        let expected: Vec<(YearMonth, EventKind)> = (0..4)
            .filter_map(|t| rule(seq, t).map(|(k, _)| (months[t], k)))
            .filter(|(_, k)| *k != EventKind::NoChange)
            .collect();
        let got: Vec<(YearMonth, EventKind)> = tl
            .events
            .iter()
            .filter(|e| e.kind != EventKind::NoChange)
            .map(|e| (e.month, e.kind))
            .collect();
        diffed += 1;
        if got != expected {
            mismatches += 1;
        }
    }
    verdict(
        mismatches == 0 && checked == 324 && diffed == 80,
        format!("{checked} month classifications and {diffed} diffed firms, {mismatches} mismatches"),
    )
}

// 2 ---------------------------------------------------------------------

fn full_matrix_distance(a: &[char], b: &[char]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn criterion_2() -> Verdict {
    let alphabet: Vec<char> = "ABCDEÉ'-".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let word = |rng: &mut ChaCha8Rng| -> String {
        let n = rng.random_range(0..=12);
        (0..n).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
    };
    let mut wrong = 0;
    for _ in 0..10_000 {
        let a = word(&mut rng);
        let b = word(&mut rng);
        let (ca, cb): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
        if levenshtein(&a, &b) != full_matrix_distance(&ca, &cb) {
            wrong += 1;
        }
    }
    verdict(wrong == 0, format!("10000 pairs, {wrong} disagreements"))
}

// 3 ---------------------------------------------------------------------

fn criterion_3() -> Verdict {
    let table: [(u64, u64, f64); 10] = [
        (6_854_425, 330_058, 4.8),
        (1_425_875, 142_590, 10.0),
        (514_232, 77_278, 15.0),
        (238_446, 47_044, 19.7),
        (128_283, 30_946, 24.1),
        (76_088, 21_677, 28.5),
        (48_469, 15_553, 32.1),
        (33_017, 12_028, 36.4),
        (23_358, 9_760, 41.8),
        (98_390, 89_924, 91.4),
    ];
    let got: Vec<f64> = FirmBucket::ALL
        .iter()
        .zip(&table)
        .map(|(b, (total, created, _))| EliteTableRow::new(*b, *total, *created).creation_percent())
        .collect();
    let ok = got.iter().zip(&table).all(|(g, (_, _, want))| g == want);
    let shown: Vec<String> = got.iter().map(|v| format!("{v:.1}")).collect();
    verdict(ok, format!("ratios {}", shown.join(", ")))
}

// 4 ---------------------------------------------------------------------

fn criterion_4() -> Verdict {
    let a = compute_age(ym("1989-01"), ym("2019-01"));
    let b = compute_age(ym("1989-01"), ym("2020-01"));
    verdict(matches!(a, Ok(30)) && matches!(b, Ok(31)), format!("ages {a:?}, {b:?}"))
}

// 5 ---------------------------------------------------------------------

fn criterion_5() -> Verdict {
    let spec = SarimaSpec::arima(1, 0, 0);
    let params = SarimaParams {
        phi: vec![0.5],
        ..SarimaParams::white_noise(1.0)
    };
    let mut within = 0;
    let mut slowest = Duration::ZERO;
    for seed in 0..200 {
        let s = simulate(&spec, &params, 500, 5_000 + seed).unwrap();
        let started = Instant::now();
        let f = fit(&s, &spec).unwrap();
        forecast(&f, 12).unwrap();
        slowest = slowest.max(started.elapsed());
        let phi = f.params.phi[0];
        let se = ((1.0 - phi * phi) / 500.0).sqrt();
        if (phi - 0.5).abs() < 3.0 * se {
            within += 1;
        }
    }
    let rate = within as f64 / 200.0;
    verdict(
        rate >= 0.95 && slowest < Duration::from_secs(1),
        format!("{within}/200 within 3 SE ({:.1}%), slowest fit+forecast {:.3} s", 100.0 * rate, slowest.as_secs_f64()),
    )
}

// 6 ---------------------------------------------------------------------

fn criterion_6() -> Verdict {
    let got = aicc(-50.0, 2, 100);
    let hand = 100.0 + 4.0 + 12.0 / 97.0;
    verdict(
        (got - 104.1237).abs() < 1e-4 && (got - hand).abs() < 1e-12,
        format!("AICc {got:.6} (hand {hand:.6})"),
    )
}

// 7 ---------------------------------------------------------------------

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rejects = |y: &[f64]| kpss_test(y, KpssKind::Level).unwrap().decision == UnitRootDecision::NonStationary;
    let size = (0..1000)
        .filter(|_| {
            let y: Vec<f64> = (0..200).map(|_| gauss(&mut rng)).collect();
            rejects(&y)
        })
        .count();
    let power = (0..1000)
        .filter(|_| {
            let y: Vec<f64> = (0..500)
                .scan(0.0, |acc, _| {
                    *acc += gauss(&mut rng);
                    Some(*acc)
                })
                .collect();
            rejects(&y)
        })
        .count();
    let (size, power) = (size as f64 / 1000.0, power as f64 / 1000.0);
    verdict(
        (0.03..=0.07).contains(&size) && power > 0.9,
        format!("size {:.1}% on white noise, power {:.1}% on random walks", 100.0 * size, 100.0 * power),
    )
}

// 8 ---------------------------------------------------------------------

/// Stationary (or invertible) coefficients of order `k` from partial
/// autocorrelations in (-0.8, 0.8).
fn coefficients(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut c: Vec<f64> = Vec::new();
    for j in 0..k {
        let r: f64 = rng.random_range(-0.8..0.8);
        let prev = c.clone();
        for i in 0..j {
            c[i] = prev[i] - r * prev[j - 1 - i];
        }
        c.push(r);
    }
    c
}

fn criterion_8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let bounds = SearchBounds {
        max_p: 2,
        max_q: 2,
        max_sp: 0,
        max_sq: 0,
        max_d: 0,
        max_sd: 0,
        budget: 100,
    };
    let opts = StepwiseOptions {
        bounds,
        ..StepwiseOptions::default()
    };
    let mut ok = 0;
    let mut worst = 0.0f64;
    for seed in 0..200 {
        let (p, q) = (rng.random_range(0..=2), rng.random_range(0..=2));
        let with_mean = rng.random_bool(0.5);
        let spec = SarimaSpec::arima(p, 0, q).constant(with_mean);
        let params = SarimaParams {
            phi: coefficients(&mut rng, p),
            theta: coefficients(&mut rng, q).iter().map(|c| -c).collect(),
            mean: if with_mean { rng.random_range(-5.0..5.0) } else { 0.0 },
            ..SarimaParams::white_noise(1.0)
        };
        let s = simulate(&spec, &params, 150, 8_000 + seed).unwrap();
        let step = stepwise_search(&s, 0, 0, &opts).unwrap().best.aicc;
        let grid = exhaustive_search(&s, 0, 0, &bounds, false).unwrap().best.aicc;
        worst = worst.max(step - grid);
        if step <= grid + 2.0 {
            ok += 1;
        }
    }
    verdict(
        ok as f64 / 200.0 >= 0.9,
        format!("{ok}/200 within 2 AICc of the grid optimum, worst gap {worst:.3}"),
    )
}

// 9 ---------------------------------------------------------------------

fn ssr(y: &[f64]) -> f64 {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - m).powi(2)).sum()
}

/// Best boundaries for exactly `m` breaks (m ≤ 2) by trying every placement.
fn enumerate(y: &[f64], m: usize, h: usize) -> (Vec<usize>, f64) {
    let n = y.len();
    let mut best = (Vec::new(), f64::INFINITY);
    match m {
        0 => best = (Vec::new(), ssr(y)),
        1 => {
            for b in h..=n - h {
                let s = ssr(&y[..b]) + ssr(&y[b..]);
                if s < best.1 {
                    best = (vec![b], s);
                }
            }
        }
        _ => {
            for b1 in h..=n - 2 * h {
                for b2 in b1 + h..=n - h {
                    let s = ssr(&y[..b1]) + ssr(&y[b1..b2]) + ssr(&y[b2..]);
                    if s < best.1 {
                        best = (vec![b1, b2], s);
                    }
                }
            }
        }
    }
    best
}

fn criterion_9() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut cases, mut matched) = (0, 0);
    for _ in 0..100 {
        let n = rng.random_range(12..=60);
        let h = rng.random_range(2..=n / 4);
        let shift = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
        let cut = [rng.random_range(0..n), rng.random_range(0..n)];
        let y: Vec<f64> = (0..n)
            .map(|t| gauss(&mut rng) + shift[0] * f64::from(t >= cut[0]) + shift[1] * f64::from(t >= cut[1]))
            .collect();
        for m in 0..=2 {
            if (m + 1) * h > n {
                continue;
            }
            cases += 1;
            let (want, want_ssr) = enumerate(&y, m, h);
            if let Some((got, got_ssr)) = optimal_segmentation(&y, m, h) {
                if got == want && (got_ssr - want_ssr).abs() <= 1e-9 * (1.0 + want_ssr) {
                    matched += 1;
                }
            }
        }
    }
    verdict(matched == cases, format!("{matched}/{cases} segmentations match enumeration (100 series, n ≤ 60)"))
}

// 10 --------------------------------------------------------------------

fn criterion_10() -> Verdict {
    let config = CounterfactualConfig::default();
    let seasonal = SarimaSpec::arima(1, 0, 0).seasonal(1, 0, 0, 12).constant(true);
    let params = SarimaParams {
        phi: vec![0.4],
        sphi: vec![0.5],
        mean: 1000.0,
        ..SarimaParams::white_noise(1.0)
    };
    let base = simulate_from(&seasonal, &params, 126, 10, ym("2011-01")).unwrap();

    // Identity: feed the forecasts back in as actuals.
    let first = run_counterfactual("x", &base, &config).unwrap();
    let mut echoed = base.clone();
    for m in &first.months {
        echoed.values[m.month.months_since(base.start) as usize] = m.forecast;
    }
    let again = run_counterfactual("x", &echoed, &config).unwrap();
    let zero = again.months.iter().all(|m| m.excess == 0.0 && m.cumulative == 0.0) && again.total() == 0.0;

    // Shock of +50 a month: six-month cumulative within 5%.
    let mut shocked = base.clone();
    for i in 0..shocked.len() {
        if config.eval.contains(shocked.month_at(i)) {
            shocked.values[i] += 50.0;
        }
    }
    let r = run_counterfactual("x", &shocked, &config).unwrap();
    let six = r.months[5].cumulative;
    let shock_ok = (six - 300.0).abs() <= 0.05 * 300.0;

    // Coverage of the 95% cumulative interval on no-shock series.
    let ar = SarimaSpec::arima(1, 0, 0).constant(true);
    let ar_params = SarimaParams {
        phi: vec![0.5],
        mean: 1000.0,
        ..SarimaParams::white_noise(100.0)
    };
    let fixed = CounterfactualConfig {
        spec: Some(ar),
        ..config.clone()
    };
    let covered = (0..500)
        .filter(|seed| {
            let s = simulate_from(&ar, &ar_params, 126, 100_000 + seed, ym("2011-01")).unwrap();
            let r = run_counterfactual("x", &s, &fixed).unwrap();
            let b = r.months.last().unwrap().cumulative_bounds.iter().find(|b| b.level == 95.0).copied().unwrap();
            b.lower <= 0.0 && 0.0 <= b.upper
        })
        .count();
    let coverage = covered as f64 / 500.0;
    verdict(
        zero && shock_ok && (0.92..=0.98).contains(&coverage),
        format!(
            "identity {}, six-month shock {six:.1} vs 300, coverage {covered}/500 ({:.1}%)",
            if zero { "exact" } else { "broken" },
            100.0 * coverage
        ),
    )
}

// 11 --------------------------------------------------------------------

fn criterion_11() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = SarimaSpec::arima(0, 1, 0);
    let mut failures = 0;
    for _ in 0..50 {
        let sd: f64 = rng.random_range(0.3..3.0);
        let values: Vec<f64> = (0..40)
            .scan(0.0, |acc, _| {
                *acc += sd * gauss(&mut rng);
                Some(*acc)
            })
            .collect();
        let s = MonthlySeries::monthly(ym("2015-01"), values).unwrap();
        let f = fit_fixed(&s, &spec, &SarimaParams::white_noise(sd * sd)).unwrap();
        let fc = firmcast::ts::forecast_with_levels(&f, 24, &[50.0, 80.0, 90.0, 95.0, 99.0]).unwrap();
        let law = fc
            .variance
            .iter()
            .enumerate()
            .all(|(h, v)| (v - (h + 1) as f64 * fc.sigma2).abs() <= 1e-12 * v.abs().max(1.0));
        let nested = fc.intervals.windows(2).all(|w| {
            (0..24).all(|h| w[1].lower[h] <= w[0].lower[h] && w[0].upper[h] <= w[1].upper[h])
        }) && fc.intervals.iter().all(|iv| (0..24).all(|h| iv.lower[h] <= fc.mean[h] && fc.mean[h] <= iv.upper[h]));
        if !(law && nested) {
            failures += 1;
        }
    }
    verdict(failures == 0, format!("50 random walks, 24 horizons, 5 levels: {failures} violations"))
}

// 12 --------------------------------------------------------------------

fn tree(root: &Path, out: &mut BTreeMap<String, Vec<u8>>, base: &Path) {
    for e in fs::read_dir(root).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            tree(&p, out, base);
        } else {
            out.insert(p.strip_prefix(base).unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap());
        }
    }
}

fn criterion_12() -> Verdict {
    let spec = FixtureSpec::default();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut trees = Vec::new();
    let mut manifests = Vec::new();
    let mut slowest = Duration::ZERO;
    for d in &dirs {
        let layout = write_fixture(d.path(), &spec).unwrap();
        let config = PipelineConfig::load(&layout.config).unwrap();
        let started = Instant::now();
        let m = run_pipeline(&config, Stage::Report).unwrap();
        slowest = slowest.max(started.elapsed());
        let mut files = BTreeMap::new();
        tree(&config.output, &mut files, &config.output);
        files.remove(MANIFEST);
        trees.push(files);
        let mut m: Manifest = m;
        m.stages.iter_mut().for_each(|r| r.duration_ms = 0);
        manifests.push(m);
    }
    let differing: Vec<&String> = trees[0].keys().filter(|k| trees[1].get(*k) != Some(&trees[0][*k])).collect();
    let identical = differing.is_empty() && trees[0].len() == trees[1].len() && manifests[0] == manifests[1];
    verdict(
        identical && slowest < Duration::from_secs(120) && manifests[0].complete,
        format!(
            "{} months, {} firms, {} officers: {} output files, {} differ, slowest run {:.1} s",
            spec.months,
            spec.firms,
            spec.officers,
            trees[0].len(),
            differing.len(),
            slowest.as_secs_f64()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Verdict); 12] = [
        ("status state machine vs rule oracle", Duration::from_secs(1), criterion_1),
        ("edit distance vs full-matrix DP", Duration::from_secs(5), criterion_2),
        ("elite table creation ratios", Duration::from_secs(1), criterion_3),
        ("age rule", Duration::from_secs(1), criterion_4),
        ("AR(1) recovery", Duration::from_secs(200), criterion_5),
        ("AICc arithmetic", Duration::from_secs(1), criterion_6),
        ("KPSS size and power", Duration::from_secs(120), criterion_7),
        ("stepwise regret vs exhaustive grid", Duration::from_secs(600), criterion_8),
        ("Bai-Perron DP vs enumeration", Duration::from_secs(60), criterion_9),
        ("excess identity, shock recovery, coverage", Duration::from_secs(600), criterion_10),
        ("random-walk variance law and interval nesting", Duration::from_secs(1), criterion_11),
        ("end-to-end determinism", Duration::from_secs(240), criterion_12),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let v = run();
        let elapsed = started.elapsed();
        let pass = v.pass && elapsed <= *limit;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {:>2}. {name}: {} [{:.2} s, limit {} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("\n{} of 12 criteria passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
