use firmcast::selection::critical::{simulate_canova_hansen_critical, simulate_kpss_critical, CANOVA_HANSEN, KPSS_LEVEL, KPSS_TREND};
use firmcast::selection::{
    auto_sarima, canova_hansen_test, exhaustive_search, kpss_test, select_d, select_seasonal_d, stepwise_search,
    AutoOptions, KpssKind, SearchBounds, SeasonalDecision, StepwiseOptions, UnitRootDecision,
};
use firmcast::ts::{fit, simulate, MonthlySeries, SarimaParams, SarimaSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn cumsum(x: &[f64]) -> Vec<f64> {
    x.iter()
        .scan(0.0, |s, v| {
            *s += v;
            Some(*s)
        })
        .collect()
}

#[test]
fn shipped_tables_agree_with_fresh_simulation() {
    let level = simulate_kpss_critical(KpssKind::Level, 300, 40_000, 99);
    let trend = simulate_kpss_critical(KpssKind::Trend, 300, 40_000, 98);
    for i in 0..3 {
        assert!((level[i] - KPSS_LEVEL[i]).abs() / KPSS_LEVEL[i] < 0.05, "{level:?}");
        assert!((trend[i] - KPSS_TREND[i]).abs() / KPSS_TREND[i] < 0.05, "{trend:?}");
    }
    let ch = simulate_canova_hansen_critical(11, 20_000, 97);
    for i in 0..3 {
        assert!((ch[i] - CANOVA_HANSEN[10][i]).abs() / CANOVA_HANSEN[10][i] < 0.05, "{ch:?}");
    }
}

#[test]
fn kpss_null_size_and_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rejections = (0..1000)
        .filter(|_| kpss_test(&noise(&mut rng, 200), KpssKind::Level).unwrap().decision == UnitRootDecision::NonStationary)
        .count();
    let rate = rejections as f64 / 1000.0;
    assert!((0.03..=0.07).contains(&rate), "size {rate}");
    let power = (0..200)
        .filter(|_| {
            let rw = cumsum(&noise(&mut rng, 500));
            kpss_test(&rw, KpssKind::Level).unwrap().decision == UnitRootDecision::NonStationary
        })
        .count();
    assert!(power as f64 / 200.0 > 0.9, "power {power}/200");
}

#[test]
fn differencing_order_selection() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let ar = SarimaSpec::arima(1, 0, 0);
    let params = SarimaParams {
        phi: vec![0.5],
        ..SarimaParams::white_noise(1.0)
    };
    let mut stationary_zero = 0;
    let mut walk_one = 0;
    for seed in 0..100 {
        let s = simulate(&ar, &params, 200, seed).unwrap();
        stationary_zero += usize::from(select_d(&s.values, 1, KpssKind::Level) == 0);
        let rw = cumsum(&noise(&mut rng, 200));
        walk_one += usize::from(select_d(&rw, 1, KpssKind::Level) == 1);
        assert_eq!(select_d(&rw, 0, KpssKind::Level), 0);
        assert!(select_d(&rw, 2, KpssKind::Level) <= 2);
    }
    assert!(stationary_zero > 50, "{stationary_zero}");
    assert!(walk_one > 50, "{walk_one}");
}

#[test]
fn seasonal_differencing_selection() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pattern: Vec<f64> = (0..12).map(|i| 10.0 * (i as f64 * 0.5).sin()).collect();
    let mut stable_zero = 0;
    let mut walk_one = 0;
    let draws = 100;
    for _ in 0..draws {
        let e = noise(&mut rng, 144);
        let stable: Vec<f64> = (0..144).map(|t| pattern[t % 12] + 0.5 * e[t]).collect();
        stable_zero += usize::from(select_seasonal_d(&stable, 12, 1) == 0);
        let shocks = noise(&mut rng, 144);
        let mut srw = vec![0.0; 144];
        for t in 0..144 {
            srw[t] = shocks[t] + if t >= 12 { srw[t - 12] } else { 0.0 };
        }
        walk_one += usize::from(select_seasonal_d(&srw, 12, 1) == 1);
        assert_eq!(select_seasonal_d(&srw, 1, 1), 0);
        assert_eq!(select_seasonal_d(&srw, 12, 0), 0);
    }
    assert!(stable_zero as f64 / draws as f64 > 0.85, "{stable_zero}");
    assert!(walk_one as f64 / draws as f64 > 0.85, "{walk_one}");
    let r = canova_hansen_test(&(0..48).map(|t| pattern[t % 12]).collect::<Vec<_>>(), 12).unwrap();
    assert_eq!(r.decision, SeasonalDecision::StableSeasonality);
}

fn with_period(s: MonthlySeries, period: usize) -> MonthlySeries {
    MonthlySeries::new(s.start, s.values, period).unwrap()
}

#[test]
fn white_noise_selects_small_model() {
    let s = simulate(&SarimaSpec::arima(0, 0, 0), &SarimaParams::white_noise(1.0), 300, 12).unwrap();
    let s = with_period(s, 12);
    let out = stepwise_search(&s, 0, 0, &StepwiseOptions::default()).unwrap();
    let spec = out.best.spec;
    assert!(spec.p + spec.q + spec.sp + spec.sq <= 1, "{spec}");
    let truth = fit(&s, &SarimaSpec::arima(0, 0, 0).seasonal(0, 0, 0, 12)).unwrap();
    assert!(out.best.aicc <= truth.aicc + 2.0);
    let small = SearchBounds {
        max_p: 2,
        max_q: 2,
        max_sp: 1,
        max_sq: 1,
        ..SearchBounds::default()
    };
    let grid = exhaustive_search(&s, 0, 0, &small, true).unwrap();
    assert!(out.best.aicc <= grid.best.aicc + 2.0);
}

#[test]
fn seasonal_model_search_with_true_spec_seeded() {
    let truth = SarimaSpec::arima(1, 0, 0).seasonal(0, 1, 1, 12);
    let params = SarimaParams {
        phi: vec![0.5],
        stheta: vec![-0.5],
        ..SarimaParams::white_noise(1.0)
    };
    let s = simulate(&truth, &params, 240, 31).unwrap();
    let opts = AutoOptions {
        seeds: vec![truth],
        parallel: true,
        ..AutoOptions::default()
    };
    let out = auto_sarima(&s, &opts).unwrap();
    assert_eq!(out.sd, 1);
    let true_fit = fit(&s, &truth).unwrap();
    assert!(out.search.best.aicc <= true_fit.aicc + 0.01);
    let min = out.search.trace.visited.iter().map(|v| v.aicc).fold(f64::INFINITY, f64::min);
    assert_eq!(out.search.best.aicc, min);
}

#[test]
fn search_is_deterministic() {
    let spec = SarimaSpec::arima(1, 0, 0).seasonal(1, 0, 0, 12).constant(true);
    let params = SarimaParams {
        phi: vec![0.4],
        sphi: vec![0.5],
        mean: 5.0,
        ..SarimaParams::white_noise(1.0)
    };
    let s = simulate(&spec, &params, 150, 5).unwrap();
    let opts = AutoOptions {
        parallel: true,
        ..AutoOptions::default()
    };
    let a = auto_sarima(&s, &opts).unwrap();
    let b = auto_sarima(&s, &opts).unwrap();
    assert_eq!(a.search.trace, b.search.trace);
    assert_eq!(a.search.best, b.search.best);
}
