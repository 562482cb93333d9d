//! Counterfactual excess on a seasonal series with a known shock added to
//! the evaluation window.
//!
//! `cargo run --release --example excess_shock`

use firmcast::calendar::YearMonth;
use firmcast::excess::{quarterly_rollup, run_counterfactual, CounterfactualConfig};
use firmcast::ts::{simulate_from, SarimaParams, SarimaSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SarimaSpec::arima(1, 0, 0).seasonal(1, 0, 0, 12).constant(true);
    let params = SarimaParams {
        phi: vec![0.4],
        sphi: vec![0.6],
        mean: 1000.0,
        ..SarimaParams::white_noise(100.0)
    };
    let mut series = simulate_from(&spec, &params, 126, 11, YearMonth::new(2011, 1)?)?;
    let config = CounterfactualConfig::default();
    for i in 0..series.len() {
        if config.eval.contains(series.month_at(i)) {
            series.values[i] += 50.0;
        }
    }

    let report = run_counterfactual("simulated", &series, &config)?;
    println!("model {} (AICc {:.2}); {}", report.model.spec, report.model.aicc, report.convention.label());
    println!("\nmonth    actual   forecast  excess  cumulative  95% cumulative bounds");
    for m in &report.months {
        let b = m.cumulative_bounds.iter().find(|b| b.level == 95.0).expect("95% level");
        println!(
            "{}  {:>7.1}  {:>8.1}  {:>6.1}  {:>10.1}  [{:.1}, {:.1}]",
            m.month, m.actual, m.forecast, m.excess, m.cumulative, b.lower, b.upper
        );
    }
    println!("\ninjected {:.0}, estimated {:.1}", 50.0 * report.months.len() as f64, report.total());
    for q in quarterly_rollup(&report) {
        let partial = if q.partial { " (partial)" } else { "" };
        println!("{} Q{}: excess {:.1} over {} months{partial}", q.year, q.quarter, q.excess, q.months);
    }
    Ok(())
}
