//! Stepwise SARIMA selection on a simulated seasonal series, then a
//! forecast with 80% and 95% intervals.
//!
//! `cargo run --release --example fit_forecast`

use firmcast::selection::{auto_sarima, AutoOptions};
use firmcast::ts::{forecast_with_levels, simulate, SarimaParams, SarimaSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SarimaSpec::arima(1, 0, 0).seasonal(1, 0, 0, 12).constant(true);
    let params = SarimaParams {
        phi: vec![0.6],
        sphi: vec![0.5],
        mean: 200.0,
        ..SarimaParams::white_noise(25.0)
    };
    let series = simulate(&spec, &params, 180, 7)?;
    println!("simulated {spec} over {} months", series.len());

    let outcome = auto_sarima(&series, &AutoOptions::default())?;
    let best = &outcome.search.best;
    println!(
        "selected {} (d={}, D={}) after {} fits, AICc {:.2}, stop: {:?}",
        best.spec,
        outcome.d,
        outcome.sd,
        outcome.search.trace.visited.len(),
        best.aicc,
        outcome.search.trace.stop_reason
    );
    for (s, aicc) in &outcome.search.trace.path {
        println!("  accepted {s} AICc {aicc:.2}");
    }

    let fc = forecast_with_levels(best, 12, &[80.0, 95.0])?;
    println!("\nmonth    forecast   80% interval          95% interval");
    for h in 0..fc.horizon() {
        println!(
            "{}  {:>8.2}   [{:>7.2}, {:>7.2}]   [{:>7.2}, {:>7.2}]",
            fc.start.add_months(h as i64),
            fc.mean[h],
            fc.intervals[0].lower[h],
            fc.intervals[0].upper[h],
            fc.intervals[1].lower[h],
            fc.intervals[1].upper[h]
        );
    }
    Ok(())
}
