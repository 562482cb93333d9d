//! Runs the structural break battery on a series with a level shift.
//!
//! `cargo run --release --example break_battery`

use firmcast::breaks::{run_battery, write_battery_csv, BatteryConfig};
use firmcast::calendar::YearMonth;
use firmcast::ts::{simulate_from, SarimaParams, SarimaSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SarimaSpec::arima(0, 0, 0).constant(true);
    let params = SarimaParams {
        mean: 100.0,
        ..SarimaParams::white_noise(16.0)
    };
    let start = YearMonth::new(2015, 1)?;
    let calm = simulate_from(&spec, &params, 96, 1, start)?;
    let mut shifted = calm.clone();
    let shift_at: YearMonth = "2020-03".parse()?;
    for i in 0..shifted.len() {
        if shifted.month_at(i) >= shift_at {
            shifted.values[i] += 25.0;
        }
    }
    let named = vec![("no shift".to_string(), calm), ("shift at 2020-03".to_string(), shifted)];
    let rows = run_battery(&named, &BatteryConfig::default());
    write_battery_csv(&rows, std::io::stdout().lock())?;
    Ok(())
}
