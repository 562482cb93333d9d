//! Regenerates the critical-value tables shipped in `selection::critical`.
//!
//! ```text
//! cargo run --release --example critical_values -- [reps] [seed]
//! ```

use firmcast::selection::critical::{simulate_canova_hansen_critical, simulate_kpss_critical};
use firmcast::selection::KpssKind;

fn main() {
    let mut args = std::env::args().skip(1);
    let reps: usize = args.next().map_or(1_000_000, |s| s.parse().expect("reps"));
    let seed: u64 = args.next().map_or(20_240_101, |s| s.parse().expect("seed"));
    let fmt = |row: [f64; 4]| row.map(|v| format!("{v:.4}")).join(", ");

    println!("// alpha: 10%, 5%, 2.5%, 1%; {reps} replications, seed {seed}");
    let level = simulate_kpss_critical(KpssKind::Level, 500, reps, seed);
    println!("pub const KPSS_LEVEL: [f64; 4] = [{}];", fmt(level));
    let trend = simulate_kpss_critical(KpssKind::Trend, 500, reps, seed + 1);
    println!("pub const KPSS_TREND: [f64; 4] = [{}];", fmt(trend));

    let ch_reps = (reps / 5).max(1);
    println!("pub const CANOVA_HANSEN: [[f64; 4]; 12] = [");
    for k in 1..=12 {
        let row = simulate_canova_hansen_critical(k, ch_reps, seed + 1 + k as u64);
        println!("    [{}],", fmt(row));
    }
    println!("];");
}
