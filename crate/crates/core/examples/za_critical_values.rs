//! Regenerates the Zivot-Andrews table shipped in `breaks`.
//!
//! ```text
//! cargo run --release --example za_critical_values -- [reps] [seed]
//! ```

use firmcast::breaks::{simulate_zivot_andrews_critical, ZaModel};

fn main() {
    let mut args = std::env::args().skip(1);
    let reps: usize = args.next().map_or(50_000, |s| s.parse().expect("reps"));
    let seed: u64 = args.next().map_or(20_240_102, |s| s.parse().expect("seed"));
    let fmt = |row: [f64; 4]| row.map(|v| format!("{v:.4}")).join(", ");

    println!("// alpha: 10%, 5%, 2.5%, 1%; random walks of length 200; {reps} replications, seed {seed}");
    println!("pub const ZIVOT_ANDREWS: [[f64; 4]; 3] = [");
    for (i, model) in ZaModel::ALL.into_iter().enumerate() {
        let row = simulate_zivot_andrews_critical(model, 200, reps, seed + i as u64);
        println!("    [{}],", fmt(row));
    }
    println!("];");
}
