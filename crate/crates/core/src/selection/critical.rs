//! Null distributions for the stationarity tests.
//!
//! The shipped tables were produced by `examples/critical_values.rs`, which
//! calls the generators below: the KPSS statistics are computed on i.i.d.
//! Gaussian samples of length 500 with the long-run variance known
//! (10⁶ replications), and the Canova-Hansen limit for `k` frequencies is
//! simulated as a sum of `k` independent Brownian-bridge functionals
//! `Σ_j Z_j² / (j²π²)` (2·10⁵ replications per row), seed 20240101.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kpss::{kpss_statistic, KpssKind};

/// Upper-tail significance levels with tabulated critical values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Significance {
    Ten,
    Five,
    TwoPointFive,
    One,
}

impl Significance {
    pub const ALL: [Significance; 4] = [Significance::Ten, Significance::Five, Significance::TwoPointFive, Significance::One];

    pub fn alpha(self) -> f64 {
        match self {
            Significance::Ten => 0.10,
            Significance::Five => 0.05,
            Significance::TwoPointFive => 0.025,
            Significance::One => 0.01,
        }
    }

    fn index(self) -> usize {
        match self {
            Significance::Ten => 0,
            Significance::Five => 1,
            Significance::TwoPointFive => 2,
            Significance::One => 3,
        }
    }

    pub fn from_alpha(alpha: f64) -> Option<Self> {
        Self::ALL.into_iter().find(|s| (s.alpha() - alpha).abs() < 1e-9)
    }
}

/// KPSS level-stationarity critical values at 10%, 5%, 2.5%, 1%.
pub const KPSS_LEVEL: [f64; 4] = [0.3478, 0.4620, 0.5817, 0.7440];
/// KPSS trend-stationarity critical values at 10%, 5%, 2.5%, 1%.
pub const KPSS_TREND: [f64; 4] = [0.1194, 0.1480, 0.1772, 0.2174];

/// Canova-Hansen critical values; row `k - 1` holds the values for `k`
/// tested frequencies at 10%, 5%, 2.5%, 1%.
pub const CANOVA_HANSEN: [[f64; 4]; 12] = [
    [0.3468, 0.4612, 0.5811, 0.7418],
    [0.6071, 0.7457, 0.8860, 1.0753],
    [0.8394, 0.9977, 1.1550, 1.3599],
    [1.0622, 1.2377, 1.4124, 1.6287],
    [1.2777, 1.4646, 1.6412, 1.8751],
    [1.4899, 1.6911, 1.8799, 2.1192],
    [1.6922, 1.9043, 2.1020, 2.3506],
    [1.8963, 2.1167, 2.3240, 2.5829],
    [2.0943, 2.3221, 2.5377, 2.8127],
    [2.2967, 2.5330, 2.7578, 3.0271],
    [2.4867, 2.7348, 2.9694, 3.2640],
    [2.6865, 2.9428, 3.1801, 3.4745],
];

pub fn kpss_critical(kind: KpssKind, level: Significance) -> f64 {
    match kind {
        KpssKind::Level => KPSS_LEVEL[level.index()],
        KpssKind::Trend => KPSS_TREND[level.index()],
    }
}

/// `None` when `frequencies` is outside the tabulated 1..=12.
pub fn canova_hansen_critical(frequencies: usize, level: Significance) -> Option<f64> {
    (1..=12)
        .contains(&frequencies)
        .then(|| CANOVA_HANSEN[frequencies - 1][level.index()])
}

pub(crate) fn quantiles(mut draws: Vec<f64>) -> [f64; 4] {
    draws.sort_by(f64::total_cmp);
    let n = draws.len();
    Significance::ALL.map(|s| {
        let rank = (((1.0 - s.alpha()) * n as f64).ceil() as usize).clamp(1, n);
        draws[rank - 1]
    })
}

const CHUNK: usize = 10_000;

pub(crate) fn chunked<F>(reps: usize, seed: u64, draw: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let chunks = reps.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(reps - c * CHUNK);
            let draw = &draw;
            (0..count).map(move |_| draw(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

/// Monte Carlo critical values of the KPSS statistic on i.i.d. Gaussian
/// samples of length `n`.
pub fn simulate_kpss_critical(kind: KpssKind, n: usize, reps: usize, seed: u64) -> [f64; 4] {
    let draws = chunked(reps, seed, |rng| {
        let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        kpss_statistic(&y, kind, 0)
    });
    quantiles(draws)
}

/// One draw of `∫ V(r)² dr` for a Brownian bridge `V`, from the first
/// `terms` eigencomponents plus the expected remainder.
fn bridge_functional(rng: &mut ChaCha8Rng, terms: usize) -> f64 {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let mut s = 0.0;
    for j in 1..=terms {
        let z: f64 = StandardNormal.sample(rng);
        s += z * z / (j as f64 * j as f64 * pi2);
    }
    // Σ_{j>K} 1/(j²π²) ≈ 1/(π²(K + 1/2)).
    s + 1.0 / (pi2 * (terms as f64 + 0.5))
}

/// Monte Carlo critical values of the Canova-Hansen limit with
/// `frequencies` degrees of freedom.
pub fn simulate_canova_hansen_critical(frequencies: usize, reps: usize, seed: u64) -> [f64; 4] {
    let draws = chunked(reps, seed, |rng| (0..frequencies).map(|_| bridge_functional(rng, 200)).sum());
    quantiles(draws)
}
