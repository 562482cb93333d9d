use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ts::{fit, FittedSarima, MonthlySeries, SarimaSpec};

use super::SelectionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBounds {
    pub max_p: usize,
    pub max_q: usize,
    #[serde(rename = "max_P")]
    pub max_sp: usize,
    #[serde(rename = "max_Q")]
    pub max_sq: usize,
    pub max_d: usize,
    #[serde(rename = "max_D")]
    pub max_sd: usize,
    /// Maximum number of distinct models fitted.
    pub budget: usize,
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            max_p: 5,
            max_q: 5,
            max_sp: 2,
            max_sq: 2,
            max_d: 1,
            max_sd: 1,
            budget: 250,
        }
    }
}

impl SearchBounds {
    /// Same order caps for every polynomial.
    pub fn uniform(max_order: usize) -> Self {
        Self {
            max_p: max_order,
            max_q: max_order,
            max_sp: max_order,
            max_sq: max_order,
            ..Self::default()
        }
    }

    fn admits(&self, s: &SarimaSpec) -> bool {
        s.p <= self.max_p && s.q <= self.max_q && s.sp <= self.max_sp && s.sq <= self.max_sq
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    NoImprovement,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitedModel {
    pub spec: SarimaSpec,
    /// `+∞` for failed or non-converged fits.
    pub aicc: f64,
    pub failure: Option<String>,
    /// Search round in which the model was fitted; 0 is the start set.
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub visited: Vec<VisitedModel>,
    /// Incumbents in order of acceptance.
    pub path: Vec<(SarimaSpec, f64)>,
    pub stop_reason: StopReason,
}

impl SearchTrace {
    /// Writes one row per visited model.
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["round", "model", "p", "d", "q", "P", "D", "Q", "m", "constant", "aicc", "accepted", "failure"])?;
        for v in &self.visited {
            let s = &v.spec;
            let accepted = self.path.iter().any(|(p, _)| p == s);
            w.write_record([
                v.round.to_string(),
                s.to_string(),
                s.p.to_string(),
                s.d.to_string(),
                s.q.to_string(),
                s.sp.to_string(),
                s.sd.to_string(),
                s.sq.to_string(),
                s.m.to_string(),
                s.with_constant.to_string(),
                v.aicc.to_string(),
                accepted.to_string(),
                v.failure.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: FittedSarima,
    pub trace: SearchTrace,
}

/// Total order used to rank candidates: AICc, then fewer coefficients,
/// then spec order.
fn rank_key(spec: &SarimaSpec, aicc: f64) -> (f64, usize, SarimaSpec) {
    (aicc, spec.n_coefficients(), *spec)
}

fn better(a: (&SarimaSpec, f64), b: (&SarimaSpec, f64)) -> bool {
    let (ka, kb) = (rank_key(a.0, a.1), rank_key(b.0, b.1));
    match ka.0.total_cmp(&kb.0) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => (ka.1, ka.2) < (kb.1, kb.2),
    }
}

/// Constant (or drift) terms are considered only when `d + D ≤ 1`.
pub fn constant_admissible(d: usize, sd: usize) -> bool {
    d + sd <= 1
}

fn evaluate(series: &MonthlySeries, spec: &SarimaSpec) -> (f64, Option<String>, Option<FittedSarima>) {
    match fit(series, spec) {
        Ok(f) if !f.convergence.converged => (f64::INFINITY, Some("did not converge".into()), None),
        Ok(f) if !f.aicc.is_finite() => (f64::INFINITY, Some("too few observations for AICc".into()), None),
        Ok(f) => (f.aicc, None, Some(f)),
        Err(e) => (f64::INFINITY, Some(e.to_string()), None),
    }
}

struct Search<'a> {
    series: &'a MonthlySeries,
    fits: BTreeMap<SarimaSpec, FittedSarima>,
    visited: Vec<VisitedModel>,
    parallel: bool,
}

impl Search<'_> {
    fn seen(&self, spec: &SarimaSpec) -> bool {
        self.visited.iter().any(|v| v.spec == *spec)
    }

    fn aicc_of(&self, spec: &SarimaSpec) -> f64 {
        self.visited.iter().find(|v| v.spec == *spec).map_or(f64::INFINITY, |v| v.aicc)
    }

    fn run_round(&mut self, specs: Vec<SarimaSpec>, round: usize) {
        let results: Vec<_> = if self.parallel {
            specs.par_iter().map(|s| evaluate(self.series, s)).collect()
        } else {
            specs.iter().map(|s| evaluate(self.series, s)).collect()
        };
        for (spec, (aicc, failure, fitted)) in specs.into_iter().zip(results) {
            if let Some(f) = fitted {
                self.fits.insert(spec, f);
            }
            self.visited.push(VisitedModel {
                spec,
                aicc,
                failure,
                round,
            });
        }
    }

    fn best_of(&self, specs: &[SarimaSpec]) -> Option<(SarimaSpec, f64)> {
        let mut best: Option<(SarimaSpec, f64)> = None;
        for s in specs {
            let a = self.aicc_of(s);
            if best.is_none_or(|(bs, ba)| better((s, a), (&bs, ba))) {
                best = Some((*s, a));
            }
        }
        best
    }
}

#[derive(Debug, Clone, Default)]
pub struct StepwiseOptions {
    pub bounds: SearchBounds,
    /// Extra specs evaluated with the start set.
    pub seeds: Vec<SarimaSpec>,
    /// Fit the models of a round in parallel.
    pub parallel: bool,
}

/// Stepwise AICc search with fixed differencing orders.
///
/// The start set is always evaluated in full, even past the budget. Each
/// round fits every unvisited neighbour of the incumbent (one order up or
/// down, or the constant toggled) and moves to the best one if it is
/// strictly better.
pub fn stepwise_search(
    series: &MonthlySeries,
    d: usize,
    sd: usize,
    opts: &StepwiseOptions,
) -> Result<SearchOutcome, SelectionError> {
    let m = series.period;
    let seasonal = m > 1;
    let b = opts.bounds;
    let sd = if seasonal { sd } else { 0 };
    let make = |p: usize, q: usize, sp: usize, sq: usize, c: bool| {
        let spec = SarimaSpec::arima(p, d, q).constant(c);
        if seasonal {
            spec.seasonal(sp, sd, sq, m)
        } else {
            spec
        }
    };
    let constants: &[bool] = if constant_admissible(d, sd) { &[true, false] } else { &[false] };
    let mut start = Vec::new();
    for &(p, q, sp, sq) in &[(2, 2, 1, 1), (0, 0, 0, 0), (1, 0, 1, 0), (0, 1, 0, 1)] {
        for &c in constants {
            let (sp, sq) = if seasonal { (sp, sq) } else { (0, 0) };
            let s = make(p.min(b.max_p), q.min(b.max_q), sp.min(b.max_sp), sq.min(b.max_sq), c);
            if !start.contains(&s) {
                start.push(s);
            }
        }
    }
    for s in &opts.seeds {
        if !start.contains(s) {
            start.push(*s);
        }
    }
    let mut search = Search {
        series,
        fits: BTreeMap::new(),
        visited: Vec::new(),
        parallel: opts.parallel,
    };
    search.run_round(start.clone(), 0);
    let (mut inc, mut inc_aicc) = search.best_of(&start).expect("start set is non-empty");
    let mut path = vec![(inc, inc_aicc)];
    let mut round = 0;
    let stop_reason = loop {
        if !inc_aicc.is_finite() {
            break StopReason::NoImprovement;
        }
        round += 1;
        let mut neighbours = Vec::new();
        let step = |v: usize, up: bool| if up { v.checked_add(1) } else { v.checked_sub(1) };
        for up in [false, true] {
            for which in 0..4 {
                let mut s = inc;
                let target = match which {
                    0 => &mut s.p,
                    1 => &mut s.q,
                    2 => &mut s.sp,
                    _ => &mut s.sq,
                };
                if which >= 2 && !seasonal {
                    continue;
                }
                let Some(v) = step(*target, up) else { continue };
                *target = v;
                if b.admits(&s) {
                    neighbours.push(s);
                }
            }
        }
        if constants.len() == 2 {
            let mut s = inc;
            s.with_constant = !s.with_constant;
            neighbours.push(s);
        }
        neighbours.retain(|s| !search.seen(s));
        neighbours.sort();
        neighbours.dedup();
        let remaining = b.budget.saturating_sub(search.visited.len());
        let exhausted = neighbours.len() > remaining;
        neighbours.truncate(remaining);
        if neighbours.is_empty() {
            break if exhausted { StopReason::BudgetExhausted } else { StopReason::NoImprovement };
        }
        search.run_round(neighbours.clone(), round);
        let (cand, cand_aicc) = search.best_of(&neighbours).expect("non-empty");
        if cand_aicc < inc_aicc {
            inc = cand;
            inc_aicc = cand_aicc;
            path.push((inc, inc_aicc));
        } else if exhausted {
            break StopReason::BudgetExhausted;
        } else {
            break StopReason::NoImprovement;
        }
        if exhausted {
            break StopReason::BudgetExhausted;
        }
    };
    let best = search.fits.remove(&inc).ok_or(SelectionError::NoAdmissibleModel)?;
    Ok(SearchOutcome {
        best,
        trace: SearchTrace {
            visited: search.visited,
            path,
            stop_reason,
        },
    })
}

/// Fits every model inside the bounds with the given differencing orders.
pub fn exhaustive_search(
    series: &MonthlySeries,
    d: usize,
    sd: usize,
    bounds: &SearchBounds,
    parallel: bool,
) -> Result<SearchOutcome, SelectionError> {
    let m = series.period;
    let seasonal = m > 1;
    let constants: &[bool] = if constant_admissible(d, if seasonal { sd } else { 0 }) { &[true, false] } else { &[false] };
    let (msp, msq) = if seasonal { (bounds.max_sp, bounds.max_sq) } else { (0, 0) };
    let mut specs = Vec::new();
    for p in 0..=bounds.max_p {
        for q in 0..=bounds.max_q {
            for sp in 0..=msp {
                for sq in 0..=msq {
                    for &c in constants {
                        let s = SarimaSpec::arima(p, d, q).constant(c);
                        specs.push(if seasonal { s.seasonal(sp, sd, sq, m) } else { s });
                    }
                }
            }
        }
    }
    let mut search = Search {
        series,
        fits: BTreeMap::new(),
        visited: Vec::new(),
        parallel,
    };
    search.run_round(specs.clone(), 0);
    let (inc, aicc) = search.best_of(&specs).expect("grid is non-empty");
    let best = search.fits.remove(&inc).ok_or(SelectionError::NoAdmissibleModel)?;
    Ok(SearchOutcome {
        best,
        trace: SearchTrace {
            visited: search.visited,
            path: vec![(inc, aicc)],
            stop_reason: StopReason::NoImprovement,
        },
    })
}
