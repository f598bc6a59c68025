//! Paired-run probe for profitable misreports.

use serde::{Deserialize, Serialize};

use crate::equilibrium::SolverConfig;
use crate::error::{Error, Result};
use crate::market::MarketSpec;
use crate::mechanism::{quote, run_arrivals, run_shocks, sem_step, SemState};
use crate::seeds;

use super::dominance::{cumulative, sd_compare, Relation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sp1Trial {
    pub seed: u64,
    pub period: usize,
    pub truthful: Vec<f64>,
    pub misreport: Vec<f64>,
    pub profitable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sp1Report {
    pub truth: String,
    pub report: String,
    pub epsilon: f64,
    pub trials: Vec<Sp1Trial>,
    pub frequency: f64,
}

/// For each seed, picks a period in which type `i` may arrive, makes the
/// first arrival of that period a type-`i` agent and compares the lottery it
/// gets by reporting truthfully with the one it gets by reporting `j`. Both
/// runs share arrivals, shocks and all earlier periods. A misreport counts
/// as profitable when it strictly dominates the truthful lottery under `i`'s
/// preferences and raises the probability of some upper contour set of
/// those preferences by at least `epsilon`.
pub fn sp1_probe(spec: &MarketSpec, i: usize, j: usize, seeds: &[u64], epsilon: f64, cfg: &SolverConfig) -> Result<Sp1Report> {
    if i >= spec.types.len() || j >= spec.types.len() {
        return Err(Error::invalid("types", "unknown type index"));
    }
    let (ti, tj) = (spec.types[i].arrival, spec.types[j].arrival);
    if ti != tj {
        return Err(Error::invalid("types", "truth and misreport must share an arrival time"));
    }
    let prefs = &spec.types[i].prefs;
    let mut trials = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let period = match ti {
            Some(t) => t,
            None => 1 + (seeds::derive(seed, seeds::PROBE, 0) % spec.horizon as u64) as usize,
        };
        let mut arrivals = run_arrivals(spec, seed)?;
        if arrivals[period - 1].is_empty() {
            continue;
        }
        arrivals[period - 1][0].ty = i;
        let shocks = run_shocks(spec, seed, cfg);
        let mut state = SemState::new(spec);
        for (k, batch) in arrivals.iter().enumerate().take(period - 1) {
            let (_, next) = sem_step(spec, &state, batch, &shocks, cfg, seeds::derive(seed, seeds::ROUNDING, k as u64 + 1))?;
            state = next;
        }
        let mut types: Vec<usize> = arrivals[period - 1].iter().map(|a| a.ty).collect();
        let truthful = quote(spec, &state, &types, &shocks, cfg)?.lotteries[0].clone();
        types[0] = j;
        let misreport = quote(spec, &state, &types, &shocks, cfg)?.lotteries[0].clone();
        let gap = cumulative(prefs, &misreport).iter().zip(cumulative(prefs, &truthful)).map(|(a, b)| a - b).fold(0.0, f64::max);
        let profitable = sd_compare(prefs, &misreport, &truthful).relation == Relation::StrictlyDominates && gap >= epsilon;
        trials.push(Sp1Trial { seed, period, truthful, misreport, profitable });
    }
    let hits = trials.iter().filter(|t| t.profitable).count();
    let frequency = if trials.is_empty() { 0.0 } else { hits as f64 / trials.len() as f64 };
    Ok(Sp1Report { truth: spec.types[i].id.clone(), report: spec.types[j].id.clone(), epsilon, trials, frequency })
}
