//! Distance between the mechanism's per-type lotteries in replica markets and
//! the lotteries of the offline equilibrium of the base market.

use serde::{Deserialize, Serialize};

use sem_core::equilibrium::{solve, Fundamentals, SolverConfig};
use sem_core::market::MarketSpec;
use sem_core::mechanism::run_sem;
use sem_core::Error;

use crate::stats::median;
use crate::{par_map, Result};

#[derive(Clone, Debug)]
pub struct ConvergenceConfig {
    pub market: MarketSpec,
    pub replicas: Vec<u64>,
    pub seeds: Vec<u64>,
    pub solver: SolverConfig,
    /// Distances above this count toward the tail fraction.
    pub epsilon: f64,
    pub workers: usize,
}

/// Lottery of each (type, period) under the offline equilibrium.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineAllocation {
    pub prices: Vec<f64>,
    pub clearing_error: f64,
    pub lotteries: Vec<((usize, usize), Vec<f64>)>,
}

impl OfflineAllocation {
    pub fn get(&self, ty: usize, period: usize) -> Option<&[f64]> {
        self.lotteries.iter().find(|(k, _)| *k == (ty, period)).map(|(_, l)| l.as_slice())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub distances: Vec<f64>,
    pub median: f64,
    pub tail: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub epsilon: f64,
    pub offline: OfflineAllocation,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    /// Number of consecutive grid points at which the median rises.
    pub fn inversions(&self) -> usize {
        self.rows.windows(2).filter(|w| w[1].median > w[0].median).count()
    }
}

/// The (1)-equilibrium of the base market at full supply.
pub fn offline_allocation(spec: &MarketSpec, cfg: &SolverConfig) -> Result<OfflineAllocation> {
    let supply: Vec<f64> = spec.objects.supply().iter().map(|&s| s as f64).collect();
    let f = Fundamentals::from_spec(spec, 1, &supply, None)?;
    let eq = solve(&f, &cfg.shocks(spec), cfg)?;
    if !eq.converged {
        return Err(Error::NoConvergence(format!("offline equilibrium: residual {:.3e}", eq.clearing_error)));
    }
    let lotteries = f.demanders.iter().zip(eq.allocation).map(|(d, l)| ((d.ty, d.period), l)).collect();
    Ok(OfflineAllocation { prices: eq.prices, clearing_error: eq.clearing_error, lotteries })
}

/// Largest entrywise gap between any arrival's lottery in one run and the
/// offline lottery of its type and period.
pub fn run_distance(spec: &MarketSpec, offline: &OfflineAllocation, seed: u64, cfg: &SolverConfig) -> Result<f64> {
    let trace = run_sem(spec, seed, cfg)?;
    let mut worst: f64 = 0.0;
    for p in &trace.periods {
        for (a, l) in p.arrivals.iter().zip(&p.lotteries) {
            let Some(target) = offline.get(a.ty, a.period) else { continue };
            let gap = l.iter().zip(target).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            worst = worst.max(gap);
        }
    }
    Ok(worst)
}

pub fn convergence_study(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    let offline = offline_allocation(&cfg.market, &cfg.solver)?;
    let markets: Vec<MarketSpec> = cfg.replicas.iter().map(|&n| cfg.market.replicate(n)).collect::<Result<_>>()?;
    let cells: Vec<(usize, u64)> = (0..markets.len()).flat_map(|k| cfg.seeds.iter().map(move |&s| (k, s))).collect();
    let distances = par_map(&cells, cfg.workers, |&(k, seed)| run_distance(&markets[k], &offline, seed, &cfg.solver));
    let mut rows = Vec::with_capacity(markets.len());
    let mut it = distances.into_iter();
    for &n in &cfg.replicas {
        let d: Vec<f64> = it.by_ref().take(cfg.seeds.len()).collect::<Result<_>>()?;
        let tail = if d.is_empty() { 0.0 } else { d.iter().filter(|&&v| v > cfg.epsilon).count() as f64 / d.len() as f64 };
        rows.push(ConvergenceRow { n, median: median(&d), tail, distances: d });
    }
    Ok(ConvergenceReport { epsilon: cfg.epsilon, offline, rows })
}
