//! Placement rates of the mechanism against serial dictatorship with random
//! tie-breaking, over replica sizes and seeded markets.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use sem_core::equilibrium::SolverConfig;
use sem_core::market::{parse_market_spec, MarketSpec};
use sem_core::mechanism::{run, Mechanism, RunTrace};

use crate::stats::{mean, sd};
use crate::{par_map, Result};

/// The two-home, two-child-type market, two placements per home per replica.
pub const FOSTER: &str = include_str!("../../core/markets/foster.toml");
/// The same market with one placement per home per replica.
pub const FOSTER_UNIT: &str = include_str!("../../core/markets/foster_unit.toml");
/// Seeds of the committed study.
pub const SEED_BLOCK: &str = include_str!("../data/table1_seeds.txt");

pub const REPLICAS: [u64; 4] = [1, 5, 10, 25];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mechanism: Mechanism,
    pub n: u64,
    pub seed: u64,
    pub placement_rate: f64,
    /// Clearing residual of each period that solved an equilibrium.
    pub residuals: Vec<f64>,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub mechanism: Mechanism,
    pub n: u64,
    pub mean: f64,
    pub sd: f64,
    pub seeds: usize,
}

#[derive(Clone, Debug)]
pub struct Table1Config {
    pub market: MarketSpec,
    pub replicas: Vec<u64>,
    pub seeds: Vec<u64>,
    pub mechanisms: Vec<Mechanism>,
    pub solver: SolverConfig,
    pub workers: usize,
    pub keep_traces: bool,
}

impl Table1Config {
    /// The committed study: foster market, n ∈ {1, 5, 10, 25}, 25 seeds.
    pub fn standard() -> Result<Table1Config> {
        Ok(Table1Config {
            market: parse_market_spec(FOSTER)?,
            replicas: REPLICAS.to_vec(),
            seeds: parse_seed_block(SEED_BLOCK)?,
            mechanisms: vec![Mechanism::Sem, Mechanism::SdRtb],
            solver: SolverConfig::precise(),
            workers: 1,
            keep_traces: false,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Table1 {
    pub cells: Vec<CellSummary>,
    pub runs: Vec<RunSummary>,
    pub traces: Vec<RunTrace>,
}

impl Table1 {
    pub fn cell(&self, mechanism: Mechanism, n: u64) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.mechanism == mechanism && c.n == n)
    }

    pub fn rates(&self, mechanism: Mechanism, n: u64) -> Vec<f64> {
        self.runs.iter().filter(|r| r.mechanism == mechanism && r.n == n).map(|r| r.placement_rate).collect()
    }
}

/// One seed per line; blank lines and `#` comments are ignored.
pub fn parse_seed_block(text: &str) -> Result<Vec<u64>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| l.parse::<u64>().map_err(|e| sem_core::Error::Parse(format!("seed `{l}`: {e}"))))
        .collect()
}

pub fn table1(cfg: &Table1Config) -> Result<Table1> {
    let mut cells_in = Vec::new();
    for &mechanism in &cfg.mechanisms {
        for &n in &cfg.replicas {
            for &seed in &cfg.seeds {
                cells_in.push((mechanism, n, seed));
            }
        }
    }
    let markets: Vec<(u64, MarketSpec)> =
        cfg.replicas.iter().map(|&n| cfg.market.replicate(n).map(|s| (n, s))).collect::<Result<_>>()?;
    let results = par_map(&cells_in, cfg.workers, |&(mechanism, n, seed)| -> Result<(RunSummary, RunTrace)> {
        let spec = &markets.iter().find(|(k, _)| *k == n).expect("replicated market").1;
        let start = Instant::now();
        let trace = run(spec, mechanism, seed, &cfg.solver)?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let summary = RunSummary {
            mechanism,
            n,
            seed,
            placement_rate: trace.placement_rate()?,
            residuals: trace.periods.iter().filter_map(|p| p.clearing_error).collect(),
            wall_ms,
        };
        Ok((summary, trace))
    });
    let mut runs = Vec::with_capacity(results.len());
    let mut traces = Vec::new();
    for r in results {
        let (s, t) = r?;
        runs.push(s);
        if cfg.keep_traces {
            traces.push(t);
        }
    }
    let mut cells = Vec::new();
    for &mechanism in &cfg.mechanisms {
        for &n in &cfg.replicas {
            let rates: Vec<f64> = runs.iter().filter(|r| r.mechanism == mechanism && r.n == n).map(|r| r.placement_rate).collect();
            cells.push(CellSummary { mechanism, n, mean: mean(&rates), sd: sd(&rates), seeds: rates.len() });
        }
    }
    Ok(Table1 { cells, runs, traces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use sem_core::market::{Budgets, SpecBuilder};

    #[test]
    fn seed_block_parses() {
        assert_eq!(parse_seed_block("# header\n1\n 2 # two\n\n3").unwrap(), vec![1, 2, 3]);
        assert!(parse_seed_block("x").is_err());
        assert_eq!(parse_seed_block(SEED_BLOCK).unwrap().len(), 25);
    }

    #[test]
    fn no_scarcity_places_everyone() {
        let market = SpecBuilder::new("plenty", 2)
            .object("a", 4)
            .ty("c", &[&["a"]], None)
            .every_period("c", 1.0)
            .budgets(Budgets::greedy(1.0))
            .build()
            .unwrap();
        let cfg = Table1Config {
            market,
            replicas: vec![1, 3],
            seeds: vec![1, 2, 3],
            mechanisms: vec![Mechanism::Sem, Mechanism::SdRtb],
            solver: SolverConfig::precise(),
            workers: 1,
            keep_traces: false,
        };
        let t = table1(&cfg).unwrap();
        assert_eq!(t.cells.len(), 4);
        assert!(t.cells.iter().all(|c| c.mean == 1.0 && c.sd == 0.0 && c.seeds == 3));
    }
}
