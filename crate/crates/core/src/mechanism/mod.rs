//! Online mechanisms: the sequential equilibrium mechanism, dependent
//! rounding and the baselines it is compared against.

mod baselines;
mod rounding;
mod sem;
mod trace;

pub use baselines::{omniscient_benchmark, rank_vector, run_omniscient, run_sd_rtb, sd_rtb, BenchmarkMode, EXACT_LIMIT};
pub use rounding::dependent_round;
pub use sem::{advance, quote, realize, run_arrivals, run_sem, run_sem_on, run_shocks, sem_step, Quote, SemState};
pub use trace::{Mechanism, PeriodRecord, RunTrace};

use crate::equilibrium::SolverConfig;
use crate::error::Result;
use crate::market::MarketSpec;

/// Runs `mechanism` on a seeded draw of arrivals.
pub fn run(spec: &MarketSpec, mechanism: Mechanism, seed: u64, cfg: &SolverConfig) -> Result<RunTrace> {
    match mechanism {
        Mechanism::Sem => run_sem(spec, seed, cfg),
        Mechanism::SdRtb => run_sd_rtb(spec, seed),
        Mechanism::Omniscient => run_omniscient(spec, seed),
    }
}
