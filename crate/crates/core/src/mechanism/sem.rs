//! The sequential equilibrium mechanism.
//!
//! Each period opens a spot market on the realized arrivals plus the
//! forecast of later periods, solves for equilibrium prices with greedy
//! budgets, hands each arrival its type's lottery and draws an ex-post
//! assignment by dependent rounding.

use serde::{Deserialize, Serialize};

use crate::demand::ShockSample;
use crate::equilibrium::{solve, Fundamentals, SolverConfig};
use crate::error::{Error, Result};
use crate::market::{Instance, MarketSpec};
use crate::seeds;

use super::rounding::dependent_round;
use super::trace::{Mechanism, PeriodRecord, RunTrace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemState {
    /// Period about to be played, `1..=T`; `T + 1` once the horizon is over.
    pub period: usize,
    pub remaining: Vec<u64>,
    pub terminated: bool,
    pub history: Vec<PeriodRecord>,
}

impl SemState {
    pub fn new(spec: &MarketSpec) -> SemState {
        SemState { period: 1, remaining: spec.objects.supply().to_vec(), terminated: false, history: Vec::new() }
    }

    /// True when no real object has supply left.
    pub fn exhausted(&self, null: usize) -> bool {
        self.remaining.iter().enumerate().all(|(x, &s)| x == null || s == 0)
    }
}

/// Prices and lotteries for a period, before any randomization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub period: usize,
    pub prices: Vec<f64>,
    pub clearing_error: f64,
    pub iterations: usize,
    /// Current-period mass per type used in the spot market.
    pub masses: Vec<f64>,
    /// One lottery per arrival, restricted to available supply.
    pub lotteries: Vec<Vec<f64>>,
    pub renormalized: bool,
    /// The arrival count is more than 50% away from the forecast.
    pub count_deviation: bool,
}

/// Computes the period's spot-market equilibrium for arrivals of the given
/// types. The arrivals are rescaled to the replica size, so any count is
/// accepted.
pub fn quote(spec: &MarketSpec, state: &SemState, types: &[usize], shocks: &ShockSample, cfg: &SolverConfig) -> Result<Quote> {
    let t = state.period;
    if t == 0 || t > spec.horizon {
        return Err(Error::invalid("period", format!("{t} outside 1..={}", spec.horizon)));
    }
    if state.remaining.len() != spec.objects.len() {
        return Err(Error::invalid("remaining", "one entry per object required"));
    }
    let m = spec.objects.len();
    let null = spec.objects.null();
    let n = spec.replicas as f64;
    let mut counts = vec![0usize; spec.types.len()];
    for &i in types {
        *counts.get_mut(i).ok_or_else(|| Error::invalid("arrivals", format!("unknown type index {i}")))? += 1;
    }
    let masses: Vec<f64> = if types.is_empty() {
        (0..spec.types.len()).map(|i| n * spec.density[t - 1][i]).collect()
    } else {
        counts.iter().map(|&c| n * c as f64 / types.len() as f64).collect()
    };
    let renormalized = !types.is_empty() && types.len() as u64 != spec.replicas;
    let count_deviation = !types.is_empty() && (types.len() as f64 - n).abs() > 0.5 * n;
    if state.exhausted(null) {
        let mut point = vec![0.0; m];
        point[null] = 1.0;
        return Ok(Quote {
            period: t,
            prices: vec![0.0; m],
            clearing_error: 0.0,
            iterations: 0,
            masses,
            lotteries: vec![point; types.len()],
            renormalized,
            count_deviation,
        });
    }
    let supply: Vec<f64> = state.remaining.iter().map(|&s| s as f64).collect();
    let current = if types.is_empty() { None } else { Some(masses.as_slice()) };
    let f = Fundamentals::from_spec(spec, t, &supply, current)?;
    let eq = solve(&f, shocks, cfg)?;
    if !eq.converged {
        return Err(Error::NoConvergence(format!(
            "period {t}: residual {:.3e} after {} iterations at prices {:?}",
            eq.clearing_error, eq.iterations, eq.prices
        )));
    }
    let mut lotteries = Vec::with_capacity(types.len());
    for &i in types {
        let d = f
            .demanders
            .iter()
            .position(|d| d.ty == i && d.period == t)
            .ok_or_else(|| Error::Other(format!("type {i} missing from the period-{t} market")))?;
        lotteries.push(eq.allocation[d].clone());
    }
    restrict_to_supply(&mut lotteries, &state.remaining, null);
    Ok(Quote { period: t, prices: eq.prices, clearing_error: eq.clearing_error, iterations: eq.iterations, masses, lotteries, renormalized, count_deviation })
}

/// Scales down any column that exceeds the integer supply and moves the
/// excess to the null object.
fn restrict_to_supply(rows: &mut [Vec<f64>], remaining: &[u64], null: usize) {
    let m = remaining.len();
    for x in 0..m {
        if x == null {
            continue;
        }
        let col: f64 = rows.iter().map(|r| r[x]).sum();
        let cap = remaining[x] as f64;
        if col > cap {
            let keep = if col > 0.0 { cap / col } else { 0.0 };
            for r in rows.iter_mut() {
                let moved = r[x] * (1.0 - keep);
                r[x] -= moved;
                r[null] += moved;
            }
        }
    }
}

/// Plays one period: quote, round, decrement supply, advance.
pub fn sem_step(
    spec: &MarketSpec,
    state: &SemState,
    arrivals: &[Instance],
    shocks: &ShockSample,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<(PeriodRecord, SemState)> {
    let types: Vec<usize> = arrivals.iter().map(|a| a.ty).collect();
    let q = quote(spec, state, &types, shocks, cfg)?;
    let record = realize(spec, state, arrivals, &q, seed)?;
    let next = advance(spec, state, &record);
    Ok((record, next))
}

/// Rounds a quote into an ex-post assignment.
pub fn realize(spec: &MarketSpec, state: &SemState, arrivals: &[Instance], q: &Quote, seed: u64) -> Result<PeriodRecord> {
    let null = spec.objects.null();
    let caps: Vec<Option<u64>> = state.remaining.iter().enumerate().map(|(x, &s)| if x == null { None } else { Some(s) }).collect();
    let assignment = dependent_round(&q.lotteries, &caps, seed)?;
    let mut left = state.remaining.clone();
    for &x in &assignment {
        if x != null {
            left[x] = left[x].checked_sub(1).ok_or_else(|| Error::Other("supply violated by rounding".into()))?;
        }
    }
    Ok(PeriodRecord {
        period: state.period,
        supply_before: state.remaining.clone(),
        arrivals: arrivals.to_vec(),
        prices: Some(q.prices.clone()),
        clearing_error: Some(q.clearing_error),
        iterations: Some(q.iterations),
        lotteries: q.lotteries.clone(),
        assignment,
        renormalized: q.renormalized,
    })
}

/// State after `record` has been applied to `state`.
pub fn advance(spec: &MarketSpec, state: &SemState, record: &PeriodRecord) -> SemState {
    let null = spec.objects.null();
    let mut next = state.clone();
    for &x in &record.assignment {
        if x != null {
            next.remaining[x] -= 1;
        }
    }
    next.history.push(record.clone());
    next.period += 1;
    next.terminated = next.period > spec.horizon || next.exhausted(null);
    next
}

/// The shock sample a run with `seed` uses.
pub fn run_shocks(spec: &MarketSpec, seed: u64, cfg: &SolverConfig) -> ShockSample {
    SolverConfig { seed: seeds::derive(seed, seeds::SHOCKS, 0), ..cfg.clone() }.shocks(spec)
}

/// Arrivals of a seeded run, one vector per period.
pub fn run_arrivals(spec: &MarketSpec, seed: u64) -> Result<Vec<Vec<Instance>>> {
    (1..=spec.horizon).map(|t| spec.draw_arrivals(t, seeds::derive(seed, seeds::ARRIVALS, t as u64))).collect()
}

/// Runs the mechanism over the whole horizon. Periods after supply runs out
/// still record their arrivals, all assigned the null object.
pub fn run_sem(spec: &MarketSpec, seed: u64, cfg: &SolverConfig) -> Result<RunTrace> {
    let arrivals = run_arrivals(spec, seed)?;
    run_sem_on(spec, &arrivals, seed, cfg)
}

pub fn run_sem_on(spec: &MarketSpec, arrivals: &[Vec<Instance>], seed: u64, cfg: &SolverConfig) -> Result<RunTrace> {
    let shocks = run_shocks(spec, seed, cfg);
    let mut state = SemState::new(spec);
    let mut trace = RunTrace::new(Mechanism::Sem, seed, spec);
    for (k, batch) in arrivals.iter().enumerate() {
        let t = k + 1;
        let (record, next) = sem_step(spec, &state, batch, &shocks, cfg, seeds::derive(seed, seeds::ROUNDING, t as u64))?;
        trace.periods.push(record);
        state = next;
    }
    trace.final_supply = state.remaining;
    Ok(trace)
}
