//! Baselines: serial dictatorship with random tie-breaking, and the offline
//! serial dictatorship with indifferences that sees the whole arrival
//! sequence.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::market::{Instance, MarketSpec};
use crate::seeds;

use super::sem::run_arrivals;
use super::trace::{Mechanism, PeriodRecord, RunTrace};

/// Largest arrival count the exhaustive benchmark accepts.
pub const EXACT_LIMIT: usize = 12;

/// Each period, arrivals are shuffled and each in turn takes a uniformly
/// random object from its best tier that still has supply. Returns one
/// assignment vector per period, in the order of `arrivals`.
pub fn sd_rtb(spec: &MarketSpec, arrivals: &[Vec<Instance>], seed: u64) -> Vec<Vec<usize>> {
    let null = spec.objects.null();
    let mut left = spec.objects.supply().to_vec();
    let mut out = Vec::with_capacity(arrivals.len());
    for (k, batch) in arrivals.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, seeds::BASELINE, k as u64 + 1));
        let mut order: Vec<usize> = (0..batch.len()).collect();
        order.shuffle(&mut rng);
        let mut assigned = vec![null; batch.len()];
        for a in order {
            let prefs = &spec.types[batch[a].ty].prefs;
            for tier in prefs.tiers() {
                let open: Vec<usize> = tier.iter().copied().filter(|&x| x == null || left[x] > 0).collect();
                if !open.is_empty() {
                    let x = open[rng.random_range(0..open.len())];
                    if x != null {
                        left[x] -= 1;
                    }
                    assigned[a] = x;
                    break;
                }
            }
        }
        out.push(assigned);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchmarkMode {
    /// Exhaustive search; at most [`EXACT_LIMIT`] arrivals.
    Exact,
    /// Augmenting-path serial dictatorship.
    Augmenting,
    /// Exact when small enough, augmenting otherwise.
    Auto,
}

/// Serial dictatorship with indifferences in arrival order: each arrival in
/// turn is guaranteed the best tier that can still be honoured together with
/// every earlier guarantee. The outcome is Pareto efficient among
/// deterministic assignments and respects arrival order.
pub fn omniscient_benchmark(spec: &MarketSpec, arrivals: &[Vec<Instance>], mode: BenchmarkMode) -> Result<Vec<Vec<usize>>> {
    let flat: Vec<Instance> = arrivals.iter().flatten().copied().collect();
    let exact = match mode {
        BenchmarkMode::Exact => {
            if flat.len() > EXACT_LIMIT {
                return Err(Error::invalid("arrivals", format!("{} arrivals exceed the exact limit of {EXACT_LIMIT}", flat.len())));
            }
            true
        }
        BenchmarkMode::Augmenting => false,
        BenchmarkMode::Auto => flat.len() <= EXACT_LIMIT,
    };
    let assignment = if exact { exhaustive(spec, &flat) } else { augmenting(spec, &flat) };
    let mut out = Vec::with_capacity(arrivals.len());
    let mut k = 0;
    for batch in arrivals {
        out.push(assignment[k..k + batch.len()].to_vec());
        k += batch.len();
    }
    Ok(out)
}

/// Tier index of each arrival's object, the quantity dictators optimize.
pub fn rank_vector(spec: &MarketSpec, flat: &[Instance], assignment: &[usize]) -> Vec<usize> {
    flat.iter().zip(assignment).map(|(a, &x)| spec.types[a.ty].prefs.tier_of(x)).collect()
}

fn exhaustive(spec: &MarketSpec, flat: &[Instance]) -> Vec<usize> {
    struct Search<'a> {
        spec: &'a MarketSpec,
        flat: &'a [Instance],
        left: Vec<u64>,
        cur: Vec<usize>,
        ranks: Vec<usize>,
        best: Option<(Vec<usize>, Vec<usize>)>,
    }
    impl Search<'_> {
        fn go(&mut self, k: usize) {
            if let Some((best_ranks, _)) = &self.best {
                // prune once the prefix is already lexicographically worse
                if self.ranks[..k] > best_ranks[..k] {
                    return;
                }
            }
            if k == self.flat.len() {
                let better = match &self.best {
                    None => true,
                    Some((r, _)) => self.ranks < *r,
                };
                if better {
                    self.best = Some((self.ranks.clone(), self.cur.clone()));
                }
                return;
            }
            let null = self.spec.objects.null();
            let prefs = &self.spec.types[self.flat[k].ty].prefs;
            for x in 0..self.left.len() {
                if x != null && self.left[x] == 0 {
                    continue;
                }
                if x != null {
                    self.left[x] -= 1;
                }
                self.cur.push(x);
                self.ranks.push(prefs.tier_of(x));
                self.go(k + 1);
                self.ranks.pop();
                self.cur.pop();
                if x != null {
                    self.left[x] += 1;
                }
            }
        }
    }
    let mut s = Search { spec, flat, left: spec.objects.supply().to_vec(), cur: Vec::new(), ranks: Vec::new(), best: None };
    s.go(0);
    s.best.map(|(_, a)| a).unwrap_or_default()
}

fn augmenting(spec: &MarketSpec, flat: &[Instance]) -> Vec<usize> {
    let null = spec.objects.null();
    let m = spec.objects.len();
    let cap: Vec<u64> = spec.objects.supply().to_vec();
    let mut used = vec![0u64; m];
    let mut assigned: Vec<usize> = Vec::with_capacity(flat.len());
    // committed tier per dictator
    let mut tier_of: Vec<Vec<usize>> = Vec::with_capacity(flat.len());
    for a in flat {
        let prefs = &spec.types[a.ty].prefs;
        let mut placed = false;
        for tier in prefs.tiers() {
            let mut seen = vec![false; m];
            if let Some(path) = augment(tier, &cap, &used, &assigned, &tier_of, null, &mut seen) {
                apply(path, &mut used, &mut assigned, null);
                tier_of.push(tier.clone());
                placed = true;
                break;
            }
        }
        if !placed {
            unreachable!("the null object always has room");
        }
    }
    assigned
}

/// Searches for an augmenting path that gives a new dictator some object of
/// `tier`. Returns `(dictator, object)` moves; the new dictator is marked
/// with `usize::MAX`.
fn augment(
    tier: &[usize],
    cap: &[u64],
    used: &[u64],
    assigned: &[usize],
    tier_of: &[Vec<usize>],
    null: usize,
    seen: &mut [bool],
) -> Option<Vec<(usize, usize)>> {
    fn visit(
        x: usize,
        cap: &[u64],
        used: &[u64],
        assigned: &[usize],
        tier_of: &[Vec<usize>],
        null: usize,
        seen: &mut [bool],
    ) -> Option<Vec<(usize, usize)>> {
        if seen[x] {
            return None;
        }
        seen[x] = true;
        if x == null || used[x] < cap[x] {
            return Some(Vec::new());
        }
        for (d, &y) in assigned.iter().enumerate() {
            if y != x {
                continue;
            }
            for &z in &tier_of[d] {
                if z == x {
                    continue;
                }
                if let Some(mut path) = visit(z, cap, used, assigned, tier_of, null, seen) {
                    path.push((d, z));
                    return Some(path);
                }
            }
        }
        None
    }
    for &x in tier {
        if let Some(mut path) = visit(x, cap, used, assigned, tier_of, null, seen) {
            path.push((usize::MAX, x));
            return Some(path);
        }
    }
    None
}

fn apply(path: Vec<(usize, usize)>, used: &mut [u64], assigned: &mut Vec<usize>, null: usize) {
    for (d, x) in path {
        if d == usize::MAX {
            assigned.push(x);
        } else {
            let old = assigned[d];
            if old != null {
                used[old] -= 1;
            }
            assigned[d] = x;
        }
        if x != null {
            used[x] += 1;
        }
    }
}

fn baseline_trace(spec: &MarketSpec, mechanism: Mechanism, seed: u64, arrivals: &[Vec<Instance>], assignment: &[Vec<usize>]) -> RunTrace {
    let null = spec.objects.null();
    let m = spec.objects.len();
    let mut trace = RunTrace::new(mechanism, seed, spec);
    let mut left = spec.objects.supply().to_vec();
    for (k, (batch, assigned)) in arrivals.iter().zip(assignment).enumerate() {
        let lotteries = assigned
            .iter()
            .map(|&x| {
                let mut row = vec![0.0; m];
                row[x] = 1.0;
                row
            })
            .collect();
        let before = left.clone();
        for &x in assigned {
            if x != null {
                left[x] -= 1;
            }
        }
        trace.periods.push(PeriodRecord {
            period: k + 1,
            supply_before: before,
            arrivals: batch.clone(),
            prices: None,
            clearing_error: None,
            iterations: None,
            lotteries,
            assignment: assigned.clone(),
            renormalized: false,
        });
    }
    trace.final_supply = left;
    trace
}

pub fn run_sd_rtb(spec: &MarketSpec, seed: u64) -> Result<RunTrace> {
    let arrivals = run_arrivals(spec, seed)?;
    let assignment = sd_rtb(spec, &arrivals, seed);
    Ok(baseline_trace(spec, Mechanism::SdRtb, seed, &arrivals, &assignment))
}

pub fn run_omniscient(spec: &MarketSpec, seed: u64) -> Result<RunTrace> {
    let arrivals = run_arrivals(spec, seed)?;
    let assignment = omniscient_benchmark(spec, &arrivals, BenchmarkMode::Auto)?;
    Ok(baseline_trace(spec, Mechanism::Omniscient, seed, &arrivals, &assignment))
}
