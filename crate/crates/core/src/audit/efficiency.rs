//! Ordinal efficiency oracle.
//!
//! An allocation is ordinally efficient when no feasible allocation weakly
//! stochastically dominates it for everyone and strictly for someone. The
//! oracle maximizes total upper-contour slack over all feasible allocations
//! that weakly dominate the input; a positive optimum yields a witness.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{Field, Lp, LpResult, Sense};
use crate::market::{LotteryAllocation, MarketSpec, WeakOrder};

use super::dominance::cumulative;

pub const FLOAT_TOL: f64 = 1e-5;
pub const RATIONAL_TOL: f64 = 1e-7;
/// Largest `groups × objects` accepted in exact mode.
pub const EXACT_CELLS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum EfficiencyVerdict {
    Efficient { slack: f64 },
    Dominated { slack: f64, dominating: Vec<Vec<f64>> },
}

impl EfficiencyVerdict {
    pub fn is_efficient(&self) -> bool {
        matches!(self, EfficiencyVerdict::Efficient { .. })
    }
}

/// A group of identical agents: shared preferences and lottery, with mass.
#[derive(Clone, Debug)]
pub struct Holder<'a> {
    pub prefs: &'a WeakOrder,
    pub lottery: Vec<f64>,
    pub mass: f64,
}

/// Checks `holders` against `supply` (the null entry is unlimited).
pub fn ordinal_efficiency_oracle(holders: &[Holder<'_>], supply: &[f64], null: usize, exact: bool) -> Result<EfficiencyVerdict> {
    let m = supply.len();
    for (g, h) in holders.iter().enumerate() {
        if h.lottery.len() != m || h.prefs.num_objects() != m {
            return Err(Error::invalid(format!("holders[{g}]"), "wrong number of objects"));
        }
        if !(h.mass > 0.0) {
            return Err(Error::invalid(format!("holders[{g}]"), "mass must be positive"));
        }
    }
    if exact {
        if holders.len() * m > EXACT_CELLS {
            return Err(Error::invalid("allocation", format!("exact mode allows at most {EXACT_CELLS} cells")));
        }
        solve::<BigRational>(holders, supply, null, RATIONAL_TOL)
    } else {
        solve::<f64>(holders, supply, null, FLOAT_TOL)
    }
}

fn solve<T: Field>(holders: &[Holder<'_>], supply: &[f64], null: usize, tol: f64) -> Result<EfficiencyVerdict> {
    let m = supply.len();
    let vars = holders.len() * m;
    let var = |g: usize, x: usize| g * m + x;
    let mut lp: Lp<T> = Lp::new(vars);
    let mut offset = 0.0;
    for (g, h) in holders.iter().enumerate() {
        let mut row = vec![T::zero(); vars];
        for x in 0..m {
            row[var(g, x)] = T::one();
        }
        lp.add_row(row, Sense::Eq, T::one());
        let tiers = h.prefs.tiers();
        let cum = cumulative(h.prefs, &h.lottery);
        // the last cutoff is the whole object set, always 1
        for k in 0..tiers.len() - 1 {
            let mut row = vec![T::zero(); vars];
            for tier in &tiers[..=k] {
                for &x in tier {
                    row[var(g, x)] = T::one();
                    lp.objective[var(g, x)] = lp.objective[var(g, x)].clone() + T::from_f64(h.mass);
                }
            }
            lp.add_row(row, Sense::Ge, T::from_f64(cum[k]));
            offset += h.mass * cum[k];
        }
    }
    for x in 0..m {
        if x == null {
            continue;
        }
        let mut row = vec![T::zero(); vars];
        for (g, h) in holders.iter().enumerate() {
            row[var(g, x)] = T::from_f64(h.mass);
        }
        lp.add_row(row, Sense::Le, T::from_f64(supply[x]));
    }
    match lp.solve() {
        LpResult::Optimal { x, value } => {
            let slack = value.to_f64() - offset;
            if slack <= tol {
                Ok(EfficiencyVerdict::Efficient { slack: slack.max(0.0) })
            } else {
                let dominating = (0..holders.len()).map(|g| (0..m).map(|y| x[var(g, y)].to_f64()).collect()).collect();
                Ok(EfficiencyVerdict::Dominated { slack, dominating })
            }
        }
        LpResult::Infeasible => Err(Error::Infeasible("allocation exceeds supply or rows are not lotteries".into())),
        LpResult::Unbounded => Err(Error::Other("efficiency program unbounded".into())),
    }
}

/// Oracle on a per-agent lottery allocation. Agents sharing a type and a
/// lottery are merged, which leaves the verdict unchanged.
pub fn allocation_efficiency(spec: &MarketSpec, alloc: &LotteryAllocation, supply: &[f64], exact: bool) -> Result<EfficiencyVerdict> {
    let mut groups: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    for (inst, row) in &alloc.rows {
        if inst.ty >= spec.types.len() {
            return Err(Error::invalid("allocation", format!("unknown type index {}", inst.ty)));
        }
        match groups.iter_mut().find(|(t, r, _)| *t == inst.ty && r == row) {
            Some(g) => g.2 += 1.0,
            None => groups.push((inst.ty, row.clone(), 1.0)),
        }
    }
    let holders: Vec<Holder<'_>> =
        groups.into_iter().map(|(t, lottery, mass)| Holder { prefs: &spec.types[t].prefs, lottery, mass }).collect();
    ordinal_efficiency_oracle(&holders, supply, spec.objects.null(), exact)
}
