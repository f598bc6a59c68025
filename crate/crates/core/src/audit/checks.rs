//! Trace audits: greedy allocation, equal-type envy, ex-post efficiency.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{EquilibriumResult, Fundamentals};
use crate::error::Result;
use crate::market::{Instance, MarketSpec};
use crate::mechanism::RunTrace;

use super::dominance::{sd_compare_tol, Relation};
use super::efficiency::{ordinal_efficiency_oracle, EfficiencyVerdict, Holder};

/// Slack on masses and cumulative probabilities in trace audits.
pub const AUDIT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyViolation {
    pub arrival: Instance,
    /// Object the arrival could receive.
    pub received: String,
    pub probability: f64,
    /// Strictly preferred object that was not used up by the arrival's period.
    pub preferred: String,
    pub consumed: f64,
    pub supply: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvyPair {
    pub envious: Instance,
    pub envied: Instance,
    pub witness_tier: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub greedy: bool,
    pub greedy_violations: Vec<GreedyViolation>,
    pub envy_free: bool,
    pub envy_pairs: Vec<EnvyPair>,
    pub efficiency: EfficiencyVerdict,
}

/// Every object an arrival may receive must be weakly preferred to anything
/// left over once its own period has been served.
pub fn greedy_check(spec: &MarketSpec, trace: &RunTrace) -> (bool, Vec<GreedyViolation>) {
    let null = spec.objects.null();
    let m = spec.objects.len();
    let initial = &trace.initial_supply;
    let tol = AUDIT_TOL * (spec.replicas as f64).max(1.0);
    let mut out = Vec::new();
    for p in &trace.periods {
        // consumption through this period: earlier realized units plus this
        // period's lottery mass
        let mut consumed: Vec<f64> = (0..m).map(|x| (initial[x] - p.supply_before[x]) as f64).collect();
        for row in &p.lotteries {
            for (c, v) in consumed.iter_mut().zip(row) {
                *c += v;
            }
        }
        for (a, row) in p.arrivals.iter().zip(&p.lotteries) {
            let prefs = &spec.types[a.ty].prefs;
            for x in (0..m).filter(|&x| row[x] > AUDIT_TOL) {
                for y in (0..m).filter(|&y| y != null && prefs.prefers(y, x)) {
                    if consumed[y] < initial[y] as f64 - tol {
                        out.push(GreedyViolation {
                            arrival: *a,
                            received: spec.objects.name(x).to_string(),
                            probability: row[x],
                            preferred: spec.objects.name(y).to_string(),
                            consumed: consumed[y],
                            supply: initial[y],
                        });
                    }
                }
            }
        }
    }
    (out.is_empty(), out)
}

/// No arrival's lottery may be strictly dominated, under its own
/// preferences, by the lottery of an arrival from the same or a later period.
pub fn envy_check(spec: &MarketSpec, trace: &RunTrace) -> (bool, Vec<EnvyPair>) {
    // identical (type, lottery) pairs behave alike; compare distinct ones
    let mut rows: Vec<(Instance, &Vec<f64>)> = Vec::new();
    for p in &trace.periods {
        for (a, l) in p.arrivals.iter().zip(&p.lotteries) {
            if !rows.iter().any(|(b, m)| b.ty == a.ty && b.period == a.period && *m == l) {
                rows.push((*a, l));
            }
        }
    }
    let mut out = Vec::new();
    for (a, la) in &rows {
        let prefs = &spec.types[a.ty].prefs;
        for (b, lb) in &rows {
            if b.period < a.period || (a == b) {
                continue;
            }
            let v = sd_compare_tol(prefs, la, lb, AUDIT_TOL);
            if v.relation == Relation::StrictlyDominated {
                out.push(EnvyPair { envious: *a, envied: *b, witness_tier: v.witness_tier });
            }
        }
    }
    (out.is_empty(), out)
}

/// Ex-post efficiency of the realized assignment among realized arrivals and
/// the initial supply.
pub fn trace_efficiency(spec: &MarketSpec, trace: &RunTrace) -> Result<EfficiencyVerdict> {
    let m = spec.objects.len();
    let mut groups: Vec<(usize, usize, f64)> = Vec::new();
    for p in &trace.periods {
        for (a, &x) in p.arrivals.iter().zip(&p.assignment) {
            match groups.iter_mut().find(|(t, y, _)| *t == a.ty && *y == x) {
                Some(g) => g.2 += 1.0,
                None => groups.push((a.ty, x, 1.0)),
            }
        }
    }
    let holders: Vec<Holder<'_>> = groups
        .iter()
        .map(|&(t, x, mass)| {
            let mut lottery = vec![0.0; m];
            lottery[x] = 1.0;
            Holder { prefs: &spec.types[t].prefs, lottery, mass }
        })
        .collect();
    let supply: Vec<f64> = trace.initial_supply.iter().map(|&s| s as f64).collect();
    let exact = holders.len() * m <= super::efficiency::EXACT_CELLS;
    ordinal_efficiency_oracle(&holders, &supply, spec.objects.null(), exact)
}

/// Efficiency of an equilibrium allocation over all demanders of its window.
pub fn equilibrium_efficiency(f: &Fundamentals, eq: &EquilibriumResult, exact: bool) -> Result<EfficiencyVerdict> {
    let holders: Vec<Holder<'_>> = f
        .demanders
        .iter()
        .zip(&eq.allocation)
        .filter(|(d, _)| d.mass > 0.0)
        .map(|(d, l)| Holder { prefs: &d.prefs, lottery: l.clone(), mass: d.mass })
        .collect();
    let mut supply = f.supply.clone();
    // the solver clears within tolerance; do not let that noise read as waste
    for (x, s) in supply.iter_mut().enumerate() {
        if x != f.null {
            *s = s.max(eq.demand[x]);
        }
    }
    ordinal_efficiency_oracle(&holders, &supply, f.null, exact)
}

pub fn audit_trace(trace: &RunTrace) -> Result<AuditReport> {
    let spec = trace.market()?;
    trace.validate()?;
    let (greedy, greedy_violations) = greedy_check(&spec, trace);
    let (envy_free, envy_pairs) = envy_check(&spec, trace);
    let efficiency = trace_efficiency(&spec, trace)?;
    Ok(AuditReport { greedy, greedy_violations, envy_free, envy_pairs, efficiency })
}
