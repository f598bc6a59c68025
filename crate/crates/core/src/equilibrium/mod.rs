//! (t)-price equilibria.
//!
//! Prices are found by damped tâtonnement on excess demand, with one step
//! size per object that halves whenever that object's excess demand changes
//! sign. The shock sample is fixed for the whole solve, so the map being
//! iterated is deterministic. When progress stalls on near-tied prices, a
//! Newton polish takes over from the best iterate.

mod lindahl;
mod newton;
mod selection;

pub use lindahl::{solve_lindahl, LindahlResult};
pub use selection::clearing_selection;

use serde::{Deserialize, Serialize};

use crate::demand::{lottery_into, SelectionRule, ShockSample};
use crate::error::{Error, Result};
use crate::market::{MarketSpec, WeakOrder};

/// One group of agents facing the market: a type arriving in a given period.
#[derive(Clone, Debug, PartialEq)]
pub struct Demander {
    pub ty: usize,
    pub period: usize,
    pub prefs: WeakOrder,
    pub budget: f64,
    /// Mass in agent units.
    pub mass: f64,
}

/// Demand side and supply side of a (t)-equilibrium problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Fundamentals {
    pub demanders: Vec<Demander>,
    /// Supply in agent units; the null entry is ignored.
    pub supply: Vec<f64>,
    pub null: usize,
}

impl Fundamentals {
    /// Fundamentals from period `t` on. `current` overrides the period-`t`
    /// per-type masses (agent units), as the online empirical distribution
    /// does; later periods use the forecast `replicas · f^k`.
    pub fn from_spec(spec: &MarketSpec, t: usize, supply: &[f64], current: Option<&[f64]>) -> Result<Fundamentals> {
        if t == 0 || t > spec.horizon {
            return Err(Error::invalid("period", format!("{t} outside 1..={}", spec.horizon)));
        }
        if supply.len() != spec.objects.len() || supply.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::invalid("supply", "one nonnegative entry per object required"));
        }
        let n = spec.replicas as f64;
        let mut demanders = Vec::new();
        for k in t..=spec.horizon {
            for (i, ty) in spec.types.iter().enumerate() {
                let mass = match (k == t, current) {
                    (true, Some(c)) => c.get(i).copied().unwrap_or(0.0),
                    _ => n * spec.density[k - 1][i],
                };
                if mass > 0.0 {
                    demanders.push(Demander { ty: i, period: k, prefs: ty.prefs.clone(), budget: spec.budget(i, k)?, mass });
                }
            }
        }
        Ok(Fundamentals { demanders, supply: supply.to_vec(), null: spec.objects.null() })
    }

    pub fn objects(&self) -> usize {
        self.supply.len()
    }

    /// Arrival mass per period of the window; residuals are measured in this
    /// unit so that n-fold replicas share one tolerance.
    pub fn scale(&self) -> f64 {
        let mass: f64 = self.demanders.iter().map(|d| d.mass).sum();
        let mut periods: Vec<usize> = self.demanders.iter().map(|d| d.period).collect();
        periods.sort_unstable();
        periods.dedup();
        if mass > 0.0 {
            mass / periods.len() as f64
        } else {
            1.0
        }
    }

    pub fn max_budget(&self) -> f64 {
        self.demanders.iter().map(|d| d.budget).fold(0.0, f64::max)
    }

    /// Aggregate demand at `prices`.
    pub fn demand(&self, prices: &[f64], shocks: &ShockSample, rule: SelectionRule) -> Vec<f64> {
        let mut out = vec![0.0; self.objects()];
        for d in &self.demanders {
            lottery_into(&d.prefs, prices, d.budget, shocks, rule, d.mass, &mut out);
        }
        out
    }

    /// Per-demander lotteries at `prices`.
    pub fn lotteries(&self, prices: &[f64], shocks: &ShockSample, rule: SelectionRule) -> Vec<Vec<f64>> {
        self.demanders
            .iter()
            .map(|d| {
                let mut row = vec![0.0; self.objects()];
                lottery_into(&d.prefs, prices, d.budget, shocks, rule, 1.0, &mut row);
                row
            })
            .collect()
    }

    /// `max_x |min(p_x, s_x − D_x)|` over real objects, in units of [`scale`](Self::scale).
    pub fn residual(&self, prices: &[f64], demand: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..self.objects() {
            if x == self.null {
                continue;
            }
            let r = prices[x].min(self.supply[x] - demand[x]).abs();
            worst = worst.max(r);
        }
        worst / self.scale()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub gamma: f64,
    /// Clearing tolerance in per-period arrival units.
    pub tol: f64,
    pub max_iter: usize,
    /// Shock draws M.
    pub draws: usize,
    pub seed: u64,
    /// Kernel width of the common shock; `None` picks the sample default.
    pub bandwidth: Option<f64>,
    /// Within-tier split used while iterating.
    pub rule: SelectionRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: 0.2,
            tol: 0.01,
            max_iter: 5000,
            draws: 10_000,
            seed: 0,
            bandwidth: None,
            rule: SelectionRule::Proximity { window: 0.002 },
        }
    }
}

impl SolverConfig {
    /// Tight settings used inside the online mechanism.
    pub fn precise() -> SolverConfig {
        SolverConfig { tol: 1e-9, max_iter: 20_000, ..SolverConfig::default() }
    }

    pub fn shocks(&self, spec: &MarketSpec) -> ShockSample {
        let h = self.bandwidth.unwrap_or_else(|| ShockSample::default_bandwidth(&spec.shock, self.draws));
        ShockSample::with_bandwidth(&spec.shock, spec.objects.len(), self.draws, self.seed, h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub prices: Vec<f64>,
    /// One lottery per demander, in the order of the fundamentals.
    pub allocation: Vec<Vec<f64>>,
    /// Aggregate demand under `allocation`.
    pub demand: Vec<f64>,
    pub clearing_error: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Price cap `K = B̄ − ξ̲ + 0.1`: no agent can afford anything priced there.
pub fn price_cap(f: &Fundamentals, shocks: &ShockSample) -> f64 {
    f.max_budget() + shocks.upper() + 0.1
}

/// Iterations between stall checks.
const STALL_WINDOW: usize = 200;

/// Solves for a (t)-price equilibrium of the given fundamentals from zero prices.
pub fn solve(f: &Fundamentals, shocks: &ShockSample, cfg: &SolverConfig) -> Result<EquilibriumResult> {
    solve_from(f, shocks, cfg, &vec![0.0; f.objects()])
}

pub fn solve_from(f: &Fundamentals, shocks: &ShockSample, cfg: &SolverConfig, start: &[f64]) -> Result<EquilibriumResult> {
    if shocks.is_empty() {
        return Err(Error::invalid("shocks", "empty shock sample"));
    }
    if f.supply.iter().any(|&s| !(s >= 0.0)) {
        return Err(Error::invalid("supply", "must be nonnegative"));
    }
    if f.demanders.iter().any(|d| !(d.budget > 0.0) || !(d.mass >= 0.0)) {
        return Err(Error::invalid("fundamentals", "budgets must be positive and masses nonnegative"));
    }
    if f.demanders.iter().any(|d| shocks.upper() >= d.budget) {
        return Err(Error::invalid("shock", "shock bound must lie below every budget"));
    }
    // iterate in per-capita units so n-fold fundamentals follow the same path
    let scale = f.scale();
    let mut unit = f.clone();
    unit.supply.iter_mut().for_each(|s| *s /= scale);
    unit.demanders.iter_mut().for_each(|d| d.mass /= scale);
    let mut result = solve_unit(&unit, shocks, cfg, start);
    result.demand.iter_mut().for_each(|d| *d *= scale);
    Ok(result)
}

fn solve_unit(f: &Fundamentals, shocks: &ShockSample, cfg: &SolverConfig, start: &[f64]) -> EquilibriumResult {
    let m = f.objects();
    let cap = price_cap(f, shocks);
    let scale = f.scale();
    let mut p = p_start(start, cap, f.null);
    let mut step = vec![cfg.gamma; m];
    let mut prev = vec![0.0; m];
    let mut spread = vec![cfg.gamma; m];
    let mut prev_dev = vec![0.0; m];
    let mut best = (f64::INFINITY, p.clone());
    let mut iterations = 0;
    let mut converged = false;
    let mut polished = false;
    let mut checkpoint = f64::INFINITY;
    for it in 0..cfg.max_iter.max(1) {
        iterations = it + 1;
        let d = f.demand(&p, shocks, cfg.rule);
        let err = f.residual(&p, &d);
        if err < best.0 {
            best = (err, p.clone());
        }
        if err <= cfg.tol {
            converged = true;
            break;
        }
        if iterations % STALL_WINDOW == 0 {
            if !polished && best.0 > 0.5 * checkpoint {
                polished = true;
                let (q, e) = newton::polish(f, shocks, cfg.rule, &best.1, cap, cfg.tol);
                if e < best.0 {
                    best = (e, q);
                }
                if e <= cfg.tol {
                    converged = true;
                    break;
                }
            }
            checkpoint = best.0;
        }
        let e: Vec<f64> = (0..m).map(|x| (d[x] - f.supply[x]) / scale).collect();
        let w = window_of(cfg.rule);
        let old = p.clone();
        let groups = tie_groups(&p, f.null, w);
        for g in &groups {
            // near-tied prices trade demand between themselves; their common
            // level and their spread get separate steps
            let lead = g[0];
            let level: f64 = g.iter().map(|&x| e[x]).sum::<f64>() / g.len() as f64;
            adapt(&mut step[lead], &mut prev[lead], level, cfg.gamma);
            // the level may fall only as far as the cheapest member allows
            let floor = g.iter().map(|&x| p[x].max(0.0)).fold(f64::INFINITY, f64::min);
            let shift = (step[lead] * level).max(-floor);
            for &x in g {
                let dev = e[x] - level;
                let mut apart = 0.0;
                if g.len() > 1 {
                    adapt(&mut spread[x], &mut prev_dev[x], dev, cfg.gamma);
                    // spread moves stay inside the window so the group does not
                    // jump across the kink it is resolving
                    apart = (spread[x] * dev).clamp(-0.5 * w, 0.5 * w);
                }
                p[x] = (p[x].max(0.0) + shift + apart).clamp(0.0, cap);
            }
        }
        // separate groups close at most half their gap per step, so they meet
        // in a tie instead of jumping over each other
        let span = |g: &Vec<usize>| g.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(old[x]), b.max(old[x])));
        for (k, g) in groups.iter().enumerate() {
            let (lo, hi) = span(g);
            let floor = if k > 0 { 0.5 * (lo + span(&groups[k - 1]).1) } else { 0.0 };
            let ceil = groups.get(k + 1).map_or(cap, |h| 0.5 * (hi + span(h).0));
            for &x in g {
                p[x] = p[x].clamp(floor, ceil);
            }
        }
    }
    if !converged && !polished {
        let (q, e) = newton::polish(f, shocks, cfg.rule, &best.1, cap, cfg.tol);
        if e < best.0 {
            best = (e, q);
        }
        converged = best.0 <= cfg.tol;
    }
    let prices = best.1;
    let allocation = f.lotteries(&prices, shocks, cfg.rule);
    let demand = f.demand(&prices, shocks, cfg.rule);
    let clearing_error = f.residual(&prices, &demand);
    let mut result = EquilibriumResult { prices, allocation, demand, clearing_error, iterations, converged };
    if !converged {
        // demand jumps where prices tie; try an explicit selection at the best
        // iterate, at the start, at zero and with each pair of prices tied
        let mut candidates = vec![result.prices.clone(), p_start(start, cap, f.null), vec![0.0; m]];
        for x in 0..m {
            for y in x + 1..m {
                if x == f.null || y == f.null {
                    continue;
                }
                for v in [result.prices[x].min(result.prices[y]), result.prices[x].max(result.prices[y])] {
                    let mut q = result.prices.clone();
                    q[x] = v;
                    q[y] = v;
                    candidates.push(q);
                }
            }
        }
        for q in candidates {
            let Ok(sel) = clearing_selection(f, &q, shocks, cfg.tol, window_of(cfg.rule)) else { continue };
            let demand = aggregate(f, &sel);
            let err = f.residual(&q, &demand);
            if err < result.clearing_error {
                result.prices = q;
                result.allocation = sel;
                result.demand = demand;
                result.clearing_error = err;
                result.converged = err <= cfg.tol;
                if result.converged {
                    break;
                }
            }
        }
    }
    result
}

fn p_start(start: &[f64], cap: f64, null: usize) -> Vec<f64> {
    let mut p: Vec<f64> = start.iter().map(|v| v.clamp(0.0, cap)).collect();
    p[null] = 0.0;
    p
}

fn adapt(step: &mut f64, prev: &mut f64, e: f64, gamma: f64) {
    if e * *prev < 0.0 {
        // floored so a step that has shrunk can still recover
        *step = (*step * 0.5).max(gamma * 1e-9);
    } else {
        *step = (*step * 1.2).min(gamma);
    }
    *prev = e;
}

/// Real objects grouped by chains of prices at most `window` apart, each
/// group sorted by index.
fn tie_groups(p: &[f64], null: usize, window: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..p.len()).filter(|&x| x != null).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for x in order {
        match groups.last_mut() {
            Some(g) if p[x] - last <= window => g.push(x),
            _ => groups.push(vec![x]),
        }
        last = p[x];
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    groups
}

fn window_of(rule: SelectionRule) -> f64 {
    match rule {
        SelectionRule::Proximity { window } => window,
        SelectionRule::Uniform => 0.0,
    }
}

/// Column mass of per-demander lotteries.
pub fn aggregate(f: &Fundamentals, allocation: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; f.objects()];
    for (d, row) in f.demanders.iter().zip(allocation) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += d.mass * v;
        }
    }
    out
}

/// (t)-price equilibrium of `spec` from period `t` with remaining `supply`
/// (agent units).
pub fn solve_price_equilibrium(spec: &MarketSpec, t: usize, supply: &[f64], shocks: &ShockSample, cfg: &SolverConfig) -> Result<EquilibriumResult> {
    let f = Fundamentals::from_spec(spec, t, supply, None)?;
    solve(&f, shocks, cfg)
}

/// Checks the greedy certificate of a solved equilibrium: whenever a
/// demander gets `x`, every `x* ≻ x` is priced beyond its budget minus the
/// largest shock, and no later demander gets such an `x*`.
pub fn greedy_certificate(f: &Fundamentals, eq: &EquilibriumResult, xi_upper: f64, mass_tol: f64) -> std::result::Result<(), Vec<String>> {
    let mut bad = Vec::new();
    let m = f.objects();
    for (i, d) in f.demanders.iter().enumerate() {
        let mut better = vec![false; m];
        for x in 0..m {
            if eq.allocation[i][x] <= mass_tol {
                continue;
            }
            for y in 0..m {
                if d.prefs.prefers(y, x) {
                    better[y] = true;
                    if !(eq.prices[y] > d.budget - xi_upper) {
                        bad.push(format!(
                            "demander {i} (type {}, period {}) gets {x} while preferred {y} costs {} ≤ {} − {xi_upper}",
                            d.ty, d.period, eq.prices[y], d.budget
                        ));
                    }
                }
            }
        }
        for (j, later) in f.demanders.iter().enumerate() {
            if later.period <= d.period {
                continue;
            }
            for y in 0..m {
                if better[y] && eq.allocation[j][y] > mass_tol {
                    bad.push(format!("later demander {j} gets {y}, which demander {i} could not obtain"));
                }
            }
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(bad)
    }
}

/// Verifies that an equilibrium at period `t` remains one for the periods
/// after `t` once the period-`t` allocation is removed from supply.
pub fn continuation_check(f: &Fundamentals, eq: &EquilibriumResult, shocks: &ShockSample, rule: SelectionRule, tol: f64) -> (bool, f64) {
    let Some(t) = f.demanders.iter().map(|d| d.period).min() else {
        return (true, 0.0);
    };
    let mut supply = f.supply.clone();
    let mut rest = Vec::new();
    for (d, row) in f.demanders.iter().zip(&eq.allocation) {
        if d.period == t {
            for (s, v) in supply.iter_mut().zip(row) {
                *s -= d.mass * v;
            }
        } else {
            rest.push(d.clone());
        }
    }
    if rest.is_empty() {
        return (true, 0.0);
    }
    for s in supply.iter_mut() {
        *s = s.max(0.0);
    }
    let next = Fundamentals { demanders: rest, supply, null: f.null };
    let demand = next.demand(&eq.prices, shocks, rule);
    let err = next.residual(&eq.prices, &demand);
    (err <= tol, err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::ShockModel;
    use crate::market::{parse_market_spec, Budgets, SpecBuilder};

    fn two_period() -> MarketSpec {
        SpecBuilder::new("two-period", 2)
            .object("x", 1)
            .object("y", 1)
            .ty("t", &[&["x"], &["y"]], None)
            .every_period("t", 1.0)
            .budgets(Budgets::PerPeriod(vec![1.0, 1.0]))
            .shock(ShockModel::ntb(0.08))
            .build()
            .unwrap()
    }

    #[test]
    fn two_period_price_crosses_at_one() {
        let spec = two_period();
        let cfg = SolverConfig::default();
        let shocks = cfg.shocks(&spec);
        let eq = solve_price_equilibrium(&spec, 1, &spec.unit_supply(), &shocks, &cfg).unwrap();
        assert!(eq.converged);
        assert!((eq.prices[0] - 1.0).abs() <= 0.02, "{:?}", eq.prices);
        assert!((eq.demand[0] - 1.0).abs() <= 0.02, "{:?}", eq.demand);
    }

    #[test]
    fn abundant_supply_prices_at_zero() {
        let spec = SpecBuilder::new("abundant", 2)
            .object("x", 5)
            .object("y", 5)
            .ty("a", &[&["x"], &["y"]], None)
            .ty("b", &[&["y"], &["x"]], None)
            .every_period("a", 0.5)
            .every_period("b", 0.5)
            .build()
            .unwrap();
        let cfg = SolverConfig::default();
        let eq = solve_price_equilibrium(&spec, 1, &spec.unit_supply(), &cfg.shocks(&spec), &cfg).unwrap();
        assert!(eq.converged && eq.iterations == 1);
        assert!(eq.prices.iter().all(|&p| p == 0.0));
        assert_eq!(eq.allocation[0], vec![1.0, 0.0, 0.0]);
        assert_eq!(eq.allocation[1], vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn foster_market_clears_at_every_replica() {
        let base = parse_market_spec(include_str!("../../markets/foster.toml")).unwrap();
        for n in [1, 25] {
            let spec = base.replicate(n).unwrap();
            let cfg = SolverConfig::precise();
            let shocks = cfg.shocks(&spec);
            let f = Fundamentals::from_spec(&spec, 1, &spec.objects.supply().iter().map(|&s| s as f64).collect::<Vec<_>>(), None).unwrap();
            let eq = solve(&f, &shocks, &cfg).unwrap();
            assert!(eq.converged, "n={n} err={}", eq.clearing_error);
            check_conditions(&f, &eq, cfg.tol);
            greedy_certificate(&f, &eq, spec.shock.upper(), 1e-9).unwrap();
            let (ok, err) = continuation_check(&f, &eq, &shocks, cfg.rule, 2.0 * 1e-6);
            assert!(ok, "{err}");
        }
    }

    fn check_conditions(f: &Fundamentals, eq: &EquilibriumResult, tol: f64) {
        let s = f.scale();
        for x in 0..f.objects() {
            if x == f.null {
                continue;
            }
            assert!(eq.demand[x] <= f.supply[x] + tol * s, "over-demand on {x}");
            if eq.prices[x] > tol {
                assert!((eq.demand[x] - f.supply[x]).abs() <= tol * s, "slack on priced {x}");
            }
        }
        for row in &eq.allocation {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn continuation_fails_when_a_scarce_price_moves() {
        let spec = parse_market_spec(include_str!("../../markets/foster.toml")).unwrap();
        let cfg = SolverConfig::precise();
        let shocks = cfg.shocks(&spec);
        // make `a` scarce
        let supply = vec![1.0, 2.0, 9.0];
        let f = Fundamentals::from_spec(&spec, 1, &supply, None).unwrap();
        let mut eq = solve(&f, &shocks, &cfg).unwrap();
        assert!(eq.converged);
        assert!(eq.prices[0] > 0.0);
        assert!(continuation_check(&f, &eq, &shocks, cfg.rule, 2e-6).0);
        eq.prices[0] += 0.2;
        assert!(!continuation_check(&f, &eq, &shocks, cfg.rule, 0.02).0);
    }

    #[test]
    fn continuation_is_vacuous_in_the_last_period() {
        let spec = parse_market_spec(include_str!("../../markets/foster.toml")).unwrap();
        let cfg = SolverConfig::default();
        let shocks = cfg.shocks(&spec);
        let f = Fundamentals::from_spec(&spec, 4, &[1.0, 1.0, 9.0], None).unwrap();
        let eq = solve(&f, &shocks, &cfg).unwrap();
        assert_eq!(continuation_check(&f, &eq, &shocks, cfg.rule, 0.02), (true, 0.0));
    }

    #[test]
    fn homogeneous_in_fundamentals() {
        let spec = parse_market_spec(include_str!("../../markets/foster.toml")).unwrap();
        let cfg = SolverConfig::precise();
        let shocks = cfg.shocks(&spec);
        let supply = vec![1.0, 2.0, 9.0];
        let f = Fundamentals::from_spec(&spec, 1, &supply, None).unwrap();
        let base = solve(&f, &shocks, &cfg).unwrap();
        for n in [2.0, 10.0] {
            let mut g = f.clone();
            g.supply.iter_mut().for_each(|s| *s *= n);
            g.demanders.iter_mut().for_each(|d| d.mass *= n);
            let eq = solve(&g, &shocks, &cfg).unwrap();
            for (a, b) in base.prices.iter().zip(&eq.prices) {
                assert!((a - b).abs() < 1e-6, "{:?} vs {:?}", base.prices, eq.prices);
            }
        }
    }

    #[test]
    fn clears_when_tatonnement_overshoots_a_tie() {
        // both homes at price zero with an explicit split of the indifferent
        // type is the only way to clear this window
        let spec = parse_market_spec(include_str!("../../markets/foster.toml")).unwrap().replicate(25).unwrap();
        let cfg = SolverConfig::precise();
        let shocks = crate::mechanism::run_shocks(&spec, 1005, &cfg);
        let f = Fundamentals::from_spec(&spec, 1, &[50.0, 50.0, 101.0], Some(&[9.0, 16.0])).unwrap();
        let eq = solve(&f, &shocks, &cfg).unwrap();
        assert!(eq.converged, "{:?} err={}", eq.prices, eq.clearing_error);
        check_conditions(&f, &eq, cfg.tol);
    }

    #[test]
    fn solves_are_deterministic() {
        let spec = parse_market_spec(include_str!("../../markets/foster.toml")).unwrap();
        let cfg = SolverConfig::default();
        let a = solve_price_equilibrium(&spec, 2, &[1.0, 1.0, 9.0], &cfg.shocks(&spec), &cfg).unwrap();
        let b = solve_price_equilibrium(&spec, 2, &[1.0, 1.0, 9.0], &cfg.shocks(&spec), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = two_period();
        let cfg = SolverConfig::default();
        let shocks = cfg.shocks(&spec);
        assert!(solve_price_equilibrium(&spec, 1, &[-1.0, 1.0, 9.0], &shocks, &cfg).is_err());
        assert!(solve_price_equilibrium(&spec, 3, &[1.0, 1.0, 9.0], &shocks, &cfg).is_err());
    }
}
