//! Random-price demand.
//!
//! A realized price is `p_x + ξ_x`. An agent demands the cheapest objects in
//! its most preferred tier among those it can afford. Lottery demand averages
//! that choice over a fixed [`ShockSample`].
//!
//! Each common-shock draw is spread over a small uniform kernel, which makes
//! lottery demand continuous and piecewise linear in prices. With bandwidth 0
//! the sample is a plain empirical average.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{MarketSpec, WeakOrder};

/// Prices closer than this count as equal under the uniform rule.
const TIE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockKind {
    /// One common shock `c` shared by all objects.
    Ntb,
    /// Common shock plus an independent `ζ_x` per object.
    Rtb,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockModel {
    pub kind: ShockKind,
    /// β: `c ~ U[-β, β]`.
    #[serde(default = "default_beta")]
    pub common_bound: f64,
    /// z: `ζ_x ~ U[-z, z]`, RTB only.
    #[serde(default = "default_z")]
    pub rtb_halfwidth: f64,
}

fn default_beta() -> f64 {
    0.08
}

fn default_z() -> f64 {
    0.02
}

impl ShockModel {
    pub fn ntb(beta: f64) -> ShockModel {
        ShockModel { kind: ShockKind::Ntb, common_bound: beta, rtb_halfwidth: default_z() }
    }

    pub fn rtb(beta: f64, z: f64) -> ShockModel {
        ShockModel { kind: ShockKind::Rtb, common_bound: beta, rtb_halfwidth: z }
    }

    /// ξ̄
    pub fn upper(&self) -> f64 {
        match self.kind {
            ShockKind::Ntb => self.common_bound,
            ShockKind::Rtb => self.common_bound + self.rtb_halfwidth,
        }
    }

    /// ξ̲
    pub fn lower(&self) -> f64 {
        -self.upper()
    }

    pub fn is_ntb(&self) -> bool {
        self.kind == ShockKind::Ntb
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.common_bound >= 0.0) || !self.common_bound.is_finite() {
            return Err(Error::invalid("shock.common_bound", "must be finite and nonnegative"));
        }
        if self.kind == ShockKind::Rtb && (!(self.rtb_halfwidth >= 0.0) || !self.rtb_halfwidth.is_finite()) {
            return Err(Error::invalid("shock.rtb_halfwidth", "must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// `M` seeded shock draws reused across every price iterate of a solve.
#[derive(Clone, Debug)]
pub struct ShockSample {
    kind: ShockKind,
    objects: usize,
    upper: f64,
    bandwidth: f64,
    /// Kernel centres of the common component, ascending for NTB.
    common: Vec<f64>,
    /// Row-major `M × objects` idiosyncratic components (RTB only).
    idio: Vec<f64>,
}

impl ShockSample {
    /// Default kernel width: four mean spacings of the draws.
    pub fn default_bandwidth(model: &ShockModel, draws: usize) -> f64 {
        if draws == 0 {
            0.0
        } else {
            4.0 * model.common_bound / draws as f64
        }
    }

    pub fn draw(model: &ShockModel, objects: usize, draws: usize, seed: u64) -> ShockSample {
        Self::with_bandwidth(model, objects, draws, seed, Self::default_bandwidth(model, draws))
    }

    /// Draw `k` uses stream `k` of the seeded generator, so any subset of
    /// draws can be regenerated independently.
    pub fn with_bandwidth(model: &ShockModel, objects: usize, draws: usize, seed: u64, bandwidth: f64) -> ShockSample {
        let beta = model.common_bound;
        let h = bandwidth.clamp(0.0, 2.0 * beta);
        let mut common = Vec::with_capacity(draws);
        let mut idio = Vec::new();
        let z = model.rtb_halfwidth;
        for k in 0..draws {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let c = if beta > 0.0 { rng.random_range(-beta..=beta) } else { 0.0 };
            common.push(c.clamp(-beta + h / 2.0, beta - h / 2.0));
            if model.kind == ShockKind::Rtb {
                for _ in 0..objects {
                    idio.push(if z > 0.0 { rng.random_range(-z..=z) } else { 0.0 });
                }
            }
        }
        if model.kind == ShockKind::Ntb {
            common.sort_by(f64::total_cmp);
        }
        ShockSample { kind: model.kind, objects, upper: model.upper(), bandwidth: h, common, idio }
    }

    pub fn len(&self) -> usize {
        self.common.len()
    }

    pub fn is_empty(&self) -> bool {
        self.common.is_empty()
    }

    pub fn kind(&self) -> ShockKind {
        self.kind
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn objects(&self) -> usize {
        self.objects
    }

    /// Kernel centre of draw `k`'s common component.
    pub fn common(&self, k: usize) -> f64 {
        self.common[k]
    }

    /// The full shock vector of draw `k` at its kernel centre.
    pub fn xi(&self, k: usize) -> Vec<f64> {
        (0..self.objects).map(|x| self.common[k] + self.zeta(k, x)).collect()
    }

    fn zeta(&self, k: usize, x: usize) -> f64 {
        if self.kind == ShockKind::Rtb {
            self.idio[k * self.objects + x]
        } else {
            0.0
        }
    }

    /// P(c ≤ u) under the kernel-smoothed sample (NTB only, centres sorted).
    pub(crate) fn common_cdf(&self, u: f64) -> f64 {
        let h = self.bandwidth;
        let c = &self.common;
        if h == 0.0 {
            return c.partition_point(|&v| v <= u) as f64 / c.len() as f64;
        }
        let full = c.partition_point(|&v| v + h / 2.0 <= u);
        let mut acc = full as f64;
        for &v in &c[full..] {
            let lo = v - h / 2.0;
            if lo >= u {
                break;
            }
            acc += (u - lo) / h;
        }
        acc / c.len() as f64
    }

    /// ξ̄ of the model the sample was drawn from.
    pub fn upper(&self) -> f64 {
        self.upper
    }
}

/// How to split demand among equally cheapest objects in the chosen tier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SelectionRule {
    /// Equal shares over exactly tied objects.
    Uniform,
    /// Weight `max(0, 1 - (r_x - r_min)/window)` on each object of the tier.
    Proximity { window: f64 },
}

impl Default for SelectionRule {
    fn default() -> Self {
        SelectionRule::Uniform
    }
}

/// Cheapest, most preferred affordable objects at realized prices.
pub fn demand_set(prefs: &WeakOrder, realized: &[f64], budget: f64) -> Vec<usize> {
    for tier in prefs.tiers() {
        let affordable: Vec<usize> = tier.iter().copied().filter(|&x| realized[x] <= budget).collect();
        if affordable.is_empty() {
            continue;
        }
        let min = affordable.iter().map(|&x| realized[x]).fold(f64::INFINITY, f64::min);
        return affordable.into_iter().filter(|&x| realized[x] == min).collect();
    }
    Vec::new()
}

/// Adds `mass` of choice over the top affordable tier to `out`.
/// `affordable(x)` decides affordability, `rel[x]` orders prices in a tier.
fn select_into(prefs: &WeakOrder, affordable: impl Fn(usize) -> bool, rel: impl Fn(usize) -> f64, rule: SelectionRule, mass: f64, out: &mut [f64]) {
    for tier in prefs.tiers() {
        let mut min = f64::INFINITY;
        let mut any = false;
        for &x in tier {
            if affordable(x) {
                any = true;
                min = min.min(rel(x));
            }
        }
        if !any {
            continue;
        }
        let window = match rule {
            SelectionRule::Proximity { window } if window > 0.0 => window,
            _ => 0.0,
        };
        let weight = |x: usize| -> f64 {
            if !affordable(x) {
                return 0.0;
            }
            let d = rel(x) - min;
            if window > 0.0 {
                (1.0 - d / window).max(0.0)
            } else if d <= TIE_EPS {
                1.0
            } else {
                0.0
            }
        };
        let total: f64 = tier.iter().map(|&x| weight(x)).sum();
        for &x in tier {
            let w = weight(x);
            if w > 0.0 {
                out[x] += mass * w / total;
            }
        }
        return;
    }
}

/// Adds `mass × L(p)` for one agent profile to `out`.
pub fn lottery_into(prefs: &WeakOrder, prices: &[f64], budget: f64, shocks: &ShockSample, rule: SelectionRule, mass: f64, out: &mut [f64]) {
    if mass == 0.0 {
        return;
    }
    match shocks.kind {
        ShockKind::Ntb => ntb_lottery_into(prefs, prices, budget, shocks, rule, mass, out),
        ShockKind::Rtb => per_draw_lottery_into(prefs, prices, budget, shocks, rule, mass, out),
    }
}

/// NTB: the affordable set only changes where `c` crosses `b - p_x`, so the
/// average reduces to CDF differences between consecutive thresholds.
fn ntb_lottery_into(prefs: &WeakOrder, prices: &[f64], budget: f64, shocks: &ShockSample, rule: SelectionRule, mass: f64, out: &mut [f64]) {
    let m = prices.len();
    let theta: Vec<f64> = prices.iter().map(|p| budget - p).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| theta[a].total_cmp(&theta[b]));
    let mut lower_cdf = 0.0;
    let mut j = 0;
    while j < m {
        let upper = theta[order[j]];
        let cdf = shocks.common_cdf(upper);
        let w = cdf - lower_cdf;
        if w > 0.0 {
            let cut = upper;
            select_into(prefs, |x| theta[x] >= cut, |x| prices[x], rule, mass * w, out);
        }
        lower_cdf = cdf;
        while j < m && theta[order[j]] == upper {
            j += 1;
        }
    }
}

/// Generic route: walk every draw, splitting its kernel at affordability
/// thresholds.
fn per_draw_lottery_into(prefs: &WeakOrder, prices: &[f64], budget: f64, shocks: &ShockSample, rule: SelectionRule, mass: f64, out: &mut [f64]) {
    let m = prices.len();
    let h = shocks.bandwidth;
    let per = mass / shocks.len() as f64;
    let mut theta = vec![0.0; m];
    let mut rel = vec![0.0; m];
    let mut cuts: Vec<f64> = Vec::with_capacity(m + 2);
    for k in 0..shocks.len() {
        let c = shocks.common[k];
        for x in 0..m {
            let z = shocks.zeta(k, x);
            theta[x] = budget - prices[x] - z;
            rel[x] = prices[x] + z;
        }
        if h == 0.0 {
            select_into(prefs, |x| c <= theta[x], |x| rel[x], rule, per, out);
            continue;
        }
        let (lo, hi) = (c - h / 2.0, c + h / 2.0);
        cuts.clear();
        cuts.push(lo);
        cuts.extend(theta.iter().copied().filter(|&t| t > lo && t < hi));
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        for seg in cuts.windows(2) {
            let len = seg[1] - seg[0];
            if len <= 0.0 {
                continue;
            }
            let top = seg[1];
            select_into(prefs, |x| theta[x] >= top, |x| rel[x], rule, per * len / h, out);
        }
    }
}

/// A slice of NTB shock mass on which the affordable set is fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    /// Probability of the slice.
    pub weight: f64,
    /// Affordable objects of the most preferred affordable tier.
    pub options: Vec<usize>,
}

/// Splits the NTB shock distribution at affordability thresholds. Within-tier
/// prices do not move with the common shock, so each slice is one choice
/// problem.
pub fn ntb_segments(prefs: &WeakOrder, prices: &[f64], budget: f64, shocks: &ShockSample) -> Vec<Segment> {
    let m = prices.len();
    let theta: Vec<f64> = prices.iter().map(|p| budget - p).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| theta[a].total_cmp(&theta[b]));
    let mut out = Vec::new();
    let mut lower_cdf = 0.0;
    let mut j = 0;
    while j < m {
        let upper = theta[order[j]];
        let cdf = shocks.common_cdf(upper);
        let w = cdf - lower_cdf;
        if w > 0.0 {
            let tier = prefs.tiers().iter().find(|t| t.iter().any(|&x| theta[x] >= upper));
            if let Some(tier) = tier {
                let options = tier.iter().copied().filter(|&x| theta[x] >= upper).collect();
                out.push(Segment { weight: w, options });
            }
        }
        lower_cdf = cdf;
        while j < m && theta[order[j]] == upper {
            j += 1;
        }
    }
    out
}

/// Probability vector of an agent's choice averaged over the shock sample.
pub fn lottery_demand(prefs: &WeakOrder, prices: &[f64], budget: f64, shocks: &ShockSample, rule: SelectionRule) -> Result<Vec<f64>> {
    if shocks.is_empty() {
        return Err(Error::invalid("shocks", "empty shock sample"));
    }
    if !(budget > 0.0) {
        return Err(Error::invalid("budget", "must be positive"));
    }
    let mut out = vec![0.0; prices.len()];
    lottery_into(prefs, prices, budget, shocks, rule, 1.0, &mut out);
    Ok(out)
}

/// Lottery demand evaluated draw by draw regardless of shock kind. Agrees with
/// [`lottery_demand`]; kept as an independent route for checking.
pub fn lottery_demand_per_draw(prefs: &WeakOrder, prices: &[f64], budget: f64, shocks: &ShockSample, rule: SelectionRule) -> Result<Vec<f64>> {
    if shocks.is_empty() {
        return Err(Error::invalid("shocks", "empty shock sample"));
    }
    let mut out = vec![0.0; prices.len()];
    per_draw_lottery_into(prefs, prices, budget, shocks, rule, 1.0, &mut out);
    Ok(out)
}

/// Aggregate demand `D^{t,k}(p)` in agent units.
pub fn aggregate_demand(spec: &MarketSpec, prices: &[f64], t: usize, k: usize, shocks: &ShockSample, rule: SelectionRule) -> Result<Vec<f64>> {
    if t == 0 || t > k || k > spec.horizon {
        return Err(Error::invalid("window", format!("[{t},{k}] is not a window of 1..={}", spec.horizon)));
    }
    if shocks.is_empty() {
        return Err(Error::invalid("shocks", "empty shock sample"));
    }
    let mut out = vec![0.0; spec.objects.len()];
    for s in t..=k {
        for (i, ty) in spec.types.iter().enumerate() {
            let f = spec.density[s - 1][i];
            if f > 0.0 {
                let b = spec.budget(i, s)?;
                lottery_into(&ty.prefs, prices, b, shocks, rule, f * spec.replicas as f64, &mut out);
            }
        }
    }
    Ok(out)
}

/// Pairs of positively priced objects closer than `2z`.
pub fn rtb_gap_condition(prices: &[f64], z: f64) -> (bool, Vec<(usize, usize)>) {
    let mut bad = Vec::new();
    for x in 0..prices.len() {
        for y in x + 1..prices.len() {
            if prices[x] > 0.0 && prices[y] > 0.0 && (prices[x] - prices[y]).abs() <= 2.0 * z {
                bad.push((x, y));
            }
        }
    }
    (bad.is_empty(), bad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn order(tiers: &[&[usize]], m: usize) -> WeakOrder {
        WeakOrder::new(tiers.iter().map(|t| t.to_vec()).collect(), m, m - 1).unwrap()
    }

    #[test]
    fn demand_set_examples() {
        let strict = order(&[&[0], &[1], &[2]], 3);
        assert_eq!(demand_set(&strict, &[0.6, 0.2, 0.0], 1.0), vec![0]);
        assert_eq!(demand_set(&strict, &[1.4, 0.2, 0.0], 1.0), vec![1]);
        let tied = order(&[&[0, 1], &[2]], 3);
        assert_eq!(demand_set(&tied, &[0.6, 0.2, 0.0], 1.0), vec![1]);
        assert_eq!(demand_set(&tied, &[0.5, 0.5, 0.0], 1.0), vec![0, 1]);
    }

    #[test]
    fn ntb_lottery_matches_uniform_cdf() {
        // Pr(1 + c <= 1) = 1/2 for symmetric c.
        let w = order(&[&[0], &[1], &[2]], 3);
        let s = ShockSample::draw(&ShockModel::ntb(0.5), 3, 20_000, 1);
        let l = lottery_demand(&w, &[1.0, 0.0, 0.0], 1.0, &s, SelectionRule::Uniform).unwrap();
        assert!((l[0] - 0.5).abs() < 0.01 && (l[1] - 0.5).abs() < 0.01 && l[2] == 0.0, "{l:?}");
        // Pr(p + c <= 1) = (1 - p + β) / 2β inside the support
        for p in [0.7, 0.9, 1.2, 1.4] {
            let l = lottery_demand(&w, &[p, 0.0, 0.0], 1.0, &s, SelectionRule::Uniform).unwrap();
            let want = ((1.0 - p + 0.5) / 1.0f64).clamp(0.0, 1.0);
            assert!((l[0] - want).abs() < 0.015, "p={p} got {} want {want}", l[0]);
        }
    }

    #[test]
    fn free_goods_go_to_the_top_tier() {
        let w = order(&[&[1], &[0], &[2]], 3);
        let s = ShockSample::draw(&ShockModel::ntb(0.08), 3, 1000, 2);
        let l = lottery_demand(&w, &[0.0; 3], 1.0, &s, SelectionRule::Uniform).unwrap();
        assert_eq!(l, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn rtb_splits_ties_symmetrically() {
        let w = order(&[&[0, 1], &[2]], 3);
        let s = ShockSample::draw(&ShockModel::rtb(0.08, 0.02), 3, 100_000, 3);
        let l = lottery_demand(&w, &[0.3, 0.3, 0.0], 1.0, &s, SelectionRule::Uniform).unwrap();
        assert!((l[0] - 0.5).abs() < 0.01 && (l[1] - 0.5).abs() < 0.01, "{l:?}");
    }

    #[test]
    fn rtb_demand_sets_are_singletons() {
        let w = order(&[&[0, 1, 2], &[3]], 4);
        let model = ShockModel::rtb(0.08, 0.02);
        let s = ShockSample::with_bandwidth(&model, 4, 100_000, 4, 0.0);
        let p = [0.3, 0.3, 0.3, 0.0];
        for k in 0..s.len() {
            let r: Vec<f64> = s.xi(k).iter().zip(&p).map(|(a, b)| a + b).collect();
            assert_eq!(demand_set(&w, &r, 1.0).len(), 1);
        }
    }

    #[test]
    fn fast_and_per_draw_routes_agree() {
        let model = ShockModel::ntb(0.1);
        for h in [0.0, 0.004, 0.03] {
            let s = ShockSample::with_bandwidth(&model, 4, 500, 5, h);
            let w = order(&[&[0, 1], &[2], &[3]], 4);
            for p in [[0.95, 0.951, 0.2, 0.0], [0.5, 0.5, 1.05, 0.0], [1.1, 0.0, 0.93, 0.0]] {
                for rule in [SelectionRule::Uniform, SelectionRule::Proximity { window: 0.002 }] {
                    let a = lottery_demand(&w, &p, 1.0, &s, rule).unwrap();
                    let b = lottery_demand_per_draw(&w, &p, 1.0, &s, rule).unwrap();
                    for (u, v) in a.iter().zip(&b) {
                        assert!((u - v).abs() < 1e-9, "h={h} p={p:?} {a:?} vs {b:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn smoothed_demand_is_continuous() {
        let w = order(&[&[0], &[1]], 2);
        let s = ShockSample::draw(&ShockModel::ntb(0.08), 2, 1000, 6);
        let mut prev = lottery_demand(&w, &[0.9, 0.0], 1.0, &s, SelectionRule::Uniform).unwrap()[0];
        let mut p = 0.9;
        while p < 1.1 {
            p += 1e-5;
            let cur = lottery_demand(&w, &[p, 0.0], 1.0, &s, SelectionRule::Uniform).unwrap()[0];
            assert!((cur - prev).abs() < 0.01);
            prev = cur;
        }
    }

    #[test]
    fn empty_sample_is_an_error() {
        let w = order(&[&[0], &[1]], 2);
        let s = ShockSample::draw(&ShockModel::ntb(0.08), 2, 0, 0);
        assert!(lottery_demand(&w, &[0.0, 0.0], 1.0, &s, SelectionRule::Uniform).is_err());
    }

    #[test]
    fn gap_condition_examples() {
        assert!(rtb_gap_condition(&[0.5, 0.1], 0.02).0);
        let (ok, bad) = rtb_gap_condition(&[0.5, 0.49], 0.02);
        assert!(!ok && bad == vec![(0, 1)]);
        assert!(rtb_gap_condition(&[0.5, 0.0], 0.02).0);
    }

    #[test]
    fn zero_priced_objects_are_always_affordable() {
        let model = ShockModel::rtb(0.08, 0.02);
        let s = ShockSample::draw(&model, 3, 2000, 8);
        let budget = 0.37;
        assert!(model.upper() < budget);
        for k in 0..s.len() {
            assert!(s.xi(k).iter().all(|&v| v <= budget && v >= model.lower() && v <= model.upper()));
        }
    }

    #[test]
    fn ntb_draws_share_one_shock() {
        let s = ShockSample::draw(&ShockModel::ntb(0.08), 4, 100, 9);
        for k in 0..s.len() {
            let xi = s.xi(k);
            assert!(xi.iter().all(|&v| v == xi[0]));
        }
    }

    fn arb_order(m: usize) -> impl Strategy<Value = WeakOrder> {
        proptest::collection::vec(0..m, m).prop_map(move |labels| {
            let mut tiers = vec![Vec::new(); m];
            for (x, &l) in labels.iter().enumerate() {
                tiers[l].push(x);
            }
            let tiers: Vec<Vec<usize>> = tiers.into_iter().filter(|t| !t.is_empty()).collect();
            WeakOrder::new(tiers, m, m - 1).unwrap()
        })
    }

    proptest! {
        #[test]
        fn demand_set_is_nonempty_and_within_one_tier(
            w in arb_order(5),
            r in proptest::collection::vec(0.0f64..2.0, 4),
            b in 0.2f64..1.5,
        ) {
            let mut realized = r.clone();
            realized.push(0.0);
            let d = demand_set(&w, &realized, b);
            prop_assert!(!d.is_empty());
            let tier = w.tier_of(d[0]);
            prop_assert!(d.iter().all(|&x| w.tier_of(x) == tier));
        }

        #[test]
        fn raising_an_undemanded_price_keeps_the_set(
            w in arb_order(5),
            r in proptest::collection::vec(0.0f64..2.0, 4),
            b in 0.2f64..1.5,
            bump in 0.0f64..1.0,
        ) {
            let mut realized = r.clone();
            realized.push(0.0);
            let d = demand_set(&w, &realized, b);
            for x in 0..4 {
                if !d.contains(&x) {
                    let mut up = realized.clone();
                    up[x] += bump;
                    prop_assert_eq!(demand_set(&w, &up, b), d.clone());
                }
            }
        }

        #[test]
        fn lottery_rows_sum_to_one(
            w in arb_order(4),
            p in proptest::collection::vec(0.0f64..1.3, 3),
            rtb in any::<bool>(),
        ) {
            let model = if rtb { ShockModel::rtb(0.08, 0.02) } else { ShockModel::ntb(0.1) };
            let s = ShockSample::draw(&model, 4, 200, 11);
            let mut prices = p.clone();
            prices.push(0.0);
            for rule in [SelectionRule::Uniform, SelectionRule::Proximity { window: 0.01 }] {
                let l = lottery_demand(&w, &prices, 1.0, &s, rule).unwrap();
                prop_assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(l.iter().all(|&v| v >= 0.0));
            }
        }

        #[test]
        fn lottery_is_locally_constant_away_from_thresholds(
            w in arb_order(4),
            p in proptest::collection::vec(0.0f64..1.3, 3),
        ) {
            let model = ShockModel::ntb(0.1);
            let s = ShockSample::with_bandwidth(&model, 4, 100, 12, 0.0);
            let mut prices = p.clone();
            prices.push(0.0);
            // distance from every budget crossing and every price ordering flip
            let mut gap = f64::INFINITY;
            for k in 0..s.len() {
                for x in 0..3 {
                    gap = gap.min((prices[x] + s.common(k) - 1.0).abs());
                }
            }
            for x in 0..4 { for y in 0..4 { if x != y { gap = gap.min((prices[x] - prices[y]).abs()); } } }
            prop_assume!(gap > 1e-6);
            let base = lottery_demand(&w, &prices, 1.0, &s, SelectionRule::Uniform).unwrap();
            let mut moved = prices.clone();
            for v in moved.iter_mut().take(3) { *v += gap / 4.0; }
            let after = lottery_demand(&w, &moved, 1.0, &s, SelectionRule::Uniform).unwrap();
            for (a, b) in base.iter().zip(&after) { prop_assert!((a - b).abs() < 1e-12); }
        }
    }
}
