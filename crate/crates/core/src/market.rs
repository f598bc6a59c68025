//! Markets: objects with integer supply, weak-order preferences, agent types,
//! per-period arrival densities, budgets and the price-shock model.
//!
//! Periods are numbered `1..=T` everywhere in the public API.

use std::collections::{BTreeMap, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::demand::ShockModel;
use crate::error::{Error, Result};

/// Tolerance on probability row sums and on density normalization.
pub const PROB_TOL: f64 = 1e-9;
/// Default tolerance for supply feasibility of lottery allocations.
pub const SUPPLY_TOL: f64 = 1e-6;

/// Objects with per-object integer supply; one of them is the null object.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectSet {
    names: Vec<String>,
    supply: Vec<u64>,
    null: usize,
}

impl ObjectSet {
    pub fn new(names: Vec<String>, supply: Vec<u64>, null: usize) -> Result<ObjectSet> {
        if names.len() != supply.len() {
            return Err(Error::invalid("objects", "names and supplies differ in length"));
        }
        if null >= names.len() {
            return Err(Error::invalid("objects", "null object is not a member"));
        }
        let mut seen = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(Error::invalid(format!("objects[{i}].id"), "empty id"));
            }
            if seen.insert(n.as_str(), i).is_some() {
                return Err(Error::invalid(format!("objects[{i}].id"), format!("duplicate object `{n}`")));
            }
        }
        Ok(ObjectSet { names, supply, null })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn null(&self) -> usize {
        self.null
    }

    pub fn name(&self, x: usize) -> &str {
        &self.names[x]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn supply(&self) -> &[u64] {
        &self.supply
    }

    /// Indices of every object except the null object.
    pub fn real(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.names.len()).filter(move |&x| x != self.null)
    }
}

/// A complete preference relation with indifferences, stored as tiers of
/// object indices, most preferred first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WeakOrder {
    tiers: Vec<Vec<usize>>,
    rank: Vec<usize>,
}

impl WeakOrder {
    /// Builds a weak order over `m` objects. The null object is appended as a
    /// last tier when missing; other unlisted objects form a tier below it.
    pub fn new(tiers: Vec<Vec<usize>>, m: usize, null: usize) -> Result<WeakOrder> {
        let mut rank = vec![usize::MAX; m];
        let mut out: Vec<Vec<usize>> = Vec::with_capacity(tiers.len() + 2);
        for (k, tier) in tiers.into_iter().enumerate() {
            if tier.is_empty() {
                return Err(Error::invalid(format!("tiers[{k}]"), "empty tier"));
            }
            let mut tier = tier;
            tier.sort_unstable();
            for &x in &tier {
                if x >= m {
                    return Err(Error::invalid(format!("tiers[{k}]"), "unknown object"));
                }
                if rank[x] != usize::MAX {
                    return Err(Error::invalid(format!("tiers[{k}]"), "object listed twice"));
                }
                rank[x] = out.len();
            }
            out.push(tier);
        }
        if rank[null] == usize::MAX {
            rank[null] = out.len();
            out.push(vec![null]);
        }
        let rest: Vec<usize> = (0..m).filter(|&x| rank[x] == usize::MAX).collect();
        if !rest.is_empty() {
            for &x in &rest {
                rank[x] = out.len();
            }
            out.push(rest);
        }
        Ok(WeakOrder { tiers: out, rank })
    }

    pub fn tiers(&self) -> &[Vec<usize>] {
        &self.tiers
    }

    pub fn tier_of(&self, x: usize) -> usize {
        self.rank[x]
    }

    pub fn num_objects(&self) -> usize {
        self.rank.len()
    }

    /// x ≻ y
    pub fn prefers(&self, x: usize, y: usize) -> bool {
        self.rank[x] < self.rank[y]
    }

    /// x ⪰ y
    pub fn weakly_prefers(&self, x: usize, y: usize) -> bool {
        self.rank[x] <= self.rank[y]
    }

    pub fn indifferent(&self, x: usize, y: usize) -> bool {
        self.rank[x] == self.rank[y]
    }

    /// Two tiers, or three with the null object alone in the middle.
    pub fn is_dichotomous(&self, null: usize) -> bool {
        match self.tiers.len() {
            1 | 2 => true,
            3 => self.tiers[1] == [null],
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentType {
    pub id: String,
    pub prefs: WeakOrder,
    /// `None` lets the type arrive in any period.
    pub arrival: Option<usize>,
}

/// Which greedy-budget gap to use between consecutive periods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyRule {
    /// Gap ξ̄ − ξ̲ plus margin.
    Range,
    /// Gap ξ̄ + ξ̲ plus margin.
    Sum,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Budgets {
    Greedy { base: f64, margin: f64, rule: GreedyRule },
    PerPeriod(Vec<f64>),
    PerType(BTreeMap<String, f64>),
}

impl Budgets {
    pub fn greedy(base: f64) -> Budgets {
        Budgets::Greedy { base, margin: 0.05, rule: GreedyRule::Range }
    }
}

/// Per-period budgets `b^1 > b^2 > ...` separating arrival cohorts.
///
/// `margin` is relative to the shock range ξ̄ − ξ̲.
pub fn greedy_budgets(horizon: usize, shock: &ShockModel, base: f64, margin: f64, rule: GreedyRule) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be positive"));
    }
    let (lo, hi) = (shock.lower(), shock.upper());
    let gap = match rule {
        GreedyRule::Range => hi - lo,
        GreedyRule::Sum => hi + lo,
    } + margin * (hi - lo);
    let mut out = Vec::with_capacity(horizon);
    let mut b = base;
    for _ in 0..horizon {
        out.push(b);
        b -= gap;
    }
    let last = out[horizon - 1];
    if last <= hi {
        return Err(Error::invalid(
            "budgets",
            format!("horizon {horizon} too long for base {base}: last budget {last:.4} does not exceed shock bound {hi}"),
        ));
    }
    Ok(out)
}

/// A market: objects, types, horizon, arrival densities, budgets and shocks.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketSpec {
    pub name: String,
    pub objects: ObjectSet,
    pub types: Vec<AgentType>,
    pub horizon: usize,
    /// `density[t - 1][i]` is f^t(i).
    pub density: Vec<Vec<f64>>,
    /// Arrivals per period (replication factor).
    pub replicas: u64,
    pub budgets: Budgets,
    pub shock: ShockModel,
}

impl MarketSpec {
    pub fn validate(&self) -> Result<()> {
        let m = self.objects.len();
        if self.horizon == 0 {
            return Err(Error::invalid("arrivals.horizon", "must be positive"));
        }
        if self.replicas == 0 {
            return Err(Error::invalid("arrivals.replicas", "must be positive"));
        }
        if self.types.is_empty() {
            return Err(Error::invalid("types", "at least one type required"));
        }
        let mut ids = HashMap::new();
        for (i, ty) in self.types.iter().enumerate() {
            if ids.insert(ty.id.as_str(), i).is_some() {
                return Err(Error::invalid(format!("types[{i}].id"), format!("duplicate type `{}`", ty.id)));
            }
            if ty.prefs.num_objects() != m {
                return Err(Error::invalid(format!("types[{i}].tiers"), "preferences over a different object set"));
            }
            if let Some(t) = ty.arrival {
                if t == 0 || t > self.horizon {
                    return Err(Error::invalid(format!("types[{i}].arrival_time"), format!("{t} outside 1..={}", self.horizon)));
                }
            }
        }
        if self.density.len() != self.horizon {
            return Err(Error::invalid("arrivals.density", format!("expected {} periods, got {}", self.horizon, self.density.len())));
        }
        for (k, row) in self.density.iter().enumerate() {
            let t = k + 1;
            if row.len() != self.types.len() {
                return Err(Error::invalid(format!("arrivals.density[{k}]"), "wrong number of types"));
            }
            let mut sum = 0.0;
            for (i, &f) in row.iter().enumerate() {
                if !(f >= 0.0) || !f.is_finite() {
                    return Err(Error::invalid(format!("arrivals.density[{k}].{}", self.types[i].id), "density must be nonnegative"));
                }
                if f > 0.0 {
                    if let Some(ti) = self.types[i].arrival {
                        if ti != t {
                            return Err(Error::invalid(
                                format!("arrivals.density[{k}].{}", self.types[i].id),
                                format!("positive density in period {t} but arrival_time is {ti}"),
                            ));
                        }
                    }
                }
                sum += f;
            }
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::invalid(format!("arrivals.density[{k}]"), format!("densities sum to {sum}, expected 1")));
            }
        }
        let total = self.replicas as f64 * self.horizon as f64;
        if (self.objects.supply()[self.objects.null()] as f64) <= total {
            return Err(Error::invalid("objects", "null object supply must exceed total agent mass"));
        }
        self.shock.validate()?;
        let budgets = self.all_budgets()?;
        let lo = budgets.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(lo > 0.0) {
            return Err(Error::invalid("budgets", "budgets must be strictly positive"));
        }
        if !(self.shock.upper() < lo) {
            return Err(Error::invalid(
                "shock",
                format!("shock bound {} must lie strictly below the minimum budget {lo}", self.shock.upper()),
            ));
        }
        Ok(())
    }

    fn all_budgets(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for t in 1..=self.horizon {
            for i in 0..self.types.len() {
                if self.density[t - 1][i] > 0.0 {
                    out.push(self.budget(i, t)?);
                }
            }
        }
        Ok(out)
    }

    /// Per-period budgets when budgets depend on the period only.
    pub fn period_budgets(&self) -> Result<Option<Vec<f64>>> {
        match &self.budgets {
            Budgets::Greedy { base, margin, rule } => greedy_budgets(self.horizon, &self.shock, *base, *margin, *rule).map(Some),
            Budgets::PerPeriod(v) => {
                if v.len() != self.horizon {
                    return Err(Error::invalid("budgets.values", format!("expected {} periods", self.horizon)));
                }
                Ok(Some(v.clone()))
            }
            Budgets::PerType(_) => Ok(None),
        }
    }

    /// Budget of type `i` arriving in period `t`.
    pub fn budget(&self, i: usize, t: usize) -> Result<f64> {
        match &self.budgets {
            Budgets::PerType(map) => map
                .get(&self.types[i].id)
                .copied()
                .ok_or_else(|| Error::invalid("budgets.values", format!("no budget for type `{}`", self.types[i].id))),
            _ => Ok(self.period_budgets()?.expect("period budgets")[t - 1]),
        }
    }

    pub fn type_index(&self, id: &str) -> Option<usize> {
        self.types.iter().position(|t| t.id == id)
    }

    /// Mass of type `i` arriving over periods `t..=k`, per replica.
    pub fn window_density(&self, i: usize, t: usize, k: usize) -> f64 {
        (t..=k).map(|s| self.density[s - 1][i]).sum()
    }

    /// Cumulative distribution over type indices in period `t`.
    pub fn cdf(&self, t: usize) -> Vec<f64> {
        let mut acc = 0.0;
        self.density[t - 1]
            .iter()
            .map(|f| {
                acc += f;
                acc
            })
            .collect()
    }

    /// Real-object supply as floats in per-replica units.
    pub fn unit_supply(&self) -> Vec<f64> {
        self.objects.supply().iter().map(|&s| s as f64 / self.replicas as f64).collect()
    }

    /// Same fundamentals with `n` times the agents and supply.
    pub fn replicate(&self, n: u64) -> Result<MarketSpec> {
        if n == 0 {
            return Err(Error::invalid("n", "replication factor must be positive"));
        }
        let mut out = self.clone();
        out.replicas = self.replicas * n;
        let null = self.objects.null();
        let supply = self
            .objects
            .supply()
            .iter()
            .enumerate()
            .map(|(x, &s)| if x == null { null_supply(out.replicas, out.horizon) } else { s * n })
            .collect();
        out.objects = ObjectSet::new(self.objects.names.clone(), supply, null)?;
        Ok(out)
    }

    /// Index of the type with preferences `prefs`, appending a zero-mass
    /// type when none matches.
    pub fn intern_type(&mut self, prefs: WeakOrder) -> Result<usize> {
        if prefs.num_objects() != self.objects.len() {
            return Err(Error::invalid("tiers", "preferences over a different object set"));
        }
        if let Some(i) = self.types.iter().position(|t| t.prefs == prefs) {
            return Ok(i);
        }
        if let Budgets::PerType(_) = self.budgets {
            return Err(Error::invalid("tiers", "unlisted preferences need period budgets"));
        }
        let mut k = self.types.len();
        while self.type_index(&format!("adhoc{k}")).is_some() {
            k += 1;
        }
        self.types.push(AgentType { id: format!("adhoc{k}"), prefs, arrival: None });
        for row in self.density.iter_mut() {
            row.push(0.0);
        }
        Ok(self.types.len() - 1)
    }

    /// Parses tiers of object names into a weak order over this market.
    pub fn parse_tiers(&self, tiers: &[Vec<String>]) -> Result<WeakOrder> {
        let mut idx = Vec::with_capacity(tiers.len());
        for (k, tier) in tiers.iter().enumerate() {
            let mut row = Vec::with_capacity(tier.len());
            for name in tier {
                row.push(
                    self.objects
                        .index(name)
                        .ok_or_else(|| Error::invalid(format!("tiers[{k}]"), format!("unknown object `{name}`")))?,
                );
            }
            idx.push(row);
        }
        WeakOrder::new(idx, self.objects.len(), self.objects.null())
    }

    /// Samples this period's `replicas` arrivals i.i.d. from f^t.
    pub fn draw_arrivals(&self, t: usize, seed: u64) -> Result<Vec<Instance>> {
        if t == 0 || t > self.horizon {
            return Err(Error::invalid("period", format!("{t} outside 1..={}", self.horizon)));
        }
        let dist = WeightedIndex::new(&self.density[t - 1]).map_err(|e| Error::invalid("arrivals.density", e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..self.replicas as usize)
            .map(|index| Instance { ty: dist.sample(&mut rng), period: t, index })
            .collect())
    }
}

pub(crate) fn null_supply(replicas: u64, horizon: usize) -> u64 {
    replicas * horizon as u64 + 1
}

/// One arriving agent: its type, arrival period and position within the period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Instance {
    pub ty: usize,
    pub period: usize,
    pub index: usize,
}

/// Row-stochastic agent × object matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LotteryAllocation {
    pub rows: Vec<(Instance, Vec<f64>)>,
}

impl LotteryAllocation {
    pub fn column_mass(&self, m: usize) -> Vec<f64> {
        let mut col = vec![0.0; m];
        for (_, row) in &self.rows {
            for (c, v) in col.iter_mut().zip(row) {
                *c += v;
            }
        }
        col
    }

    pub fn validate(&self, supply: &[f64], tol: f64) -> Result<()> {
        for (inst, row) in &self.rows {
            if row.len() != supply.len() {
                return Err(Error::invalid("allocation", format!("row for {inst:?} has wrong length")));
            }
            if row.iter().any(|&v| !(-PROB_TOL..=1.0 + PROB_TOL).contains(&v)) {
                return Err(Error::invalid("allocation", format!("row for {inst:?} has entries outside [0,1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > PROB_TOL {
                return Err(Error::invalid("allocation", format!("row for {inst:?} sums to {s}")));
            }
        }
        for (x, (c, s)) in self.column_mass(supply.len()).iter().zip(supply).enumerate() {
            if *c > s + tol {
                return Err(Error::invalid("allocation", format!("object {x} allocated {c} above supply {s}")));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Spec documents

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    #[serde(default)]
    name: String,
    #[serde(default = "default_null")]
    null_object: String,
    objects: Vec<ObjectDoc>,
    types: Vec<TypeDoc>,
    arrivals: ArrivalsDoc,
    budgets: BudgetsDoc,
    shock: ShockModel,
}

fn default_null() -> String {
    "o".to_string()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    supply: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TypeDoc {
    id: String,
    tiers: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arrival_time: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrivalsDoc {
    horizon: usize,
    #[serde(default = "one")]
    replicas: u64,
    density: Vec<BTreeMap<String, f64>>,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum BudgetsDoc {
    Greedy {
        base: f64,
        #[serde(default = "default_margin")]
        margin: f64,
        #[serde(default = "default_rule")]
        rule: GreedyRule,
    },
    PerPeriod {
        values: Vec<f64>,
    },
    PerType {
        values: BTreeMap<String, f64>,
    },
}

fn default_margin() -> f64 {
    0.05
}

fn default_rule() -> GreedyRule {
    GreedyRule::Range
}

/// Parses and validates a TOML market document.
pub fn parse_market_spec(text: &str) -> Result<MarketSpec> {
    let doc: SpecDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    from_doc(doc)
}

fn from_doc(doc: SpecDoc) -> Result<MarketSpec> {
    let mut names: Vec<String> = doc.objects.iter().map(|o| o.id.clone()).collect();
    let mut supply: Vec<Option<u64>> = doc.objects.iter().map(|o| o.supply).collect();
    let null = match names.iter().position(|n| *n == doc.null_object) {
        Some(i) => i,
        None => {
            names.push(doc.null_object.clone());
            supply.push(None);
            names.len() - 1
        }
    };
    let replicas = doc.arrivals.replicas;
    let horizon = doc.arrivals.horizon;
    let mut sup = Vec::with_capacity(names.len());
    for (x, s) in supply.iter().enumerate() {
        match (x == null, s) {
            (true, Some(s)) => sup.push((*s).max(null_supply(replicas, horizon))),
            (true, None) => sup.push(null_supply(replicas, horizon)),
            (false, Some(s)) => sup.push(*s),
            (false, None) => return Err(Error::invalid(format!("objects[{x}].supply"), "missing supply")),
        }
    }
    if let Some(s) = supply[null] {
        if (s as f64) <= (replicas as f64) * horizon as f64 {
            return Err(Error::invalid("objects", "null object supply must exceed total agent mass"));
        }
    }
    let objects = ObjectSet::new(names, sup, null)?;
    let m = objects.len();
    let mut types = Vec::with_capacity(doc.types.len());
    for (i, t) in doc.types.iter().enumerate() {
        let mut tiers = Vec::with_capacity(t.tiers.len());
        for (k, tier) in t.tiers.iter().enumerate() {
            let mut idx = Vec::with_capacity(tier.len());
            for name in tier {
                idx.push(
                    objects
                        .index(name)
                        .ok_or_else(|| Error::invalid(format!("types[{i}].tiers[{k}]"), format!("unknown object `{name}`")))?,
                );
            }
            tiers.push(idx);
        }
        let prefs = WeakOrder::new(tiers, m, null).map_err(|e| e.prefixed(&format!("types[{i}]")))?;
        types.push(AgentType { id: t.id.clone(), prefs, arrival: t.arrival_time });
    }
    let mut density = Vec::with_capacity(doc.arrivals.density.len());
    for (k, row) in doc.arrivals.density.iter().enumerate() {
        let mut v = vec![0.0; types.len()];
        for (id, &f) in row {
            let i = types
                .iter()
                .position(|t| &t.id == id)
                .ok_or_else(|| Error::invalid(format!("arrivals.density[{k}]"), format!("unknown type `{id}`")))?;
            v[i] = f;
        }
        density.push(v);
    }
    let budgets = match doc.budgets {
        BudgetsDoc::Greedy { base, margin, rule } => Budgets::Greedy { base, margin, rule },
        BudgetsDoc::PerPeriod { values } => Budgets::PerPeriod(values),
        BudgetsDoc::PerType { values } => Budgets::PerType(values),
    };
    let spec = MarketSpec {
        name: doc.name,
        objects,
        types,
        horizon,
        density,
        replicas,
        budgets,
        shock: doc.shock,
    };
    spec.validate()?;
    Ok(spec)
}

/// Writes a spec back to its TOML document form.
pub fn serialize_market_spec(spec: &MarketSpec) -> String {
    let o = &spec.objects;
    let doc = SpecDoc {
        name: spec.name.clone(),
        null_object: o.name(o.null()).to_string(),
        objects: (0..o.len())
            .map(|x| ObjectDoc { id: o.name(x).to_string(), supply: Some(o.supply()[x]) })
            .collect(),
        types: spec
            .types
            .iter()
            .map(|t| TypeDoc {
                id: t.id.clone(),
                tiers: t.prefs.tiers().iter().map(|tier| tier.iter().map(|&x| o.name(x).to_string()).collect()).collect(),
                arrival_time: t.arrival,
            })
            .collect(),
        arrivals: ArrivalsDoc {
            horizon: spec.horizon,
            replicas: spec.replicas,
            density: spec
                .density
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|(_, &f)| f > 0.0)
                        .map(|(i, &f)| (spec.types[i].id.clone(), f))
                        .collect()
                })
                .collect(),
        },
        budgets: match &spec.budgets {
            Budgets::Greedy { base, margin, rule } => BudgetsDoc::Greedy { base: *base, margin: *margin, rule: *rule },
            Budgets::PerPeriod(v) => BudgetsDoc::PerPeriod { values: v.clone() },
            Budgets::PerType(v) => BudgetsDoc::PerType { values: v.clone() },
        },
        shock: spec.shock.clone(),
    };
    toml::to_string(&doc).expect("spec documents always serialize")
}

/// Builds a spec in code. Tiers name objects; the null object is `o`.
pub struct SpecBuilder {
    name: String,
    objects: Vec<(String, u64)>,
    types: Vec<(String, Vec<Vec<String>>, Option<usize>)>,
    horizon: usize,
    density: Vec<Vec<(String, f64)>>,
    budgets: Budgets,
    shock: ShockModel,
}

impl SpecBuilder {
    pub fn new(name: &str, horizon: usize) -> SpecBuilder {
        SpecBuilder {
            name: name.to_string(),
            objects: Vec::new(),
            types: Vec::new(),
            horizon,
            density: vec![Vec::new(); horizon],
            budgets: Budgets::greedy(1.0),
            shock: ShockModel::ntb(0.08),
        }
    }

    pub fn object(mut self, id: &str, supply: u64) -> Self {
        self.objects.push((id.to_string(), supply));
        self
    }

    pub fn ty(mut self, id: &str, tiers: &[&[&str]], arrival: Option<usize>) -> Self {
        let tiers = tiers.iter().map(|t| t.iter().map(|s| s.to_string()).collect()).collect();
        self.types.push((id.to_string(), tiers, arrival));
        self
    }

    /// f^t(id) for period `t` (1-based).
    pub fn density(mut self, t: usize, id: &str, f: f64) -> Self {
        self.density[t - 1].push((id.to_string(), f));
        self
    }

    pub fn every_period(mut self, id: &str, f: f64) -> Self {
        for row in &mut self.density {
            row.push((id.to_string(), f));
        }
        self
    }

    pub fn budgets(mut self, b: Budgets) -> Self {
        self.budgets = b;
        self
    }

    pub fn shock(mut self, s: ShockModel) -> Self {
        self.shock = s;
        self
    }

    pub fn build(self) -> Result<MarketSpec> {
        let doc = SpecDoc {
            name: self.name,
            null_object: default_null(),
            objects: self.objects.into_iter().map(|(id, s)| ObjectDoc { id, supply: Some(s) }).collect(),
            types: self
                .types
                .into_iter()
                .map(|(id, tiers, arrival_time)| TypeDoc { id, tiers, arrival_time })
                .collect(),
            arrivals: ArrivalsDoc {
                horizon: self.horizon,
                replicas: 1,
                density: self.density.into_iter().map(|row| row.into_iter().collect()).collect(),
            },
            budgets: match self.budgets {
                Budgets::Greedy { base, margin, rule } => BudgetsDoc::Greedy { base, margin, rule },
                Budgets::PerPeriod(values) => BudgetsDoc::PerPeriod { values },
                Budgets::PerType(values) => BudgetsDoc::PerType { values },
            },
            shock: self.shock,
        };
        from_doc(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOSTER: &str = include_str!("../markets/foster.toml");

    fn tiny() -> MarketSpec {
        SpecBuilder::new("tiny", 1).object("x", 1).ty("a", &[&["x"]], None).every_period("a", 1.0).build().unwrap()
    }

    #[test]
    fn parses_the_foster_market() {
        let spec = parse_market_spec(FOSTER).unwrap();
        assert_eq!(spec.objects.len(), 3);
        assert_eq!(spec.types.len(), 2);
        assert_eq!(spec.horizon, 4);
        assert_eq!(spec.objects.name(spec.objects.null()), "o");
        let c1 = &spec.types[0].prefs;
        let (a, b, o) = (0, 1, 2);
        assert!(c1.prefers(a, o) && c1.prefers(o, b));
        let c2 = &spec.types[1].prefs;
        assert!(c2.indifferent(a, b) && c2.prefers(b, o));
    }

    #[test]
    fn minimal_spec_is_valid() {
        let spec = tiny();
        assert_eq!(spec.objects.len(), 2);
        assert_eq!(spec.types[0].prefs.tiers(), &[vec![0], vec![1]]);
    }

    #[test]
    fn unnormalized_density_is_rejected() {
        let err = SpecBuilder::new("bad", 1)
            .object("x", 1)
            .ty("a", &[&["x"]], None)
            .every_period("a", 0.9)
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("arrivals.density[0]"), "{err}");
    }

    #[test]
    fn density_outside_arrival_time_is_rejected() {
        let err = SpecBuilder::new("bad", 2)
            .object("x", 1)
            .ty("a", &[&["x"]], Some(1))
            .ty("b", &[&["x"]], Some(2))
            .density(1, "a", 1.0)
            .density(2, "a", 1.0)
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("arrival_time"), "{err}");
    }

    #[test]
    fn unknown_object_in_tier_is_reported_with_path() {
        let text = FOSTER.replace("[\"a\"], [\"o\"], [\"b\"]", "[\"a\"], [\"q\"]");
        let err = parse_market_spec(&text).unwrap_err();
        assert!(err.to_string().contains("types[0].tiers"), "{err}");
    }

    #[test]
    fn shock_must_sit_below_budgets() {
        let err = SpecBuilder::new("bad", 1)
            .object("x", 1)
            .ty("a", &[&["x"]], None)
            .every_period("a", 1.0)
            .budgets(Budgets::PerPeriod(vec![0.05]))
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("shock"), "{err}");
    }

    #[test]
    fn round_trip_is_identity() {
        let spec = parse_market_spec(FOSTER).unwrap();
        let again = parse_market_spec(&serialize_market_spec(&spec)).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn replicate_scales_supply_and_arrivals() {
        let spec = parse_market_spec(FOSTER).unwrap();
        let r = spec.replicate(25).unwrap();
        assert_eq!(&r.objects.supply()[..2], &[50, 50]);
        assert_eq!(r.draw_arrivals(1, 3).unwrap().len(), 25);
        assert_eq!(spec.replicate(1).unwrap(), spec);
        assert!(spec.replicate(0).is_err());
        let r5 = spec.replicate(5).unwrap();
        let total: usize = (1..=4).map(|t| r5.draw_arrivals(t, t as u64).unwrap().len()).sum();
        assert_eq!(total, 20);
    }

    #[test]
    fn replicate_composes() {
        let spec = parse_market_spec(FOSTER).unwrap();
        assert_eq!(spec.replicate(6).unwrap(), spec.replicate(2).unwrap().replicate(3).unwrap());
    }

    #[test]
    fn draws_are_reproducible_and_in_range() {
        let spec = parse_market_spec(FOSTER).unwrap().replicate(10).unwrap();
        let a = spec.draw_arrivals(1, 42).unwrap();
        assert_eq!(a, spec.draw_arrivals(1, 42).unwrap());
        assert!(a.iter().all(|i| i.period == 1 && i.ty < 2));
        assert!(spec.draw_arrivals(0, 1).is_err());
        assert!(spec.draw_arrivals(5, 1).is_err());
    }

    #[test]
    fn degenerate_density_draws_its_type() {
        let spec = SpecBuilder::new("d", 1)
            .object("x", 1)
            .ty("a", &[&["x"]], None)
            .ty("b", &[&["x"]], None)
            .every_period("a", 1.0)
            .every_period("b", 0.0)
            .build()
            .unwrap()
            .replicate(50)
            .unwrap();
        assert!(spec.draw_arrivals(1, 9).unwrap().iter().all(|i| i.ty == 0));
    }

    #[test]
    fn arrival_frequency_matches_density() {
        let spec = parse_market_spec(FOSTER).unwrap().replicate(100_000).unwrap();
        let draws = spec.draw_arrivals(1, 7).unwrap();
        let c1 = draws.iter().filter(|i| i.ty == 0).count() as f64 / draws.len() as f64;
        assert!((c1 - 0.5).abs() < 0.01, "{c1}");
    }

    #[test]
    fn weak_order_relations_are_complete_and_transitive() {
        // every weak order over up to 6 objects, sampled by tier assignment
        for m in 1..=6usize {
            let mut labels = vec![0usize; m];
            loop {
                let k = labels.iter().max().unwrap() + 1;
                let mut tiers = vec![Vec::new(); k];
                for (x, &l) in labels.iter().enumerate() {
                    tiers[l].push(x);
                }
                if tiers.iter().all(|t| !t.is_empty()) {
                    let w = WeakOrder::new(tiers, m, 0).unwrap();
                    for x in 0..m {
                        for y in 0..m {
                            assert!(w.weakly_prefers(x, y) || w.weakly_prefers(y, x));
                            assert_eq!(w.prefers(x, y), !w.weakly_prefers(y, x));
                            for z in 0..m {
                                if w.weakly_prefers(x, y) && w.weakly_prefers(y, z) {
                                    assert!(w.weakly_prefers(x, z));
                                }
                            }
                        }
                    }
                }
                // next labelling in base m
                let mut i = 0;
                while i < m {
                    labels[i] += 1;
                    if labels[i] < m {
                        break;
                    }
                    labels[i] = 0;
                    i += 1;
                }
                if i == m {
                    break;
                }
            }
        }
    }

    #[test]
    fn null_is_appended_and_leftovers_fall_below_it() {
        let w = WeakOrder::new(vec![vec![1]], 3, 0).unwrap();
        assert_eq!(w.tiers(), &[vec![1], vec![0], vec![2]]);
        assert!(WeakOrder::new(vec![vec![]], 3, 0).is_err());
        assert!(WeakOrder::new(vec![vec![1], vec![1]], 3, 0).is_err());
    }

    #[test]
    fn greedy_budget_arithmetic() {
        let s = ShockModel::ntb(0.1);
        let b = greedy_budgets(4, &s, 1.0, 0.05, GreedyRule::Range).unwrap();
        for (got, want) in b.iter().zip([1.0, 0.79, 0.58, 0.37]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(greedy_budgets(1, &s, 1.0, 0.05, GreedyRule::Range).unwrap(), vec![1.0]);
        assert!(greedy_budgets(4, &ShockModel::ntb(0.45), 1.0, 0.05, GreedyRule::Range).is_err());
        let text = greedy_budgets(3, &s, 1.0, 0.05, GreedyRule::Sum).unwrap();
        assert!((text[1] - 0.99).abs() < 1e-12);
    }

    #[test]
    fn allocation_validation() {
        let inst = Instance { ty: 0, period: 1, index: 0 };
        let a = LotteryAllocation { rows: vec![(inst, vec![0.5, 0.5])] };
        assert!(a.validate(&[1.0, 1.0], SUPPLY_TOL).is_ok());
        assert!(a.validate(&[0.4, 1.0], SUPPLY_TOL).is_err());
        let b = LotteryAllocation { rows: vec![(inst, vec![0.5, 0.4])] };
        assert!(b.validate(&[1.0, 1.0], SUPPLY_TOL).is_err());
    }
}
