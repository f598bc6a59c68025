//! Price stability when arrival rates are perturbed: three objects, all
//! thirteen weak orders over them, unit supply and three periods.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};
use serde::{Deserialize, Serialize};

use sem_core::demand::SelectionRule;
use sem_core::equilibrium::{solve, Fundamentals, SolverConfig};
use sem_core::market::{MarketSpec, SpecBuilder};
use sem_core::seeds;

use crate::stats::{mean, median};
use crate::{par_map, Result};

pub const TYPES: usize = 13;
const HORIZON: usize = 3;
const OBJECTS: [&str; 3] = ["x", "y", "z"];

#[derive(Clone, Debug)]
pub struct PerturbationConfig {
    pub markets: usize,
    pub perturbations: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub solver: SolverConfig,
    /// Prices above the solver tolerance and at most this far apart count
    /// as a positive-price tie.
    pub tie_tol: f64,
    pub workers: usize,
}

impl PerturbationConfig {
    pub fn standard() -> PerturbationConfig {
        let solver = SolverConfig::default();
        let tie_tol = match solver.rule {
            SelectionRule::Proximity { window } => window,
            SelectionRule::Uniform => solver.tol,
        };
        PerturbationConfig { markets: 100, perturbations: 100, epsilon: 0.025, seed: 2024, tie_tol, solver, workers: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbed {
    /// Max-norm price change over the median budget.
    pub distance: f64,
    pub ties_preserved: usize,
    pub clearing_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub market: usize,
    pub base_rates: Vec<f64>,
    pub base_prices: Vec<f64>,
    pub base_clearing_error: f64,
    /// Pairs of objects whose positive base prices are tied.
    pub base_ties: Vec<(usize, usize)>,
    pub perturbations: Vec<Perturbed>,
    pub failures: usize,
}

impl PerturbationReport {
    pub fn average_distance(&self) -> f64 {
        mean(&self.perturbations.iter().map(|p| p.distance).collect::<Vec<_>>())
    }

    /// Share of base ties kept, over all perturbations; `None` without ties.
    pub fn preserved_share(&self) -> Option<f64> {
        if self.base_ties.is_empty() || self.perturbations.is_empty() {
            return None;
        }
        let kept: usize = self.perturbations.iter().map(|p| p.ties_preserved).sum();
        Some(kept as f64 / (self.base_ties.len() * self.perturbations.len()) as f64)
    }

    pub fn average_clearing_error(&self) -> f64 {
        mean(&self.perturbations.iter().map(|p| p.clearing_error).collect::<Vec<_>>())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSummary {
    pub markets: usize,
    pub average_distance: f64,
    /// Average over markets that have at least one tie.
    pub preserved_ties: f64,
    pub markets_with_ties: usize,
    pub average_clearing_error: f64,
    pub failures: usize,
}

pub fn summarize(reports: &[PerturbationReport]) -> PerturbationSummary {
    let shares: Vec<f64> = reports.iter().filter_map(|r| r.preserved_share()).collect();
    PerturbationSummary {
        markets: reports.len(),
        average_distance: mean(&reports.iter().map(|r| r.average_distance()).collect::<Vec<_>>()),
        preserved_ties: if shares.is_empty() { 1.0 } else { mean(&shares) },
        markets_with_ties: shares.len(),
        average_clearing_error: mean(&reports.iter().map(|r| r.average_clearing_error()).collect::<Vec<_>>()),
        failures: reports.iter().map(|r| r.failures).sum(),
    }
}

/// The thirteen weak orders over three objects as tiers of names.
pub fn weak_orders() -> Vec<Vec<Vec<&'static str>>> {
    let [a, b, c] = OBJECTS;
    let mut out = Vec::with_capacity(TYPES);
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        out.push(vec![vec![p[0]], vec![p[1]], vec![p[2]]]);
    }
    for single in OBJECTS {
        let pair: Vec<&str> = OBJECTS.into_iter().filter(|&o| o != single).collect();
        out.push(vec![vec![single], pair.clone()]);
        out.push(vec![pair, vec![single]]);
    }
    out.push(vec![OBJECTS.to_vec()]);
    out
}

/// Market with the same type rates in every period.
pub fn market(rates: &[f64]) -> Result<MarketSpec> {
    let mut b = SpecBuilder::new("perturbation", HORIZON);
    for o in OBJECTS {
        b = b.object(o, 1);
    }
    for (k, tiers) in weak_orders().iter().enumerate() {
        let refs: Vec<&[&str]> = tiers.iter().map(|t| t.as_slice()).collect();
        let id = format!("w{k}");
        b = b.ty(&id, &refs, None).every_period(&id, rates[k]);
    }
    b.build()
}

fn dirichlet(rng: &mut ChaCha8Rng) -> Vec<f64> {
    Dirichlet::new([1.0; TYPES]).expect("valid concentration").sample(rng).to_vec()
}

/// Adds `epsilon` times a Dirichlet draw to the rates and renormalises.
pub fn perturb(rates: &[f64], epsilon: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let noise = dirichlet(rng);
    let raw: Vec<f64> = rates.iter().zip(&noise).map(|(r, e)| r + epsilon * e).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn equilibrium(spec: &MarketSpec, cfg: &SolverConfig) -> Result<(Vec<f64>, f64, bool, f64)> {
    let f = Fundamentals::from_spec(spec, 1, &spec.unit_supply(), None)?;
    let budgets: Vec<f64> = f.demanders.iter().map(|d| d.budget).collect();
    let eq = solve(&f, &cfg.shocks(spec), cfg)?;
    Ok((eq.prices, eq.clearing_error, eq.converged, median(&budgets)))
}

fn ties(prices: &[f64], null: usize, positive: f64, tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for x in 0..prices.len() {
        for y in x + 1..prices.len() {
            if x != null && y != null && prices[x] > positive && prices[y] > positive && (prices[x] - prices[y]).abs() <= tol {
                out.push((x, y));
            }
        }
    }
    out
}

/// One base market and its perturbations. Perturbed rates apply to every
/// period independently; failures to converge are counted and skipped.
pub fn study_market(cfg: &PerturbationConfig, k: usize) -> Result<PerturbationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, seeds::STUDY, k as u64));
    let base_rates = dirichlet(&mut rng);
    let base = market(&base_rates)?;
    let null = base.objects.null();
    let (base_prices, base_err, converged, med) = equilibrium(&base, &cfg.solver)?;
    if !converged {
        return Err(sem_core::Error::NoConvergence(format!("base market {k}: residual {base_err:.3e}")));
    }
    let base_ties = ties(&base_prices, null, cfg.solver.tol, cfg.tie_tol);
    let mut perturbations = Vec::with_capacity(cfg.perturbations);
    let mut failures = 0;
    for _ in 0..cfg.perturbations {
        let mut spec = base.clone();
        for row in spec.density.iter_mut() {
            *row = perturb(&base_rates, cfg.epsilon, &mut rng);
        }
        let (prices, err, ok, _) = equilibrium(&spec, &cfg.solver)?;
        if !ok {
            failures += 1;
            continue;
        }
        let gap = prices.iter().zip(&base_prices).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let kept = base_ties.iter().filter(|&&(x, y)| (prices[x] - prices[y]).abs() <= cfg.tie_tol).count();
        perturbations.push(Perturbed { distance: gap / med, ties_preserved: kept, clearing_error: err });
    }
    Ok(PerturbationReport { market: k, base_rates, base_prices, base_clearing_error: base_err, base_ties, perturbations, failures })
}

pub fn perturbation_study(cfg: &PerturbationConfig) -> Result<(Vec<PerturbationReport>, PerturbationSummary)> {
    let ks: Vec<usize> = (0..cfg.markets).collect();
    let reports: Vec<PerturbationReport> = par_map(&ks, cfg.workers, |&k| study_market(cfg, k)).into_iter().collect::<Result<_>>()?;
    let summary = summarize(&reports);
    Ok((reports, summary))
}
