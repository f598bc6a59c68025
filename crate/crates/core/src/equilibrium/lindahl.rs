use serde::{Deserialize, Serialize};

use super::{solve, Demander, Fundamentals, SolverConfig};
use crate::demand::ShockSample;
use crate::error::{Error, Result};
use crate::market::MarketSpec;

/// Time-tax prices `p^t, ..., p^T` with per-period allocations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LindahlResult {
    pub first_period: usize,
    /// `prices[k - t]` is the price vector faced by period-`k` arrivals.
    pub prices: Vec<Vec<f64>>,
    /// Per period, one `(type, lottery)` row for each arriving type.
    pub allocation: Vec<Vec<(usize, Vec<f64>)>>,
    /// Cumulative demand `D^{t,k}` for each `k`.
    pub cumulative_demand: Vec<Vec<f64>>,
    pub clearing_error: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// (t)-Lindahl equilibrium. `arriving[k - 1]` is the expected supply arriving
/// in period `k` (agent units). Every agent has budget `budget` and faces the
/// prices of its own arrival period. Periods are solved in order, each on the
/// supply left over by cumulative demand so far.
pub fn solve_lindahl(spec: &MarketSpec, t: usize, arriving: &[Vec<f64>], budget: f64, shocks: &ShockSample, cfg: &SolverConfig) -> Result<LindahlResult> {
    if t == 0 || t > spec.horizon {
        return Err(Error::invalid("period", format!("{t} outside 1..={}", spec.horizon)));
    }
    if arriving.len() != spec.horizon || arriving.iter().any(|s| s.len() != spec.objects.len()) {
        return Err(Error::invalid("supply", "one supply vector per period required"));
    }
    let m = spec.objects.len();
    let null = spec.objects.null();
    let n = spec.replicas as f64;
    let mut cum_supply = vec![0.0; m];
    let mut cum_demand = vec![0.0; m];
    let mut out = LindahlResult {
        first_period: t,
        prices: Vec::new(),
        allocation: Vec::new(),
        cumulative_demand: Vec::new(),
        clearing_error: 0.0,
        iterations: 0,
        converged: true,
    };
    for k in t..=spec.horizon {
        for x in 0..m {
            cum_supply[x] += arriving[k - 1][x];
        }
        let residual: Vec<f64> = (0..m).map(|x| (cum_supply[x] - cum_demand[x]).max(0.0)).collect();
        let demanders: Vec<Demander> = spec
            .types
            .iter()
            .enumerate()
            .filter(|(i, _)| spec.density[k - 1][*i] > 0.0)
            .map(|(i, ty)| Demander { ty: i, period: k, prefs: ty.prefs.clone(), budget, mass: n * spec.density[k - 1][i] })
            .collect();
        let f = Fundamentals { demanders, supply: residual, null };
        let eq = solve(&f, shocks, cfg)?;
        if !eq.converged {
            return Err(Error::NoConvergence(format!("Lindahl stage {k}: clearing error {:.3e}", eq.clearing_error)));
        }
        for x in 0..m {
            cum_demand[x] += eq.demand[x];
        }
        out.clearing_error = out.clearing_error.max(eq.clearing_error);
        out.iterations += eq.iterations;
        out.allocation.push(f.demanders.iter().map(|d| d.ty).zip(eq.allocation.iter().cloned()).collect());
        out.prices.push(eq.prices);
        out.cumulative_demand.push(cum_demand.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::ShockModel;
    use crate::market::{Budgets, SpecBuilder};

    fn two_objects(horizon: usize, doubling: bool) -> MarketSpec {
        let mut b = SpecBuilder::new("lindahl", horizon)
            .object("x", 1)
            .object("y", 1)
            .ty("a", &[&["x"], &["y"]], None)
            .ty("b", &[&["x", "y"]], None)
            .budgets(Budgets::PerPeriod(vec![1.0; horizon]))
            .shock(ShockModel::ntb(0.08));
        for t in 1..=horizon {
            let share = if doubling && t == 2 { 0.8 } else { 0.6 };
            b = b.density(t, "a", share).density(t, "b", 1.0 - share);
        }
        b.build().unwrap()
    }

    #[test]
    fn doubled_demand_raises_second_period_prices() {
        let mut spec = two_objects(2, false);
        // period 2 brings four times the arrivals of period 1, more than the
        // supply left over
        spec.replicas = 1;
        let cfg = SolverConfig::precise();
        let shocks = cfg.shocks(&spec);
        let mut scaled = spec.clone();
        scaled.density = vec![vec![0.25, 0.25], vec![1.0, 1.0]];
        // bypass per-period normalization: masses are used directly
        let supply = vec![vec![0.6, 0.6, 0.0], vec![0.6, 0.6, 0.0]];
        let r = solve_lindahl(&scaled, 1, &supply, 1.0, &shocks, &cfg).unwrap();
        assert!(r.converged);
        assert!(r.prices[1][0] != r.prices[0][0] || r.prices[1][1] != r.prices[0][1], "{:?}", r.prices);
        for (k, dem) in r.cumulative_demand.iter().enumerate() {
            let cum: Vec<f64> = (0..3).map(|x| supply[..=k].iter().map(|s| s[x]).sum()).collect();
            for x in 0..2 {
                assert!(dem[x] <= cum[x] + 1e-6, "k={k} x={x}");
                if r.prices[k][x] > 1e-6 {
                    assert!((dem[x] - cum[x]).abs() <= 1e-6 * 2.0, "k={k} x={x}");
                }
            }
        }
    }

    #[test]
    fn zero_demand_prices_at_zero() {
        let spec = two_objects(2, false);
        let cfg = SolverConfig::default();
        let shocks = cfg.shocks(&spec);
        let mut empty = spec.clone();
        empty.replicas = 1;
        empty.density = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let r = solve_lindahl(&empty, 1, &[vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 0.0]], 1.0, &shocks, &cfg).unwrap();
        assert!(r.prices.iter().flatten().all(|&p| p == 0.0));
    }
}
