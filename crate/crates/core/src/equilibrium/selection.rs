use std::collections::BTreeMap;

use super::{aggregate, Fundamentals};
use crate::demand::{ntb_segments, SelectionRule, ShockKind, ShockSample};
use crate::error::{Error, Result};
use crate::lp::{Lp, LpResult, Sense};

/// Picks within-tier splits so that demand clears at fixed `prices`.
///
/// Starts from the uniform split over exact ties. If that does not clear,
/// every NTB slice whose cheapest options lie within `snap` of each other
/// becomes a free split, and a small LP minimizes the worst complementarity
/// violation. RTB demand is single-valued, so it is returned unchanged.
pub fn clearing_selection(f: &Fundamentals, prices: &[f64], shocks: &ShockSample, tol: f64, snap: f64) -> Result<Vec<Vec<f64>>> {
    let base = f.lotteries(prices, shocks, SelectionRule::Uniform);
    let err = f.residual(prices, &aggregate(f, &base));
    if err <= tol {
        return Ok(base);
    }
    if shocks.kind() == ShockKind::Rtb {
        return Err(Error::Infeasible(format!("RTB demand misses clearing by {err:.3e}")));
    }
    let m = f.objects();
    let scale = f.scale();
    let mut fixed = vec![vec![0.0; m]; f.demanders.len()];
    // (demander, options) → probability weight
    let mut groups: BTreeMap<(usize, Vec<usize>), f64> = BTreeMap::new();
    for (i, d) in f.demanders.iter().enumerate() {
        for seg in ntb_segments(&d.prefs, prices, d.budget, shocks) {
            let min = seg.options.iter().map(|&x| prices[x]).fold(f64::INFINITY, f64::min);
            let near: Vec<usize> = seg.options.iter().copied().filter(|&x| prices[x] - min <= snap + 1e-12).collect();
            if near.len() == 1 {
                fixed[i][near[0]] += seg.weight;
            } else {
                *groups.entry((i, near)).or_insert(0.0) += seg.weight;
            }
        }
    }
    let mut var_of: Vec<(usize, usize, usize)> = Vec::new(); // (group, demander, object)
    let keys: Vec<(usize, Vec<usize>)> = groups.keys().cloned().collect();
    for (g, (i, opts)) in keys.iter().enumerate() {
        for &x in opts {
            var_of.push((g, *i, x));
        }
    }
    let z = var_of.len();
    let mut lp = Lp::<f64>::new(z + 1);
    lp.objective[z] = -1.0;
    for (g, key) in keys.iter().enumerate() {
        let mut row = vec![0.0; z + 1];
        for (v, &(gg, _, _)) in var_of.iter().enumerate() {
            if gg == g {
                row[v] = 1.0;
            }
        }
        lp.add_row(row, Sense::Eq, groups[key] * f.demanders[key.0].mass);
    }
    for x in 0..m {
        if x == f.null {
            continue;
        }
        let fixed_x: f64 = f.demanders.iter().zip(&fixed).map(|(d, r)| d.mass * r[x]).sum();
        let mut row = vec![0.0; z + 1];
        for (v, &(_, _, y)) in var_of.iter().enumerate() {
            if y == x {
                row[v] = 1.0;
            }
        }
        let mut over = row.clone();
        over[z] = -scale;
        lp.add_row(over, Sense::Le, f.supply[x] - fixed_x);
        if prices[x] > tol {
            row[z] = scale;
            lp.add_row(row, Sense::Ge, f.supply[x] - fixed_x);
        }
    }
    let LpResult::Optimal { x: sol, .. } = lp.solve() else {
        return Err(Error::Infeasible("selection LP failed".into()));
    };
    let mut out = fixed;
    for (v, &(_, i, x)) in var_of.iter().enumerate() {
        let mass = f.demanders[i].mass;
        if mass > 0.0 {
            out[i][x] += sol[v].max(0.0) / mass;
        }
    }
    for row in out.iter_mut() {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
    let err = f.residual(prices, &aggregate(f, &out));
    if err <= tol {
        Ok(out)
    } else {
        Err(Error::Infeasible(format!("no clearing selection within {tol}: best {err:.3e}")))
    }
}
