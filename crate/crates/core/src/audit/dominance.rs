//! First-order stochastic dominance of lotteries under a weak order.

use serde::{Deserialize, Serialize};

use crate::market::WeakOrder;

/// Default slack for comparing cumulative probabilities.
pub const SD_TOL: f64 = 1e-9;

/// How lottery `a` compares with lottery `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Equal,
    StrictlyDominates,
    StrictlyDominated,
    Incomparable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceVerdict {
    pub relation: Relation,
    /// First tier cutoff (0 = top tier) where the strict comparison shows.
    pub witness_tier: Option<usize>,
}

impl DominanceVerdict {
    /// `a` is at least as good as `b` for every upper contour.
    pub fn weakly_dominates(&self) -> bool {
        matches!(self.relation, Relation::Equal | Relation::StrictlyDominates)
    }
}

/// Probability of each upper contour set, tier by tier.
pub fn cumulative(prefs: &WeakOrder, lottery: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    prefs
        .tiers()
        .iter()
        .map(|tier| {
            acc += tier.iter().map(|&x| lottery[x]).sum::<f64>();
            acc
        })
        .collect()
}

pub fn sd_compare(prefs: &WeakOrder, a: &[f64], b: &[f64]) -> DominanceVerdict {
    sd_compare_tol(prefs, a, b, SD_TOL)
}

pub fn sd_compare_tol(prefs: &WeakOrder, a: &[f64], b: &[f64], tol: f64) -> DominanceVerdict {
    let ca = cumulative(prefs, a);
    let cb = cumulative(prefs, b);
    let mut above = None;
    let mut below = None;
    for (k, (x, y)) in ca.iter().zip(&cb).enumerate() {
        if x - y > tol && above.is_none() {
            above = Some(k);
        }
        if y - x > tol && below.is_none() {
            below = Some(k);
        }
    }
    match (above, below) {
        (None, None) => DominanceVerdict { relation: Relation::Equal, witness_tier: None },
        (Some(k), None) => DominanceVerdict { relation: Relation::StrictlyDominates, witness_tier: Some(k) },
        (None, Some(k)) => DominanceVerdict { relation: Relation::StrictlyDominated, witness_tier: Some(k) },
        (Some(_), Some(_)) => DominanceVerdict { relation: Relation::Incomparable, witness_tier: None },
    }
}
