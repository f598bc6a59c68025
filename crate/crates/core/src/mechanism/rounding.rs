//! Dependent rounding of a fractional assignment.
//!
//! Repeatedly finds a cycle or a maximal path of fractional edges in the
//! bipartite support graph and shifts mass alternately along it until one
//! edge becomes integral. The random direction is chosen so each entry is a
//! martingale, which preserves marginals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const EPS: f64 = 1e-9;

/// Rounds `rows` (one lottery per arrival) to one object per arrival without
/// exceeding `capacity`. `None` means unlimited.
pub fn dependent_round(rows: &[Vec<f64>], capacity: &[Option<u64>], seed: u64) -> Result<Vec<usize>> {
    let r = rows.len();
    let c = capacity.len();
    if r == 0 {
        return Ok(Vec::new());
    }
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(r);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(Error::invalid(format!("rows[{i}]"), "wrong length"));
        }
        if row.iter().any(|&v| !(v >= -EPS && v <= 1.0 + EPS)) {
            return Err(Error::invalid(format!("rows[{i}]"), "entries must lie in [0,1]"));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("rows[{i}]"), format!("sums to {s}")));
        }
        x.push(row.iter().map(|v| v.clamp(0.0, 1.0) / s).collect());
    }
    for j in 0..c {
        if let Some(cap) = capacity[j] {
            let col: f64 = x.iter().map(|row| row[j]).sum();
            if col > cap as f64 + 1e-6 {
                return Err(Error::Infeasible(format!("column {j} carries {col} above capacity {cap}")));
            }
        }
    }
    for row in x.iter_mut() {
        snap_row(row);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let walk = Walk::new(r, c);
    while let Some((edges, _cycle)) = walk.find(&mut x) {
        // edges alternate +, −, +, ...
        let (mut alpha, mut beta) = (f64::INFINITY, f64::INFINITY);
        for (k, &(i, j)) in edges.iter().enumerate() {
            let v = x[i][j];
            if k % 2 == 0 {
                alpha = alpha.min(1.0 - v);
                beta = beta.min(v);
            } else {
                alpha = alpha.min(v);
                beta = beta.min(1.0 - v);
            }
        }
        let up = rng.random::<f64>() < beta / (alpha + beta);
        let d = if up { alpha } else { -beta };
        for (k, &(i, j)) in edges.iter().enumerate() {
            let v = if k % 2 == 0 { x[i][j] + d } else { x[i][j] - d };
            x[i][j] = snap(v);
        }
    }
    let mut out = Vec::with_capacity(r);
    let mut used = vec![0u64; c];
    for (i, row) in x.iter().enumerate() {
        let j = (0..c).find(|&j| row[j] > 0.5).ok_or_else(|| Error::Other(format!("row {i} ended without an object")))?;
        used[j] += 1;
        out.push(j);
    }
    for j in 0..c {
        if let Some(cap) = capacity[j] {
            if used[j] > cap {
                return Err(Error::Other(format!("rounding exceeded capacity of column {j}")));
            }
        }
    }
    Ok(out)
}

fn snap(v: f64) -> f64 {
    if v < EPS {
        0.0
    } else if v > 1.0 - EPS {
        1.0
    } else {
        v
    }
}

fn snap_row(row: &mut [f64]) {
    for v in row.iter_mut() {
        *v = snap(*v);
    }
    let s: f64 = row.iter().sum();
    if s > 0.0 {
        row.iter_mut().for_each(|v| *v /= s);
    }
}

fn fractional(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

/// Alternating walk over fractional edges. Vertices `0..r` are rows and
/// `r..r+c` are columns.
struct Walk {
    r: usize,
    c: usize,
}

impl Walk {
    fn new(r: usize, c: usize) -> Walk {
        Walk { r, c }
    }

    fn neighbours(&self, x: &[Vec<f64>], v: usize) -> Vec<usize> {
        if v < self.r {
            (0..self.c).filter(|&j| fractional(x[v][j])).map(|j| self.r + j).collect()
        } else {
            let j = v - self.r;
            (0..self.r).filter(|&i| fractional(x[i][j])).collect()
        }
    }

    fn edge(&self, a: usize, b: usize) -> (usize, usize) {
        if a < self.r {
            (a, b - self.r)
        } else {
            (b, a - self.r)
        }
    }

    /// Returns the edges of a cycle or maximal path, in walk order.
    fn find(&self, x: &mut [Vec<f64>]) -> Option<(Vec<(usize, usize)>, bool)> {
        loop {
            let start = (0..self.r).find_map(|i| (0..self.c).find(|&j| fractional(x[i][j])).map(|j| (i, j)))?;
            let mut verts = vec![start.0, self.r + start.1];
            let mut reversed = false;
            let result = loop {
                let v = *verts.last().unwrap();
                let prev = verts[verts.len() - 2];
                let next = self.neighbours(x, v).into_iter().find(|&w| w != prev);
                match next {
                    Some(w) => {
                        if let Some(k) = verts.iter().position(|&u| u == w) {
                            let mut cyc: Vec<usize> = verts[k..].to_vec();
                            cyc.push(w);
                            let edges = cyc.windows(2).map(|e| self.edge(e[0], e[1])).collect();
                            break Some((edges, true));
                        }
                        verts.push(w);
                    }
                    None if !reversed => {
                        if v < self.r {
                            // a row left with one fractional entry: float drift
                            let (i, j) = self.edge(v, prev);
                            x[i][j] = x[i][j].round();
                            snap_row(&mut x[i]);
                            break None;
                        }
                        verts.reverse();
                        reversed = true;
                    }
                    None => {
                        if v < self.r {
                            let (i, j) = self.edge(v, prev);
                            x[i][j] = x[i][j].round();
                            snap_row(&mut x[i]);
                            break None;
                        }
                        let edges = verts.windows(2).map(|e| self.edge(e[0], e[1])).collect();
                        break Some((edges, false));
                    }
                }
            };
            if let Some(found) = result {
                return Some(found);
            }
        }
    }
}
