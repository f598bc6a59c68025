//! Damped semismooth Newton polish on `min(p, s − D(p)) = 0`, used when
//! price adjustment stalls on near-ties.

use crate::demand::{SelectionRule, ShockSample};

use super::Fundamentals;

const MAX_STEPS: usize = 100;

fn phi(f: &Fundamentals, p: &[f64], d: &[f64]) -> Vec<f64> {
    let scale = f.scale();
    (0..f.objects()).filter(|&x| x != f.null).map(|x| p[x].min(f.supply[x] - d[x]) / scale).collect()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let k = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= k * a[c][j];
            }
            b[r] -= k * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|j| a[r][j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Returns the polished prices and their residual. Never returns a point
/// worse than `start`.
pub(crate) fn polish(f: &Fundamentals, shocks: &ShockSample, rule: SelectionRule, start: &[f64], cap: f64, tol: f64) -> (Vec<f64>, f64) {
    let real: Vec<usize> = (0..f.objects()).filter(|&x| x != f.null).collect();
    let k = real.len();
    let h = match rule {
        SelectionRule::Proximity { window } => (window / 8.0).max(1e-6),
        SelectionRule::Uniform => 1e-5,
    };
    let mut p = start.to_vec();
    let mut d = f.demand(&p, shocks, rule);
    let mut r = phi(f, &p, &d);
    let mut err = f.residual(&p, &d);
    let mut lambda = 1e-8;
    for _ in 0..MAX_STEPS {
        if err <= tol {
            break;
        }
        // rows follow whichever branch of the min is active
        let scale = f.scale();
        let mut jac = vec![vec![0.0; k]; k];
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
        for &y in &real {
            let mut q = p.clone();
            q[y] += h;
            let dq = f.demand(&q, shocks, rule);
            cols.push(real.iter().map(|&x| -(dq[x] - d[x]) / h / scale).collect());
        }
        for (i, &x) in real.iter().enumerate() {
            if p[x] <= f.supply[x] - d[x] {
                jac[i][i] = 1.0 / scale;
            } else {
                for j in 0..k {
                    jac[i][j] = cols[j][i];
                }
            }
        }
        // Levenberg-Marquardt normal equations
        let mut improved = false;
        for _ in 0..12 {
            let mut a = vec![vec![0.0; k]; k];
            let mut b = vec![0.0; k];
            for i in 0..k {
                for j in 0..k {
                    a[i][j] = (0..k).map(|l| jac[l][i] * jac[l][j]).sum();
                }
                a[i][i] += lambda * (1.0 + a[i][i]);
                b[i] = -(0..k).map(|l| jac[l][i] * r[l]).sum::<f64>();
            }
            let Some(step) = solve_dense(a, b) else {
                lambda *= 10.0;
                continue;
            };
            let mut q = p.clone();
            for (i, &x) in real.iter().enumerate() {
                q[x] = (p[x] + step[i]).clamp(0.0, cap);
            }
            let dq = f.demand(&q, shocks, rule);
            let rq = phi(f, &q, &dq);
            if norm2(&rq) < norm2(&r) {
                p = q;
                d = dq;
                r = rq;
                err = f.residual(&p, &d);
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (p, err)
}
