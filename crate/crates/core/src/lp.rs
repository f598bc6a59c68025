//! Small dense linear programs: two-phase tableau simplex with Bland's rule,
//! generic over `f64` and exact rationals.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub trait Field:
    Clone + Debug + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// Strictly positive beyond the arithmetic's noise floor.
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool {
        (-self.clone()).is_pos()
    }
}

const F64_EPS: f64 = 1e-10;

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_pos(&self) -> bool {
        *self > F64_EPS
    }
}

impl Field for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).unwrap_or_else(|| BigRational::from_integer(BigInt::zero()))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_pos(&self) -> bool {
        Signed::is_positive(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// maximize `objective · x` subject to `rows`, `x ≥ 0`.
#[derive(Clone, Debug)]
pub struct Lp<T> {
    pub vars: usize,
    pub objective: Vec<T>,
    pub rows: Vec<(Vec<T>, Sense, T)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpResult<T> {
    Optimal { x: Vec<T>, value: T },
    Infeasible,
    Unbounded,
}

impl<T: Field> Lp<T> {
    pub fn new(vars: usize) -> Lp<T> {
        Lp { vars, objective: vec![T::zero(); vars], rows: Vec::new() }
    }

    pub fn add_row(&mut self, coef: Vec<T>, sense: Sense, rhs: T) {
        assert_eq!(coef.len(), self.vars);
        self.rows.push((coef, sense, rhs));
    }

    pub fn solve(&self) -> LpResult<T> {
        Tableau::build(self).run(self)
    }
}

struct Tableau<T> {
    a: Vec<Vec<T>>,
    b: Vec<T>,
    basis: Vec<usize>,
    cols: usize,
    artificial_from: usize,
}

impl<T: Field> Tableau<T> {
    fn build(lp: &Lp<T>) -> Tableau<T> {
        let m = lp.rows.len();
        let n = lp.vars;
        let slacks = lp.rows.iter().filter(|r| r.1 != Sense::Eq).count();
        let arts = lp
            .rows
            .iter()
            .filter(|(_, s, rhs)| {
                let flip = rhs.is_neg();
                match (s, flip) {
                    (Sense::Le, false) | (Sense::Ge, true) => false,
                    _ => true,
                }
            })
            .count();
        let cols = n + slacks + arts;
        let artificial_from = n + slacks;
        let mut a = vec![vec![T::zero(); cols]; m];
        let mut b = vec![T::zero(); m];
        let mut basis = vec![0; m];
        let (mut s_next, mut a_next) = (n, artificial_from);
        for (i, (coef, sense, rhs)) in lp.rows.iter().enumerate() {
            let flip = rhs.is_neg();
            for j in 0..n {
                a[i][j] = if flip { -coef[j].clone() } else { coef[j].clone() };
            }
            b[i] = if flip { -rhs.clone() } else { rhs.clone() };
            let sense = match (sense, flip) {
                (Sense::Le, true) => Sense::Ge,
                (Sense::Ge, true) => Sense::Le,
                (s, _) => *s,
            };
            match sense {
                Sense::Le => {
                    a[i][s_next] = T::one();
                    basis[i] = s_next;
                    s_next += 1;
                }
                Sense::Ge => {
                    a[i][s_next] = -T::one();
                    s_next += 1;
                    a[i][a_next] = T::one();
                    basis[i] = a_next;
                    a_next += 1;
                }
                Sense::Eq => {
                    a[i][a_next] = T::one();
                    basis[i] = a_next;
                    a_next += 1;
                }
            }
        }
        Tableau { a, b, basis, cols, artificial_from }
    }

    fn pivot(&mut self, r: usize, c: usize, z: &mut [T], zv: &mut T) {
        let pv = self.a[r][c].clone();
        for j in 0..self.cols {
            self.a[r][j] = self.a[r][j].clone() / pv.clone();
        }
        self.b[r] = self.b[r].clone() / pv;
        for i in 0..self.a.len() {
            if i == r {
                continue;
            }
            let f = self.a[i][c].clone();
            if f.is_pos() || f.is_neg() {
                for j in 0..self.cols {
                    let v = self.a[r][j].clone();
                    self.a[i][j] = self.a[i][j].clone() - f.clone() * v;
                }
                self.b[i] = self.b[i].clone() - f * self.b[r].clone();
            } else {
                self.a[i][c] = T::zero();
            }
        }
        let f = z[c].clone();
        for j in 0..self.cols {
            z[j] = z[j].clone() - f.clone() * self.a[r][j].clone();
        }
        *zv = zv.clone() + f * self.b[r].clone();
        self.basis[r] = c;
    }

    /// Maximizes `c · x` from the current basis. Returns false if unbounded.
    fn optimize(&mut self, c: &[T], allowed: usize) -> (bool, T) {
        // reduced costs z_j = c_j - c_B B^-1 A_j, value = c_B B^-1 b
        let mut z: Vec<T> = c.to_vec();
        let mut zv = T::zero();
        for (i, &bi) in self.basis.iter().enumerate() {
            let cb = c[bi].clone();
            if cb.is_pos() || cb.is_neg() {
                for j in 0..self.cols {
                    z[j] = z[j].clone() - cb.clone() * self.a[i][j].clone();
                }
                zv = zv + cb * self.b[i].clone();
            }
        }
        loop {
            let enter = (0..allowed).find(|&j| z[j].is_pos());
            let Some(e) = enter else { return (true, zv) };
            let mut leave: Option<usize> = None;
            for i in 0..self.a.len() {
                if !self.a[i][e].is_pos() {
                    continue;
                }
                match leave {
                    None => leave = Some(i),
                    Some(l) => {
                        let lhs = self.b[i].clone() * self.a[l][e].clone();
                        let rhs = self.b[l].clone() * self.a[i][e].clone();
                        let d = lhs - rhs;
                        if d.is_neg() || (!d.is_pos() && self.basis[i] < self.basis[l]) {
                            leave = Some(i);
                        }
                    }
                }
            }
            let Some(l) = leave else { return (false, zv) };
            self.pivot(l, e, &mut z, &mut zv);
        }
    }

    fn run(mut self, lp: &Lp<T>) -> LpResult<T> {
        let n = lp.vars;
        if self.artificial_from < self.cols {
            let mut c = vec![T::zero(); self.cols];
            for v in c.iter_mut().skip(self.artificial_from) {
                *v = -T::one();
            }
            let (_, value) = self.optimize(&c, self.cols);
            if value.is_neg() {
                return LpResult::Infeasible;
            }
            // drive zero-valued artificials out of the basis where possible
            for i in 0..self.a.len() {
                if self.basis[i] < self.artificial_from {
                    continue;
                }
                if let Some(j) = (0..self.artificial_from).find(|&j| self.a[i][j].is_pos() || self.a[i][j].is_neg()) {
                    let mut z = vec![T::zero(); self.cols];
                    let mut zv = T::zero();
                    self.pivot(i, j, &mut z, &mut zv);
                }
            }
        }
        let mut c = vec![T::zero(); self.cols];
        c[..n].clone_from_slice(&lp.objective);
        let (bounded, value) = self.optimize(&c, self.artificial_from);
        if !bounded {
            return LpResult::Unbounded;
        }
        let mut x = vec![T::zero(); n];
        for (i, &bi) in self.basis.iter().enumerate() {
            if bi < n {
                x[bi] = self.b[i].clone();
            }
        }
        LpResult::Optimal { x, value }
    }
}

pub fn rational(v: f64) -> BigRational {
    <BigRational as Field>::from_f64(v)
}
