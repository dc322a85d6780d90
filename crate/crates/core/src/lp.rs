//! Dense two-phase simplex, generic over `f64` and exact rationals.
//!
//! Pricing is Dantzig's rule; after a run of degenerate pivots it switches to
//! Bland's rule until progress resumes, so the method terminates. Ratio-test
//! ties always go to the smallest basic variable index. LPs with many more
//! rows than columns are solved through their dual. Each solve is
//! single-threaded; callers parallelize across instances.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
}

pub trait Scalar:
    Clone
    + Send
    + Sync
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// Magnitudes at or below this are treated as zero by the pivoting rules.
    fn tol() -> Self;
    fn is_exact_zero(&self) -> bool;
    fn abs(&self) -> Self;
    /// Rounds tiny noise to zero after an update.
    fn clean(self) -> Self {
        self
    }
}

impl Scalar for f64 {
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
    fn tol() -> Self {
        1e-9
    }
    fn is_exact_zero(&self) -> bool {
        *self == 0.0
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn clean(self) -> Self {
        if self.abs() < 1e-13 {
            0.0
        } else {
            self
        }
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        num_traits::One::one()
    }
    fn from_f64(v: f64) -> Self {
        <BigRational as FromPrimitive>::from_f64(v).expect("finite float")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn tol() -> Self {
        Zero::zero()
    }
    fn is_exact_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone)]
pub struct Constraint<T> {
    pub coeffs: Vec<(usize, T)>,
    pub relation: Relation,
    pub rhs: T,
}

/// A linear program over nonnegative or free variables.
#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    sense: Sense,
    objective: Vec<T>,
    free: Vec<bool>,
    constraints: Vec<Constraint<T>>,
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// Sensitivity of the optimal objective to each right-hand side.
    pub duals: Vec<T>,
    pub pivots: usize,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            objective: Vec::new(),
            free: Vec::new(),
            constraints: Vec::new(),
        }
    }

    /// Adds a variable with the given objective coefficient; returns its index.
    pub fn add_var(&mut self, cost: T, free: bool) -> usize {
        self.objective.push(cost);
        self.free.push(free);
        self.objective.len() - 1
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, T)>, relation: Relation, rhs: T) -> usize {
        debug_assert!(coeffs.iter().all(|(j, _)| *j < self.objective.len()));
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Column index of each variable after splitting free variables.
    fn split_columns(&self) -> (Vec<usize>, usize) {
        let mut map = Vec::with_capacity(self.free.len());
        let mut next = 0;
        for &f in &self.free {
            map.push(next);
            next += if f { 2 } else { 1 };
        }
        (map, next)
    }

    fn expand_row(&self, coeffs: &[(usize, T)], map: &[usize], width: usize) -> Vec<T> {
        let mut row = vec![T::zero(); width];
        for (j, v) in coeffs {
            let c = map[*j];
            row[c] = row[c].clone() + v.clone();
            if self.free[*j] {
                row[c + 1] = row[c + 1].clone() - v.clone();
            }
        }
        row
    }

    pub fn solve(&self) -> Result<LpSolution<T>, LpError> {
        let (map, ncols) = self.split_columns();
        let sign = match self.sense {
            Sense::Maximize => T::one(),
            Sense::Minimize => -T::one(),
        };
        let mut cost = vec![T::zero(); ncols];
        for (j, c) in self.objective.iter().enumerate() {
            cost[map[j]] = sign.clone() * c.clone();
            if self.free[j] {
                cost[map[j] + 1] = -(sign.clone() * c.clone());
            }
        }
        let rows: Vec<(Vec<T>, Relation, T)> = self
            .constraints
            .iter()
            .map(|c| (self.expand_row(&c.coeffs, &map, ncols), c.relation, c.rhs.clone()))
            .collect();
        let canonical_rows: usize = rows
            .iter()
            .map(|r| if r.1 == Relation::Eq { 2 } else { 1 })
            .sum();
        let (xs, value, ys, pivots) = if canonical_rows > 3 * (ncols + 1) {
            solve_via_dual(&rows, &cost)?
        } else {
            let t = Tableau::build(&rows, &cost);
            t.run()?
        };
        let x = (0..self.num_vars())
            .map(|j| {
                let c = map[j];
                if self.free[j] {
                    xs[c].clone() - xs[c + 1].clone()
                } else {
                    xs[c].clone()
                }
            })
            .collect();
        Ok(LpSolution {
            x,
            objective: sign.clone() * value,
            duals: ys.into_iter().map(|y| sign.clone() * y).collect(),
            pivots,
        })
    }
}

type RawSolution<T> = (Vec<T>, T, Vec<T>, usize);

/// Solves `max c x, rows, x >= 0` through `min b y, A^T y >= c, y >= 0`.
fn solve_via_dual<T: Scalar>(rows: &[(Vec<T>, Relation, T)], cost: &[T]) -> Result<RawSolution<T>, LpError> {
    // canonical `<=` rows with a back-reference to the original row and sign
    let mut canon: Vec<(usize, T, &Vec<T>, T)> = Vec::new();
    for (i, (a, rel, b)) in rows.iter().enumerate() {
        match rel {
            Relation::Le => canon.push((i, T::one(), a, b.clone())),
            Relation::Ge => canon.push((i, -T::one(), a, -b.clone())),
            Relation::Eq => {
                canon.push((i, T::one(), a, b.clone()));
                canon.push((i, -T::one(), a, -b.clone()));
            }
        }
    }
    let ncols = cost.len();
    let dual_cost: Vec<T> = canon.iter().map(|(_, _, _, b)| -b.clone()).collect();
    let dual_rows: Vec<(Vec<T>, Relation, T)> = (0..ncols)
        .map(|j| {
            let row = canon
                .iter()
                .map(|(_, s, a, _)| -(s.clone() * a[j].clone()))
                .collect();
            (row, Relation::Le, -cost[j].clone())
        })
        .collect();
    let (y, neg_value, x, pivots) = match Tableau::build(&dual_rows, &dual_cost).run() {
        Ok(sol) => sol,
        Err(LpError::Unbounded) => return Err(LpError::Infeasible),
        Err(LpError::Infeasible) => {
            // primal is unbounded or infeasible; the direct method decides
            return Tableau::build(rows, cost).run();
        }
        Err(e) => return Err(e),
    };
    let mut duals = vec![T::zero(); rows.len()];
    for (k, (i, s, _, _)) in canon.iter().enumerate() {
        duals[*i] = duals[*i].clone() + s.clone() * y[k].clone();
    }
    Ok((x, -neg_value, duals, pivots))
}

const DEGENERATE_SWITCH: usize = 64;

struct Tableau<T> {
    m: usize,
    ncols: usize,
    width: usize,
    /// `m` constraint rows, then the phase-2 row, then the phase-1 row.
    a: Vec<T>,
    basis: Vec<usize>,
    n_struct: usize,
    art_start: usize,
    /// Column holding the initial identity entry of each row.
    id_col: Vec<usize>,
    flipped: Vec<bool>,
    pivots: usize,
}

impl<T: Scalar> Tableau<T> {
    fn build(rows: &[(Vec<T>, Relation, T)], cost: &[T]) -> Self {
        let m = rows.len();
        let n = cost.len();
        let mut norm: Vec<(Vec<T>, Relation, T, bool)> = rows
            .iter()
            .map(|(a, rel, b)| {
                if *b < T::zero() {
                    let rel = match rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (a.iter().map(|v| -v.clone()).collect(), rel, -b.clone(), true)
                } else {
                    (a.clone(), *rel, b.clone(), false)
                }
            })
            .collect();
        let n_slack = norm.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = norm.iter().filter(|r| r.1 != Relation::Le).count();
        let art_start = n + n_slack;
        let ncols = art_start + n_art;
        let width = ncols + 1;
        let mut a = vec![T::zero(); (m + 2) * width];
        let mut basis = vec![0; m];
        let mut id_col = vec![0; m];
        let (mut next_slack, mut next_art) = (n, art_start);
        for (i, (row, rel, b, _)) in norm.iter_mut().enumerate() {
            let base = i * width;
            for (j, v) in row.drain(..).enumerate() {
                a[base + j] = v;
            }
            a[base + ncols] = b.clone();
            match rel {
                Relation::Le => {
                    a[base + next_slack] = T::one();
                    basis[i] = next_slack;
                    id_col[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    a[base + next_slack] = -T::one();
                    next_slack += 1;
                    a[base + next_art] = T::one();
                    basis[i] = next_art;
                    id_col[i] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    a[base + next_art] = T::one();
                    basis[i] = next_art;
                    id_col[i] = next_art;
                    next_art += 1;
                }
            }
        }
        let p2 = m * width;
        for j in 0..n {
            a[p2 + j] = -cost[j].clone();
        }
        let p1 = (m + 1) * width;
        for i in 0..m {
            if basis[i] >= art_start {
                for j in 0..width {
                    if j < art_start || j == ncols {
                        let v = a[p1 + j].clone() - a[i * width + j].clone();
                        a[p1 + j] = v;
                    }
                }
            }
        }
        Self {
            m,
            ncols,
            width,
            a,
            basis,
            n_struct: n,
            art_start,
            id_col,
            flipped: norm.iter().map(|r| r.3).collect(),
            pivots: 0,
        }
    }

    fn at(&self, i: usize, j: usize) -> &T {
        &self.a[i * self.width + j]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let piv = self.a[r * w + c].clone();
        for j in 0..w {
            let v = self.a[r * w + j].clone() / piv.clone();
            self.a[r * w + j] = v;
        }
        self.a[r * w + c] = T::one();
        let prow: Vec<T> = self.a[r * w..(r + 1) * w].to_vec();
        let nz: Vec<usize> = (0..w).filter(|&j| !prow[j].is_exact_zero()).collect();
        let update = |(i, row): (usize, &mut [T])| {
            if i == r {
                return;
            }
            let f = row[c].clone();
            if f.is_exact_zero() {
                return;
            }
            for &j in &nz {
                let v = row[j].clone() - f.clone() * prow[j].clone();
                row[j] = v.clean();
            }
            row[c] = T::zero();
        };
        self.a.chunks_mut(w).enumerate().for_each(update);
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Runs simplex on objective row `obj`; columns at or past `col_limit` never enter.
    fn optimize(&mut self, obj: usize, col_limit: usize) -> Result<(), LpError> {
        let tol = T::tol();
        let neg_tol = -tol.clone();
        let limit = 200 * (self.m + self.ncols) + 10_000;
        let mut degenerate = 0usize;
        for _ in 0..limit {
            let orow = obj * self.width;
            let bland = degenerate >= DEGENERATE_SWITCH;
            let mut enter: Option<usize> = None;
            for j in 0..col_limit {
                let d = &self.a[orow + j];
                if *d < neg_tol {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if enter.map_or(true, |e| *d < self.a[orow + e]) {
                        enter = Some(j);
                    }
                }
            }
            let Some(c) = enter else {
                return Ok(());
            };
            // Harris two-pass ratio test: bound the step with relaxed rows, then
            // take the largest pivot among rows that block within the bound
            let mut bound: Option<T> = None;
            for i in 0..self.m {
                let aic = self.at(i, c);
                if *aic > tol {
                    let relaxed = (self.at(i, self.ncols).clone() + tol.clone()) / aic.clone();
                    if bound.as_ref().map_or(true, |b| relaxed < *b) {
                        bound = Some(relaxed);
                    }
                }
            }
            let mut leave: Option<(usize, T)> = None;
            if let Some(bound) = bound {
                for i in 0..self.m {
                    let aic = self.at(i, c);
                    if *aic > tol {
                        let ratio = self.at(i, self.ncols).clone() / aic.clone();
                        if ratio > bound {
                            continue;
                        }
                        let better = match &leave {
                            None => true,
                            Some((l, best)) => {
                                if bland {
                                    ratio < *best || (!(ratio > *best) && self.basis[i] < self.basis[*l])
                                } else {
                                    let cur = self.at(*l, c);
                                    *aic > *cur || (!(*aic < *cur) && self.basis[i] < self.basis[*l])
                                }
                            }
                        };
                        if better {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(LpError::Unbounded);
            };
            if ratio > tol {
                degenerate = 0;
            } else {
                degenerate += 1;
            }
            self.pivot(r, c);
        }
        Err(LpError::IterationLimit)
    }

    fn run(mut self) -> Result<RawSolution<T>, LpError> {
        let m = self.m;
        if self.art_start < self.ncols {
            self.optimize(m + 1, self.art_start)?;
            let infeas = -self.at(m + 1, self.ncols).clone();
            let scale = (0..m)
                .map(|i| self.at(i, self.ncols).abs().to_f64())
                .fold(1.0, f64::max);
            if infeas > T::tol() * T::from_f64(scale) {
                return Err(LpError::Infeasible);
            }
            for i in 0..m {
                if self.basis[i] >= self.art_start {
                    let best = (0..self.art_start)
                        .filter(|&j| self.at(i, j).abs() > T::tol())
                        .max_by(|&x, &y| {
                            self.at(i, x)
                                .abs()
                                .partial_cmp(&self.at(i, y).abs())
                                .unwrap_or(std::cmp::Ordering::Equal)
                        });
                    if let Some(j) = best {
                        self.pivot(i, j);
                    }
                }
            }
        }
        self.optimize(m, self.art_start)?;
        let mut x = vec![T::zero(); self.n_struct];
        for i in 0..m {
            let b = self.basis[i];
            if b < self.n_struct {
                x[b] = self.at(i, self.ncols).clone();
            }
        }
        let duals = (0..m)
            .map(|i| {
                let y = self.at(m, self.id_col[i]).clone();
                if self.flipped[i] {
                    -y
                } else {
                    y
                }
            })
            .collect();
        let value = self.at(m, self.ncols).clone();
        Ok((x, value, duals, self.pivots))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_max() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::<f64>::new(Sense::Maximize);
        let x = lp.add_var(3.0, false);
        let y = lp.add_var(5.0, false);
        lp.add_constraint(vec![(x, 1.0)], Relation::Le, 4.0);
        lp.add_constraint(vec![(y, 2.0)], Relation::Le, 12.0);
        lp.add_constraint(vec![(x, 3.0), (y, 2.0)], Relation::Le, 18.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        // shadow prices 0, 3/2, 1
        assert!(s.duals[0].abs() < 1e-9);
        assert!((s.duals[1] - 1.5).abs() < 1e-9 && (s.duals[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn min_with_equality_and_free() {
        // min |t| style: min t s.t. t >= x - 3, t >= 3 - x, x = 1 (x free)
        let mut lp = LinearProgram::<f64>::new(Sense::Minimize);
        let t = lp.add_var(1.0, false);
        let x = lp.add_var(0.0, true);
        lp.add_constraint(vec![(t, 1.0), (x, -1.0)], Relation::Ge, -3.0);
        lp.add_constraint(vec![(t, 1.0), (x, 1.0)], Relation::Ge, 3.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Eq, 1.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 2.0).abs() < 1e-9);
        assert!((s.x[1] - 1.0).abs() < 1e-9);
        // raising the equality rhs lowers the objective one for one
        assert!((s.duals[2] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::<f64>::new(Sense::Maximize);
        let x = lp.add_var(1.0, false);
        lp.add_constraint(vec![(x, 1.0)], Relation::Ge, 2.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Le, 1.0);
        assert_eq!(lp.solve().unwrap_err(), LpError::Infeasible);
        let mut lp = LinearProgram::<f64>::new(Sense::Maximize);
        let x = lp.add_var(1.0, false);
        lp.add_constraint(vec![(x, 1.0)], Relation::Ge, 2.0);
        assert_eq!(lp.solve().unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn exact_rational_solve() {
        let mut lp = LinearProgram::<BigRational>::new(Sense::Maximize);
        let x = lp.add_var(rational(1, 1), false);
        let y = lp.add_var(rational(1, 1), false);
        lp.add_constraint(vec![(x, rational(3, 1)), (y, rational(1, 1))], Relation::Le, rational(1, 1));
        lp.add_constraint(vec![(x, rational(1, 1)), (y, rational(3, 1))], Relation::Le, rational(1, 1));
        let s = lp.solve().unwrap();
        assert_eq!(s.objective, rational(1, 2));
        assert_eq!(s.x, vec![rational(1, 4), rational(1, 4)]);
    }

    #[test]
    fn tall_program_goes_through_dual() {
        // min t s.t. |x_i - t_i| <= t for many points: Chebyshev center of values
        let vals: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let mut lp = LinearProgram::<f64>::new(Sense::Minimize);
        let t = lp.add_var(1.0, false);
        let c = lp.add_var(0.0, true);
        for v in &vals {
            lp.add_constraint(vec![(t, 1.0), (c, 1.0)], Relation::Ge, *v);
            lp.add_constraint(vec![(t, 1.0), (c, -1.0)], Relation::Ge, -*v);
        }
        let s = lp.solve().unwrap();
        assert!((s.objective - 5.0).abs() < 1e-9);
        assert!((s.x[1] - 5.0).abs() < 1e-9);
        let total: f64 = s.duals.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}
