//! Minimax polynomial and rational approximation, sign-representation,
//! symmetrization, and the univariate reduction for master halfspaces.
//!
//! Boolean inputs are bitmasks with bit `j` holding `x_{j+1}`. Polynomial
//! coefficients are listed over [`monomials_up_to`] (graded-lex).

use crate::discrepancy::IntegerMultiset;
use crate::distribution::{element_residues, FoolingFamily};
use crate::lp::{rational, LinearProgram, LpError, Relation, Sense};
use crate::poly::{binomial, monomial_count, monomials_up_to, mobius_i64, Monomial, MultilinearPoly, UniPoly, UniRational};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApproxError {
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("invalid function table: {0}")]
    BadTable(String),
    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
    #[error("differential correction did not converge (best error {})", best.error)]
    NoConvergence { best: Box<ApproxResult> },
    #[error("approximation errors sum to {0}, need < 1")]
    ErrorBudgetExceeded(f64),
    #[error("denominator vanishes at input {0:#b}")]
    DenominatorVanishes(u32),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
}

pub const MAX_VARS: usize = 16;
/// Cap on `(rows + 2) * (columns + rows)` for a single dense tableau.
const MAX_TABLEAU: usize = 40_000_000;
const MAX_POINTS: usize = 4000;

fn check_tableau(rows: usize, cols: usize, what: &str) -> Result<(), ApproxError> {
    let cells = (rows + 2).saturating_mul(cols + rows + 1);
    if cells > MAX_TABLEAU {
        return Err(ApproxError::TooLarge(format!("{what}: {rows} x {cols} program")));
    }
    Ok(())
}

/// A (possibly partial) Boolean function `{0,1}^n -> {-1,+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BooleanFunctionTable {
    n: usize,
    values: Vec<i8>,
    domain: Option<Vec<bool>>,
}

impl BooleanFunctionTable {
    pub fn new(n: usize, values: Vec<i8>) -> Result<Self, ApproxError> {
        Self::build(n, values, None)
    }

    /// Values outside `domain` are ignored (stored as +1).
    pub fn partial(n: usize, values: Vec<i8>, domain: Vec<bool>) -> Result<Self, ApproxError> {
        Self::build(n, values, Some(domain))
    }

    fn build(n: usize, mut values: Vec<i8>, domain: Option<Vec<bool>>) -> Result<Self, ApproxError> {
        if n > MAX_VARS {
            return Err(ApproxError::TooLarge(format!("{n} variables, at most {MAX_VARS}")));
        }
        if values.len() != 1 << n {
            return Err(ApproxError::BadTable(format!("expected {} values, got {}", 1usize << n, values.len())));
        }
        if let Some(d) = &domain {
            if d.len() != values.len() {
                return Err(ApproxError::BadTable("domain mask length mismatch".into()));
            }
            if !d.iter().any(|&b| b) {
                return Err(ApproxError::BadTable("empty domain".into()));
            }
            for (v, &inside) in values.iter_mut().zip(d) {
                if !inside {
                    *v = 1;
                }
            }
        }
        if let Some(bad) = values.iter().find(|&&v| v != 1 && v != -1) {
            return Err(ApproxError::BadTable(format!("value {bad} is not +1 or -1")));
        }
        let domain = domain.filter(|d| !d.iter().all(|&b| b));
        Ok(BooleanFunctionTable { n, values, domain })
    }

    pub fn from_fn(n: usize, f: impl FnMut(u32) -> i8) -> Result<Self, ApproxError> {
        if n > MAX_VARS {
            return Err(ApproxError::TooLarge(format!("{n} variables, at most {MAX_VARS}")));
        }
        Self::new(n, (0..1u32 << n).map(f).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn is_total(&self) -> bool {
        self.domain.is_none()
    }

    pub fn in_domain(&self, x: u32) -> bool {
        self.domain.as_ref().map_or(true, |d| d[x as usize])
    }

    pub fn value(&self, x: u32) -> Option<i8> {
        self.in_domain(x).then(|| self.values[x as usize])
    }

    pub fn domain_points(&self) -> Vec<u32> {
        (0..1u32 << self.n).filter(|&x| self.in_domain(x)).collect()
    }

    /// One value per line; `*` marks a point outside the domain; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ApproxError> {
        let mut values = Vec::new();
        let mut domain = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "1" | "+1" => {
                    values.push(1);
                    domain.push(true);
                }
                "-1" => {
                    values.push(-1);
                    domain.push(true);
                }
                "*" => {
                    values.push(1);
                    domain.push(false);
                }
                other => {
                    return Err(ApproxError::BadTable(format!("line {}: unexpected {other:?}", lineno + 1)));
                }
            }
        }
        if values.is_empty() || !values.len().is_power_of_two() {
            return Err(ApproxError::BadTable(format!("{} values is not a power of two", values.len())));
        }
        let n = values.len().trailing_zeros() as usize;
        Self::partial(n, values, domain)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 3);
        for x in 0..self.values.len() as u32 {
            out.push_str(match self.value(x) {
                Some(1) => "1\n",
                Some(_) => "-1\n",
                None => "*\n",
            });
        }
        out
    }

    pub fn constant(n: usize, v: i8) -> Result<Self, ApproxError> {
        Self::from_fn(n, |_| v)
    }

    /// `-sign(|x| - n/2 - 1/4)`: -1 exactly when more than half the bits are set.
    pub fn majority(n: usize) -> Result<Self, ApproxError> {
        Self::from_fn(n, |x| if 2 * x.count_ones() as usize > n { -1 } else { 1 })
    }

    /// `(-1)^{x_1 + ... + x_n}`.
    pub fn parity(n: usize) -> Result<Self, ApproxError> {
        Self::from_fn(n, |x| if x.count_ones() % 2 == 1 { -1 } else { 1 })
    }

    /// `sign(1 + sum_i (-2)^i x_i)`.
    pub fn omb(n: usize) -> Result<Self, ApproxError> {
        Self::from_fn(n, |x| {
            let s: i64 = 1 + (1..=n).filter(|i| x >> (i - 1) & 1 == 1).map(|i| (-2i64).pow(i as u32)).sum::<i64>();
            if s > 0 {
                1
            } else {
                -1
            }
        })
    }

    /// `sign(sum_i w_i x_i - theta2 / 2)`, which must never be zero.
    pub fn halfspace(weights: &[i64], theta2: i64) -> Result<Self, ApproxError> {
        let n = weights.len();
        let mut zero_at = None;
        let t = Self::from_fn(n, |x| {
            let s: i64 = 2 * (0..n).filter(|j| x >> j & 1 == 1).map(|j| weights[j]).sum::<i64>() - theta2;
            if s == 0 {
                zero_at.get_or_insert(x);
            }
            if s > 0 {
                1
            } else {
                -1
            }
        })?;
        match zero_at {
            Some(x) => Err(ApproxError::BadTable(format!("halfspace argument vanishes at {x:#b}"))),
            None => Ok(t),
        }
    }

    /// `f AND g` on `n_f + n_g` variables (`-1` is true); `g` reads the high bits.
    pub fn and(f: &Self, g: &Self) -> Result<Self, ApproxError> {
        let n = f.n + g.n;
        if n > MAX_VARS {
            return Err(ApproxError::TooLarge(format!("{n} variables")));
        }
        let lo = (1u32 << f.n) - 1;
        let mut values = Vec::with_capacity(1 << n);
        let mut domain = Vec::with_capacity(1 << n);
        for xy in 0..1u32 << n {
            let (x, y) = (xy & lo, xy >> f.n);
            let both = f.values[x as usize] == -1 && g.values[y as usize] == -1;
            values.push(if both { -1 } else { 1 });
            domain.push(f.in_domain(x) && g.in_domain(y));
        }
        Self::partial(n, values, domain)
    }
}

/// Basis in which an [`ApproxResult`] lists its coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Basis {
    /// Multilinear monomials in `n` variables, graded-lex.
    Multilinear { n: usize },
    /// Chebyshev polynomials `T_k(t / scale)`.
    Chebyshev { scale: f64 },
    /// Caller-supplied basis functions.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxResult {
    pub d0: usize,
    pub d1: usize,
    pub error: f64,
    pub basis: Basis,
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
    /// Signed weights on the domain points, orthogonal to the approximating space.
    pub dual_certificate: Option<Vec<f64>>,
    /// Certified lower bound on the optimal error.
    pub lower_bound: Option<f64>,
}

impl ApproxResult {
    pub fn numerator_poly(&self) -> Option<MultilinearPoly> {
        match self.basis {
            Basis::Multilinear { n } => Some(MultilinearPoly::from_coeffs(n, &monomials_up_to(n, self.d0), &self.numerator)),
            _ => None,
        }
    }

    pub fn denominator_poly(&self) -> Option<MultilinearPoly> {
        match self.basis {
            Basis::Multilinear { n } => Some(MultilinearPoly::from_coeffs(n, &monomials_up_to(n, self.d1), &self.denominator)),
            _ => None,
        }
    }

    /// The univariate rational function in the power basis of `t`.
    pub fn univariate(&self) -> Option<UniRational> {
        match self.basis {
            Basis::Chebyshev { scale } => Some(UniRational {
                num: chebyshev_to_power(&self.numerator, scale),
                den: chebyshev_to_power(&self.denominator, scale),
            }),
            _ => None,
        }
    }

    pub fn eval_univariate(&self, t: f64) -> Option<f64> {
        match self.basis {
            Basis::Chebyshev { scale } => {
                let u = t / scale;
                Some(clenshaw(&self.numerator, u) / clenshaw(&self.denominator, u))
            }
            _ => None,
        }
    }
}

/// `sum_k c_k T_k(u)`.
pub fn clenshaw(c: &[f64], u: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = ck + 2.0 * u * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c.first().copied().unwrap_or(0.0) + u * b1 - b2
}

fn chebyshev_to_power(c: &[f64], scale: f64) -> UniPoly {
    let u = UniPoly::new(vec![0.0, 1.0 / scale]);
    let (mut prev, mut cur) = (UniPoly::constant(1.0), u.clone());
    let mut out = UniPoly::constant(c.first().copied().unwrap_or(0.0));
    for &ck in c.iter().skip(1) {
        out = out.add(&cur.scale(ck));
        let next = u.mul(&cur).scale(2.0).add(&prev.scale(-1.0));
        prev = cur;
        cur = next;
    }
    out
}

/// Values of `sum_A c_A x^A` at every point of {0,1}^n.
fn eval_table(n: usize, monos: &[Monomial], coeffs: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; 1 << n];
    for (&a, &c) in monos.iter().zip(coeffs) {
        v[a as usize] += c;
    }
    for j in 0..n {
        for x in 0..v.len() {
            if x >> j & 1 == 1 {
                v[x] += v[x ^ (1 << j)];
            }
        }
    }
    v
}

/// Best uniform approximation of `targets` from the span of the basis rows.
///
/// Solves `max sum_i f_i psi_i` over `||psi||_1 <= 1`, `psi` orthogonal to every
/// basis function; the coefficients are the multipliers of the orthogonality rows.
fn minimax_linear(rows: &[Vec<f64>], targets: &[f64]) -> Result<(Vec<f64>, f64, Vec<f64>), ApproxError> {
    let k = rows.first().map_or(0, |r| r.len());
    let npts = rows.len();
    check_tableau(k + 1, 2 * npts, "minimax")?;
    let mut lp = LinearProgram::<f64>::new(Sense::Maximize);
    let mut cols = Vec::with_capacity(npts);
    for &f in targets {
        let u = lp.add_var(f, false);
        let v = lp.add_var(-f, false);
        cols.push((u, v));
    }
    for a in 0..k {
        let coeffs = cols
            .iter()
            .zip(rows)
            .filter(|(_, r)| r[a] != 0.0)
            .flat_map(|(&(u, v), r)| [(u, r[a]), (v, -r[a])])
            .collect();
        lp.add_constraint(coeffs, Relation::Eq, 0.0);
    }
    let norm = cols.iter().flat_map(|&(u, v)| [(u, 1.0), (v, 1.0)]).collect();
    lp.add_constraint(norm, Relation::Le, 1.0);
    let sol = lp.solve()?;
    let psi: Vec<f64> = cols.iter().map(|&(u, v)| sol.x[u] - sol.x[v]).collect();
    let eval = |sign: f64| -> f64 {
        rows.iter()
            .zip(targets)
            .map(|(r, f)| (f - sign * r.iter().zip(&sol.duals[..k]).map(|(a, b)| a * b).sum::<f64>()).abs())
            .fold(0.0, f64::max)
    };
    // multipliers are defined up to the sign convention of the equality rows
    let (ep, em) = (eval(1.0), eval(-1.0));
    let sign = if ep <= em { 1.0 } else { -1.0 };
    let coeffs = sol.duals[..k].iter().map(|c| sign * c).collect();
    Ok((coeffs, sol.objective, psi))
}

/// `E(f, d)` with its optimal polynomial and a dual certificate.
pub fn minimax_poly(f: &BooleanFunctionTable, d: usize) -> Result<ApproxResult, ApproxError> {
    let n = f.n;
    if d > n {
        return Err(ApproxError::PreconditionViolated(format!("degree {d} exceeds {n} variables")));
    }
    let monos = monomials_up_to(n, d);
    if d == n {
        // Moebius inversion of the table interpolates exactly; integer arithmetic
        let coeffs = mobius_i64(&f.values.iter().map(|&v| v as i64).collect::<Vec<_>>());
        let numerator: Vec<f64> = monos.iter().map(|&a| coeffs[a as usize] as f64).collect();
        return Ok(ApproxResult {
            d0: d,
            d1: 0,
            error: 0.0,
            basis: Basis::Multilinear { n },
            numerator,
            denominator: vec![1.0],
            dual_certificate: None,
            lower_bound: Some(0.0),
        });
    }
    let pts = f.domain_points();
    let rows: Vec<Vec<f64>> = pts
        .iter()
        .map(|&x| monos.iter().map(|&a| if a & x == a { 1.0 } else { 0.0 }).collect())
        .collect();
    let targets: Vec<f64> = pts.iter().map(|&x| f.values[x as usize] as f64).collect();
    let (coeffs, dual_value, psi) = minimax_linear(&rows, &targets)?;
    let table = eval_table(n, &monos, &coeffs);
    let error = pts
        .iter()
        .map(|&x| (f.values[x as usize] as f64 - table[x as usize]).abs())
        .fold(0.0, f64::max);
    Ok(ApproxResult {
        d0: d,
        d1: 0,
        error,
        basis: Basis::Multilinear { n },
        numerator: coeffs,
        denominator: vec![1.0],
        dual_certificate: Some(psi),
        lower_bound: Some(dual_value),
    })
}

/// Lower bound `|<psi, f>| / ||psi||_1` proven by a certificate, or `None` if
/// `psi` is not orthogonal to the degree-`d` monomials within `tol`.
pub fn certificate_lower_bound(f: &BooleanFunctionTable, d: usize, psi: &[f64], tol: f64) -> Option<f64> {
    let pts = f.domain_points();
    if psi.len() != pts.len() {
        return None;
    }
    let l1: f64 = psi.iter().map(|v| v.abs()).sum();
    if l1 == 0.0 {
        return None;
    }
    let orthogonal = monomials_up_to(f.n, d).iter().all(|&a| {
        let s: f64 = pts.iter().zip(psi).filter(|(&x, _)| a & x == a).map(|(_, w)| w).sum();
        s.abs() <= tol * l1
    });
    orthogonal.then(|| pts.iter().zip(psi).map(|(&x, w)| f.values[x as usize] as f64 * w).sum::<f64>().abs() / l1)
}

/// A polynomial `p` with `f(x) = sign p(x)` on the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignRepresentation {
    pub n: usize,
    pub degree: usize,
    /// Over `monomials_up_to(n, degree)`.
    pub coefficients: Vec<f64>,
    /// `min_x f(x) p(x)` over the domain.
    pub margin: f64,
    /// Nonnegative weights `psi` with `sum psi = 1` and `psi * f` orthogonal to
    /// every monomial of degree below `degree`.
    pub lower_certificate: Option<Vec<f64>>,
    /// Whether the certificate came from an exact solve and the witness margin is not marginal.
    pub exact: bool,
}

impl SignRepresentation {
    pub fn poly(&self) -> MultilinearPoly {
        MultilinearPoly::from_coeffs(self.n, &monomials_up_to(self.n, self.degree), &self.coefficients)
    }
}

const EXACT_MAX_N: usize = 10;
const EXACT_MAX_CELLS: usize = 400_000;
const MARGIN_FLOOR: f64 = 1e-5;

fn sign_lp_f64(f: &BooleanFunctionTable, monos: &[Monomial]) -> Result<Option<Vec<f64>>, ApproxError> {
    let pts = f.domain_points();
    check_tableau(pts.len().min(2 * monos.len()), pts.len().max(2 * monos.len()), "sign-representation")?;
    let mut lp = LinearProgram::<f64>::new(Sense::Minimize);
    let vars: Vec<usize> = monos.iter().map(|_| lp.add_var(0.0, true)).collect();
    for &x in &pts {
        let fx = f.values[x as usize] as f64;
        let row = monos.iter().zip(&vars).filter(|(&a, _)| a & x == a).map(|(_, &v)| (v, fx)).collect();
        lp.add_constraint(row, Relation::Ge, 1.0);
    }
    match lp.solve() {
        Ok(s) => Ok(Some(s.x)),
        Err(LpError::Infeasible) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn sign_lp_exact(f: &BooleanFunctionTable, monos: &[Monomial]) -> Result<Option<Vec<BigRational>>, ApproxError> {
    let mut lp = LinearProgram::<BigRational>::new(Sense::Minimize);
    let vars: Vec<usize> = monos.iter().map(|_| lp.add_var(BigRational::zero(), true)).collect();
    for x in f.domain_points() {
        let fx = rational(f.values[x as usize] as i64, 1);
        let row = monos.iter().zip(&vars).filter(|(&a, _)| a & x == a).map(|(_, &v)| (v, fx.clone())).collect();
        lp.add_constraint(row, Relation::Ge, rational(1, 1));
    }
    match lp.solve() {
        Ok(s) => Ok(Some(s.x)),
        Err(LpError::Infeasible) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Farkas weights proving that no polynomial over `monos` sign-represents `f`.
fn farkas_f64(f: &BooleanFunctionTable, monos: &[Monomial]) -> Result<Option<Vec<f64>>, ApproxError> {
    let pts = f.domain_points();
    check_tableau(monos.len() + 1, pts.len(), "infeasibility certificate")?;
    let mut lp = LinearProgram::<f64>::new(Sense::Minimize);
    let vars: Vec<usize> = pts.iter().map(|_| lp.add_var(0.0, false)).collect();
    for &a in monos {
        let row = pts
            .iter()
            .zip(&vars)
            .filter(|(&x, _)| a & x == a)
            .map(|(&x, &v)| (v, f.values[x as usize] as f64))
            .collect();
        lp.add_constraint(row, Relation::Eq, 0.0);
    }
    lp.add_constraint(vars.iter().map(|&v| (v, 1.0)).collect(), Relation::Eq, 1.0);
    match lp.solve() {
        Ok(s) => Ok(Some(s.x)),
        Err(LpError::Infeasible) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn farkas_exact(f: &BooleanFunctionTable, monos: &[Monomial]) -> Result<Option<Vec<BigRational>>, ApproxError> {
    let pts = f.domain_points();
    let mut lp = LinearProgram::<BigRational>::new(Sense::Minimize);
    let vars: Vec<usize> = pts.iter().map(|_| lp.add_var(BigRational::zero(), false)).collect();
    for &a in monos {
        let row = pts
            .iter()
            .zip(&vars)
            .filter(|(&x, _)| a & x == a)
            .map(|(&x, &v)| (v, rational(f.values[x as usize] as i64, 1)))
            .collect();
        lp.add_constraint(row, Relation::Eq, BigRational::zero());
    }
    lp.add_constraint(vars.iter().map(|&v| (v, rational(1, 1))).collect(), Relation::Eq, rational(1, 1));
    match lp.solve() {
        Ok(s) => Ok(Some(s.x)),
        Err(LpError::Infeasible) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn exact_ok(n: usize, rows: usize, cols: usize) -> bool {
    n <= EXACT_MAX_N && (rows + 2) * (cols + rows + 1) <= EXACT_MAX_CELLS
}

/// Smallest-degree sign-representation, with a Farkas certificate one degree below.
pub fn threshold_degree(f: &BooleanFunctionTable) -> Result<SignRepresentation, ApproxError> {
    let n = f.n;
    if n > 14 {
        return Err(ApproxError::TooLarge(format!("{n} variables, at most 14")));
    }
    let npts = f.domain_points().len();
    for d in 0..=n {
        let monos = monomials_up_to(n, d);
        let mut exact = true;
        let witness = match sign_lp_f64(f, &monos)? {
            Some(c) => {
                let table = eval_table(n, &monos, &c);
                let l1: f64 = c.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
                let margin = f.domain_points().iter().map(|&x| f.values[x as usize] as f64 * table[x as usize]).fold(f64::INFINITY, f64::min);
                if margin / l1 < MARGIN_FLOOR && exact_ok(n, npts, monos.len()) {
                    sign_lp_exact(f, &monos)?.map(|c| c.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
                } else if margin > 0.0 {
                    exact &= margin / l1 >= MARGIN_FLOOR;
                    Some(c)
                } else {
                    None
                }
            }
            None => None,
        };
        let Some(coefficients) = witness else { continue };
        let table = eval_table(n, &monos, &coefficients);
        let margin = f.domain_points().iter().map(|&x| f.values[x as usize] as f64 * table[x as usize]).fold(f64::INFINITY, f64::min);
        let lower_certificate = if d == 0 {
            None
        } else {
            let below = monomials_up_to(n, d - 1);
            if exact_ok(n, below.len() + 1, npts) {
                match farkas_exact(f, &below)? {
                    Some(psi) => Some(psi.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()),
                    None => {
                        exact = false;
                        farkas_f64(f, &below)?
                    }
                }
            } else {
                exact = false;
                farkas_f64(f, &below)?
            }
        };
        return Ok(SignRepresentation { n, degree: d, coefficients, margin, lower_certificate, exact });
    }
    Err(ApproxError::PreconditionViolated("no sign-representation found up to full degree".into()))
}

/// Checks a Farkas certificate against every monomial of degree `< degree`.
pub fn verify_lower_certificate(f: &BooleanFunctionTable, degree: usize, psi: &[f64], tol: f64) -> bool {
    let pts = f.domain_points();
    if degree == 0 || psi.len() != pts.len() || psi.iter().any(|&w| w < -tol) {
        return false;
    }
    if ((psi.iter().sum::<f64>()) - 1.0).abs() > tol {
        return false;
    }
    monomials_up_to(f.n, degree - 1).iter().all(|&a| {
        let s: f64 = pts
            .iter()
            .zip(psi)
            .filter(|(&x, _)| a & x == a)
            .map(|(&x, w)| w * f.values[x as usize] as f64)
            .sum();
        s.abs() <= tol
    })
}

/// Outcome of a threshold-density search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityResult {
    /// `family[i]` is the subset mask of the `i`-th parity.
    Exact { size: usize, family: Vec<u32>, weights: Vec<f64> },
    /// Every family of size at most `searched` fails.
    LowerBoundOnly { searched: usize },
}

const DENSITY_LP_BUDGET: u64 = 250_000;

fn parity_sign(s: u32, x: u32) -> f64 {
    if (s & x).count_ones() % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Fewest parities whose weighted sum sign-represents `f`, searching sizes up to `cap`.
pub fn threshold_density(f: &BooleanFunctionTable, cap: usize) -> Result<DensityResult, ApproxError> {
    let n = f.n;
    if n > 5 {
        return Err(ApproxError::TooLarge(format!("{n} variables, at most 5")));
    }
    let pts = f.domain_points();
    let universe = 1usize << n;
    let mut spent = 0u64;
    for k in 1..=cap.min(universe) {
        let count = binomial(universe as u64, k as u64);
        if spent as f64 + count > DENSITY_LP_BUDGET as f64 {
            return Ok(DensityResult::LowerBoundOnly { searched: k - 1 });
        }
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            spent += 1;
            let family: Vec<u32> = idx.iter().map(|&i| i as u32).collect();
            let mut lp = LinearProgram::<f64>::new(Sense::Minimize);
            let vars: Vec<usize> = family.iter().map(|_| lp.add_var(0.0, true)).collect();
            for &x in &pts {
                let fx = f.values[x as usize] as f64;
                let row = family.iter().zip(&vars).map(|(&s, &v)| (v, fx * parity_sign(s, x))).collect();
                lp.add_constraint(row, Relation::Ge, 1.0);
            }
            match lp.solve() {
                Ok(sol) => {
                    return Ok(DensityResult::Exact { size: k, family, weights: sol.x });
                }
                Err(LpError::Infeasible) => {}
                Err(e) => return Err(e.into()),
            }
            let mut i = k;
            while i > 0 && idx[i - 1] == universe - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    Ok(DensityResult::LowerBoundOnly { searched: cap.min(universe) })
}

/// `s(t) = 2 B_d(t/(2N) + 1/2) - 1` with `B_d(u) = P[Bin(d, u) >= ceil(d/2)]`, `d` odd.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuhrmanPoly {
    pub big_n: f64,
    pub degree: usize,
    pub grid_error: f64,
}

const BUHRMAN_MAX_DEGREE: usize = 1 << 22;

impl BuhrmanPoly {
    pub fn eval(&self, t: f64) -> f64 {
        buhrman_eval(self.degree, self.big_n, t)
    }

    /// Power-basis coefficients in `t`, for small degrees only.
    pub fn coefficients(&self) -> Option<UniPoly> {
        if self.degree > 60 {
            return None;
        }
        let d = self.degree as u64;
        // B_d(u) = sum_i C(d,i) u^i (1-u)^{d-i} with u = t/(2N) + 1/2
        let u = UniPoly::new(vec![0.5, 1.0 / (2.0 * self.big_n)]);
        let one_minus = UniPoly::new(vec![0.5, -1.0 / (2.0 * self.big_n)]);
        let pow = |p: &UniPoly, k: u64| (0..k).fold(UniPoly::constant(1.0), |acc, _| acc.mul(p));
        let b = (d.div_ceil(2)..=d).fold(UniPoly::constant(0.0), |acc, i| {
            acc.add(&pow(&u, i).mul(&pow(&one_minus, d - i)).scale(binomial(d, i)))
        });
        Some(b.scale(2.0).add(&UniPoly::constant(-1.0)))
    }
}

fn ln_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn buhrman_eval(d: usize, big_n: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let u = t.abs() / (2.0 * big_n) + 0.5;
    // P[Bin(d, u) <= floor(d/2)] with u >= 1/2, all terms computed in log space
    let tail = if u >= 1.0 {
        0.0
    } else {
        let (lu, lv) = (u.ln(), (1.0 - u).ln());
        let mut lc = 0.0;
        let mut terms = Vec::with_capacity(d / 2 + 1);
        for i in 0..=d / 2 {
            terms.push(lc + i as f64 * lu + (d - i) as f64 * lv);
            lc += ((d - i) as f64).ln() - ((i + 1) as f64).ln();
        }
        ln_sum_exp(&terms).exp()
    };
    t.signum() * (1.0 - 2.0 * tail)
}

/// Integer grid `{1, ..., floor N}` plus `N` itself.
fn positive_integer_grid(big_n: f64) -> Vec<f64> {
    let top = big_n.floor() as u64;
    let mut g: Vec<f64> = (1..=top).map(|k| k as f64).collect();
    if big_n > top as f64 {
        g.push(big_n);
    }
    g
}

/// Smallest odd `d` whose Buhrman approximant is within `eps` of sign on the grid.
pub fn buhrman_sign_poly(big_n: f64, eps: f64) -> Result<BuhrmanPoly, ApproxError> {
    if !(big_n > 1.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(ApproxError::PreconditionViolated("need N > 1 and 0 < eps < 1".into()));
    }
    let grid = positive_integer_grid(big_n);
    // odd symmetry: the positive half of the grid decides the error
    let err = |d: usize| grid.iter().map(|&t| (1.0 - buhrman_eval(d, big_n, t)).abs()).fold(0.0, f64::max);
    let mut lo = 0usize;
    let mut hi = 1usize;
    while err(hi) > eps {
        lo = hi;
        hi = 2 * hi + 1;
        if hi > BUHRMAN_MAX_DEGREE {
            return Err(ApproxError::TooLarge(format!("degree above {BUHRMAN_MAX_DEGREE}")));
        }
    }
    // error is nonincreasing over odd degrees; bisect on (lo, hi]
    while hi - lo > 2 {
        let mid = lo + 2 * ((hi - lo) / 4).max(1);
        let mid = if mid % 2 == 0 { mid + 1 } else { mid };
        if mid >= hi {
            break;
        }
        if err(mid) <= eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(BuhrmanPoly { big_n, degree: hi, grid_error: err(hi) })
}

/// Odd rational approximant `c (A(x) - A(-x)) / (A(x) + A(-x))` of sign on `[1, N]`.
///
/// `A` has double roots at `-N^{(2j-1)/d}` for `j = 1..floor(d/2)` and, for odd
/// `d`, a simple root at `-N`. Every point of `[1, N]` is then within a factor
/// `N^{1/d}` of a root, which keeps the error below `1 - N^{-1/d}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewmanRational {
    pub big_n: f64,
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub scale: f64,
    pub grid_error: f64,
    pub bound: f64,
}

impl NewmanRational {
    fn base(&self, x: f64) -> f64 {
        let ax = x.abs();
        let rho: f64 = self.nodes.iter().map(|&a| (a - ax) / (a + ax)).product();
        x.signum() * (1.0 - rho) / (1.0 + rho)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.scale * self.base(x)
    }

    /// Expanded numerator and denominator.
    pub fn to_rational(&self) -> UniRational {
        let a = self.nodes.iter().fold(UniPoly::constant(1.0), |acc, &r| acc.mul(&UniPoly::new(vec![r, 1.0])));
        let neg = a.reflect();
        UniRational { num: a.add(&neg.scale(-1.0)).scale(self.scale), den: a.add(&neg) }
    }

    /// Evaluation grid: `{1..floor N} U {N}` and 100 log-spaced reals, both signs.
    pub fn grid(big_n: f64) -> Vec<f64> {
        let mut g = positive_integer_grid(big_n);
        g.extend((0..100).map(|i| big_n.powf(i as f64 / 99.0)));
        let neg: Vec<f64> = g.iter().map(|t| -t).collect();
        g.extend(neg);
        g
    }
}

pub fn newman_rational_sign(big_n: f64, d: usize) -> Result<NewmanRational, ApproxError> {
    if !(big_n > 1.0) || d == 0 {
        return Err(ApproxError::PreconditionViolated("need N > 1 and d >= 1".into()));
    }
    let s = big_n.powf(1.0 / d as f64);
    let mut nodes = Vec::with_capacity(d);
    for j in 1..=d / 2 {
        let a = s.powi(2 * j as i32 - 1);
        nodes.push(a);
        nodes.push(a);
    }
    if d % 2 == 1 {
        nodes.push(big_n);
    }
    let mut r = NewmanRational { big_n, degree: d, nodes, scale: 1.0, grid_error: 0.0, bound: 1.0 - 1.0 / s };
    let grid = NewmanRational::grid(big_n);
    let lo = grid.iter().filter(|&&t| t > 0.0).map(|&t| r.base(t)).fold(f64::INFINITY, f64::min);
    // base values lie in [lo, 1]; centre them around 1
    r.scale = 2.0 / (1.0 + lo);
    r.grid_error = grid.iter().map(|&t| (t.signum() - r.eval(t)).abs()).fold(0.0, f64::max);
    Ok(r)
}

/// Best rational approximation over explicit basis evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFit {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
    pub error: f64,
    pub lower_bound: f64,
    pub dual_certificate: Option<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

const DC_MAX_ITER: usize = 200;
const CERT_GAP: f64 = 2e-7;
const CERT_SLACK: f64 = 1e-6;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn fit_error(num: &[Vec<f64>], den: &[Vec<f64>], targets: &[f64], a: &[f64], b: &[f64]) -> Option<f64> {
    let mut worst = 0.0f64;
    for i in 0..targets.len() {
        let q = dot(&den[i], b);
        if !(q > 0.0) {
            return None;
        }
        worst = worst.max((targets[i] - dot(&num[i], a) / q).abs());
    }
    Some(worst)
}

/// One differential-correction program at level `level`, rows scaled by the
/// current denominator `q_k`: minimise `delta` subject to
/// `|f q - p| - level q <= delta q_k` and `|b_j| <= 1`.
///
/// With `certify`, the box is replaced by `q >= q_k` pointwise (any positive `q`
/// rescales into it), so a positive optimum rules out every fit below `level`.
fn dc_step(
    num: &[Vec<f64>],
    den: &[Vec<f64>],
    targets: &[f64],
    bk: &[f64],
    level: f64,
    certify: bool,
) -> Result<Option<(f64, Vec<f64>, Vec<f64>)>, ApproxError> {
    let (k0, k1) = (num[0].len(), den[0].len());
    let mut lp = LinearProgram::<f64>::new(Sense::Minimize);
    let av: Vec<usize> = (0..k0).map(|_| lp.add_var(0.0, true)).collect();
    let bv: Vec<usize> = (0..k1).map(|_| lp.add_var(0.0, true)).collect();
    let dv = lp.add_var(1.0, true);
    for i in 0..targets.len() {
        let f = targets[i];
        let w = 1.0 / dot(&den[i], bk);
        for sgn in [1.0, -1.0] {
            let row = bv
                .iter()
                .zip(&den[i])
                .map(|(&v, &c)| (v, (sgn * f - level) * c * w))
                .chain(av.iter().zip(&num[i]).map(|(&v, &c)| (v, -sgn * c * w)))
                .chain(std::iter::once((dv, -1.0)))
                .collect();
            lp.add_constraint(row, Relation::Le, 0.0);
        }
        if certify {
            lp.add_constraint(bv.iter().zip(&den[i]).map(|(&v, &c)| (v, c * w)).collect(), Relation::Ge, 1.0);
        }
    }
    if certify {
        lp.add_constraint(vec![(dv, 1.0)], Relation::Ge, -1.0);
    } else {
        for &v in &bv {
            lp.add_constraint(vec![(v, 1.0)], Relation::Le, 1.0);
            lp.add_constraint(vec![(v, 1.0)], Relation::Ge, -1.0);
        }
    }
    match lp.solve() {
        Ok(sol) => Ok(Some((sol.objective, av.iter().map(|&v| sol.x[v]).collect(), bv.iter().map(|&v| sol.x[v]).collect()))),
        // the program is bounded; these outcomes only arise from rounding
        Err(LpError::Unbounded | LpError::IterationLimit) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Differential correction on a finite point set.
///
/// `num[i]` and `den[i]` are the basis values at point `i`; the first denominator
/// basis function must be the constant 1. The lower bound comes from a
/// correction program with a nonnegative optimum just below the returned error.
pub fn rational_minimax_basis(num: &[Vec<f64>], den: &[Vec<f64>], targets: &[f64]) -> Result<RationalFit, ApproxError> {
    let npts = targets.len();
    if npts == 0 || num.len() != npts || den.len() != npts {
        return Err(ApproxError::PreconditionViolated("basis rows must match the targets".into()));
    }
    let k1 = den[0].len();
    let (poly, poly_value, psi) = minimax_linear(num, targets)?;
    let mut a = poly;
    let mut b = vec![0.0; k1];
    b[0] = 1.0;
    let mut delta = fit_error(num, den, targets, &a, &b).unwrap_or(f64::INFINITY);
    if k1 == 1 {
        return Ok(RationalFit {
            numerator: a,
            denominator: b,
            error: delta,
            lower_bound: poly_value,
            dual_certificate: Some(psi),
            iterations: 0,
            converged: true,
        });
    }
    let mut iterations = 0;
    let mut lo = 0.0f64;
    while iterations < DC_MAX_ITER {
        iterations += 1;
        let Some((obj, na, nb)) = dc_step(num, den, targets, &b, delta, false)? else { break };
        if obj >= -1e-13 {
            break;
        }
        match fit_error(num, den, targets, &na, &nb) {
            Some(e) if e < delta => {
                let gain = delta - e;
                a = na;
                b = nb;
                delta = e;
                if gain < 1e-13 {
                    break;
                }
            }
            _ => break,
        }
    }
    let mut hi = delta;
    for _ in 0..60 {
        if hi - lo <= CERT_GAP || hi <= CERT_GAP {
            break;
        }
        let probe = (hi - CERT_GAP).max((lo + hi) / 2.0);
        let Some((obj, na, nb)) = dc_step(num, den, targets, &b, probe, true)? else { break };
        if obj > 0.0 {
            lo = probe;
            continue;
        }
        hi = probe;
        if let Some(e) = fit_error(num, den, targets, &na, &nb).filter(|&e| e < delta) {
            a = na;
            b = nb;
            delta = e;
            hi = hi.min(e);
        }
    }
    let converged = delta - lo <= CERT_SLACK;
    // normalise the denominator so its largest coefficient has magnitude 1
    let norm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if norm > 0.0 {
        a.iter_mut().for_each(|v| *v /= norm);
        b.iter_mut().for_each(|v| *v /= norm);
    }
    let error = fit_error(num, den, targets, &a, &b).unwrap_or(f64::INFINITY);
    Ok(RationalFit { numerator: a, denominator: b, error, lower_bound: lo, dual_certificate: None, iterations, converged })
}

fn chebyshev_rows(points: &[f64], scale: f64, d: usize) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|&t| {
            let u = t / scale;
            let mut row = vec![1.0; d + 1];
            if d >= 1 {
                row[1] = u;
            }
            for k in 2..=d {
                row[k] = 2.0 * u * row[k - 1] - row[k - 2];
            }
            row
        })
        .collect()
}

fn check_points(points: &[f64], targets: &[f64]) -> Result<f64, ApproxError> {
    if points.is_empty() || points.len() != targets.len() {
        return Err(ApproxError::PreconditionViolated("points and targets must be nonempty and of equal length".into()));
    }
    if points.len() > MAX_POINTS {
        return Err(ApproxError::TooLarge(format!("{} points, at most {MAX_POINTS}", points.len())));
    }
    if points.iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(ApproxError::PreconditionViolated("non-finite input".into()));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(ApproxError::PreconditionViolated("points must be distinct".into()));
    }
    Ok(points.iter().fold(0.0f64, |m, t| m.max(t.abs())).max(f64::MIN_POSITIVE))
}

/// Best rational approximation of degree `(d0, d1)` on a finite point set.
pub fn rational_minimax_discrete(points: &[f64], targets: &[f64], d0: usize, d1: usize) -> Result<ApproxResult, ApproxError> {
    let scale = check_points(points, targets)?;
    let fit = rational_minimax_basis(&chebyshev_rows(points, scale, d0), &chebyshev_rows(points, scale, d1), targets)?;
    let result = ApproxResult {
        d0,
        d1,
        error: fit.error,
        basis: Basis::Chebyshev { scale },
        numerator: fit.numerator,
        denominator: fit.denominator,
        dual_certificate: fit.dual_certificate,
        lower_bound: Some(fit.lower_bound),
    };
    if fit.converged {
        Ok(result)
    } else {
        Err(ApproxError::NoConvergence { best: Box::new(result) })
    }
}

/// Univariate polynomial minimax through the orthogonality formulation.
pub fn minimax_poly_discrete(points: &[f64], targets: &[f64], d: usize) -> Result<ApproxResult, ApproxError> {
    let scale = check_points(points, targets)?;
    let (coeffs, value, psi) = minimax_linear(&chebyshev_rows(points, scale, d), targets)?;
    let error = points
        .iter()
        .zip(targets)
        .map(|(&t, f)| (f - clenshaw(&coeffs, t / scale)).abs())
        .fold(0.0, f64::max);
    Ok(ApproxResult {
        d0: d,
        d1: 0,
        error,
        basis: Basis::Chebyshev { scale },
        numerator: coeffs,
        denominator: vec![1.0],
        dual_certificate: Some(psi),
        lower_bound: Some(value),
    })
}

/// `R(f, d0, d1)` over multilinear numerators and denominators.
pub fn rational_minimax_boolean(f: &BooleanFunctionTable, d0: usize, d1: usize) -> Result<ApproxResult, ApproxError> {
    let n = f.n;
    let (m0, m1) = (monomials_up_to(n, d0.min(n)), monomials_up_to(n, d1.min(n)));
    let pts = f.domain_points();
    let rows = |monos: &[Monomial]| -> Vec<Vec<f64>> {
        pts.iter().map(|&x| monos.iter().map(|&a| if a & x == a { 1.0 } else { 0.0 }).collect()).collect()
    };
    let targets: Vec<f64> = pts.iter().map(|&x| f.values[x as usize] as f64).collect();
    check_tableau(2 * (m0.len() + m1.len()) + 2, 3 * pts.len(), "rational minimax")?;
    let fit = rational_minimax_basis(&rows(&m0), &rows(&m1), &targets)?;
    let result = ApproxResult {
        d0: d0.min(n),
        d1: d1.min(n),
        error: fit.error,
        basis: Basis::Multilinear { n },
        numerator: fit.numerator,
        denominator: fit.denominator,
        dual_certificate: fit.dual_certificate,
        lower_bound: Some(fit.lower_bound),
    };
    if fit.converged {
        Ok(result)
    } else {
        Err(ApproxError::NoConvergence { best: Box::new(result) })
    }
}

/// Exact `max t` such that some `p/q` of degree `(d0, d1)` with `q >= 0`,
/// `sum_x q(x) = 1` satisfies `|f q - p| + t <= level q` on the domain.
///
/// A positive value exhibits a fit with error below `level`; zero or less
/// proves `R(f, d0, d1) >= level`.
pub fn rational_gap_exact(f: &BooleanFunctionTable, d0: usize, d1: usize, level: &BigRational) -> Result<BigRational, ApproxError> {
    let n = f.n;
    let (m0, m1) = (monomials_up_to(n, d0.min(n)), monomials_up_to(n, d1.min(n)));
    let pts = f.domain_points();
    if !exact_ok(n, 3 * pts.len() + 1, 2 * (m0.len() + m1.len()) + 2) {
        return Err(ApproxError::TooLarge("exact rational program".into()));
    }
    let mut lp = LinearProgram::<BigRational>::new(Sense::Maximize);
    let a: Vec<usize> = m0.iter().map(|_| lp.add_var(BigRational::zero(), true)).collect();
    let b: Vec<usize> = m1.iter().map(|_| lp.add_var(BigRational::zero(), true)).collect();
    let t = lp.add_var(rational(1, 1), true);
    let one = rational(1, 1);
    let mut total = Vec::new();
    for &x in &pts {
        let fx = rational(f.values[x as usize] as i64, 1);
        let q: Vec<(usize, BigRational)> = m1.iter().zip(&b).filter(|(&m, _)| m & x == m).map(|(_, &v)| (v, one.clone())).collect();
        let p: Vec<(usize, BigRational)> = m0.iter().zip(&a).filter(|(&m, _)| m & x == m).map(|(_, &v)| (v, one.clone())).collect();
        lp.add_constraint(q.clone(), Relation::Ge, BigRational::zero());
        total.extend(q.iter().cloned());
        for sgn in [1i64, -1] {
            let s = rational(sgn, 1);
            let row = q
                .iter()
                .map(|(v, _)| (*v, &s * &fx - level))
                .chain(p.iter().map(|(v, _)| (*v, -s.clone())))
                .chain(std::iter::once((t, one.clone())))
                .collect();
            lp.add_constraint(row, Relation::Le, BigRational::zero());
        }
    }
    lp.add_constraint(total, Relation::Eq, one.clone());
    // t is bounded by level * q, which the normalisation caps
    Ok(lp.solve()?.objective)
}

/// A polynomial in block weights `t_1, ..., t_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricPoly {
    pub blocks: Vec<usize>,
    /// `(exponents, coefficient)` with nonzero coefficients only.
    pub terms: Vec<(Vec<u32>, f64)>,
}

impl SymmetricPoly {
    pub fn eval(&self, t: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(t).map(|(&k, &v)| v.powi(k as i32)).product::<f64>())
            .sum()
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(e, _)| e.iter().sum::<u32>() as usize).max().unwrap_or(0)
    }
}

/// Averages `p` over permutations within each block of consecutive variables.
pub fn symmetrize(p: &MultilinearPoly, blocks: &[usize]) -> Result<SymmetricPoly, ApproxError> {
    let total: usize = blocks.iter().sum();
    if total > MAX_VARS {
        return Err(ApproxError::TooLarge(format!("{total} variables")));
    }
    if p.n > total {
        return Err(ApproxError::PreconditionViolated("polynomial has more variables than the blocks cover".into()));
    }
    let p = MultilinearPoly::from_terms(total, p.terms());
    let table = p.table();
    let offsets: Vec<usize> = blocks.iter().scan(0, |acc, &b| {
        let o = *acc;
        *acc += b;
        Some(o)
    }).collect();
    let dims: Vec<usize> = blocks.iter().map(|&b| b + 1).collect();
    let cells: usize = dims.iter().product();
    let index = |w: &[usize]| w.iter().zip(&dims).rev().fold(0, |acc, (&wi, &di)| acc * di + wi);
    let mut sums = vec![0.0; cells];
    let mut counts = vec![0u64; cells];
    for x in 0..1u32 << total {
        let w: Vec<usize> = offsets
            .iter()
            .zip(blocks)
            .map(|(&o, &b)| ((x >> o) & ((1u32 << b) - 1)).count_ones() as usize)
            .collect();
        let i = index(&w);
        sums[i] += table[x as usize];
        counts[i] += 1;
    }
    let mut coef: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    // tensor-product interpolation, one axis at a time
    let mut stride = 1;
    for &d in &dims {
        let block = stride * d;
        for base in 0..cells {
            if (base / stride) % d != 0 {
                continue;
            }
            let line: Vec<(f64, f64)> = (0..d).map(|j| (j as f64, coef[base + j * stride])).collect();
            let poly = UniPoly::interpolate(&line);
            for j in 0..d {
                coef[base + j * stride] = poly.coeffs.get(j).copied().unwrap_or(0.0);
            }
        }
        stride = block;
    }
    let scale = coef.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1.0);
    let mut terms = Vec::new();
    for (i, &c) in coef.iter().enumerate() {
        if c.abs() <= 1e-11 * scale {
            continue;
        }
        let mut rest = i;
        let e: Vec<u32> = dims
            .iter()
            .map(|&d| {
                let k = rest % d;
                rest /= d;
                k as u32
            })
            .collect();
        terms.push((e, c));
    }
    Ok(SymmetricPoly { blocks: blocks.to_vec(), terms })
}

/// A rational approximant given as multilinear numerator and denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BooleanRational {
    pub p: MultilinearPoly,
    pub q: MultilinearPoly,
}

impl BooleanRational {
    pub fn from_result(r: &ApproxResult) -> Option<Self> {
        Some(BooleanRational { p: r.numerator_poly()?, q: r.denominator_poly()? })
    }

    pub fn degree(&self) -> usize {
        self.p.degree().max(self.q.degree())
    }

    /// Max deviation from `f` over its domain.
    pub fn error_on(&self, f: &BooleanFunctionTable) -> Result<f64, ApproxError> {
        let (pt, qt) = (self.p.table(), self.q.table());
        let mut worst = 0.0f64;
        for x in f.domain_points() {
            let q = qt[x as usize];
            if q == 0.0 {
                return Err(ApproxError::DenominatorVanishes(x));
            }
            worst = worst.max((f.values[x as usize] as f64 - pt[x as usize] / q).abs());
        }
        Ok(worst)
    }
}

/// `q1^2 q2^2 + p1 q1 q2^2 + p2 q2 q1^2`, which sign-represents `f AND g`.
pub fn beigel_signrep(
    f: &BooleanFunctionTable,
    r1: &BooleanRational,
    g: &BooleanFunctionTable,
    r2: &BooleanRational,
) -> Result<SignRepresentation, ApproxError> {
    let (e1, e2) = (r1.error_on(f)?, r2.error_on(g)?);
    if e1 + e2 >= 1.0 {
        return Err(ApproxError::ErrorBudgetExceeded(e1 + e2));
    }
    let (nf, ng) = (f.n, g.n);
    let n = nf + ng;
    let lift_x: Vec<usize> = (0..nf).collect();
    let lift_y: Vec<usize> = (nf..n).collect();
    let p1 = r1.p.relabel(n, &lift_x);
    let q1 = r1.q.relabel(n, &lift_x);
    let p2 = r2.p.relabel(n, &lift_y);
    let q2 = r2.q.relabel(n, &lift_y);
    let q1s = q1.mul(&q1);
    let q2s = q2.mul(&q2);
    let poly = q1s.mul(&q2s).add(&p1.mul(&q1).mul(&q2s)).add(&p2.mul(&q2).mul(&q1s));
    let target = BooleanFunctionTable::and(f, g)?;
    let table = poly.table();
    let mut margin = f64::INFINITY;
    for xy in target.domain_points() {
        let v = target.values[xy as usize] as f64 * table[xy as usize];
        if v <= 0.0 {
            return Err(ApproxError::PreconditionViolated(format!("composed polynomial has the wrong sign at {xy:#b}")));
        }
        margin = margin.min(v);
    }
    let degree = poly.degree();
    Ok(SignRepresentation {
        n,
        degree,
        coefficients: poly.coeffs_over(&monomials_up_to(n, degree)),
        margin,
        lower_certificate: None,
        exact: false,
    })
}

/// `min a_i/b_i <= E_w a / E_w b <= max a_i/b_i` for positive `b` and weights `w`.
pub fn averaging_bounds(a: &[f64], b: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let ratios = a.iter().zip(b).map(|(x, y)| x / y);
    let lo = ratios.clone().fold(f64::INFINITY, f64::min);
    let hi = ratios.fold(f64::NEG_INFINITY, f64::max);
    let ea: f64 = a.iter().zip(w).map(|(x, y)| x * y).sum();
    let eb: f64 = b.iter().zip(w).map(|(x, y)| x * y).sum();
    (lo, ea / eb, hi)
}

/// Output of the univariate reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Univariatized {
    pub m: u64,
    pub n: usize,
    pub input_degrees: (usize, usize),
    /// Bounds `(2 d0, 2 d1, d0 + d1)` on the degrees of `p**, q**, r**`.
    pub degree_bounds: (usize, usize, usize),
    pub p2: UniPoly,
    pub q2: UniPoly,
    pub r2: UniPoly,
    pub input_error: f64,
    /// `max |r**(s-1)/q**(s-1) - sign s|` over `s in {+-1, ..., +-m}`.
    pub error_rq: f64,
    /// `max |p**(s-1)/r**(s-1) - sign s|` over the same points.
    pub error_pr: f64,
    /// Whether the fooling degree covers every averaged polynomial.
    pub fooling_sufficient: bool,
    pub positive: bool,
}

const UNIVARIATE_MAX_VARS: usize = 12;

/// Squaring, symmetrization over `y`, then averaging over `x ~ mu_s`.
pub fn univariatize(
    p: &MultilinearPoly,
    q: &MultilinearPoly,
    z: &IntegerMultiset,
    foolers: &FoolingFamily,
) -> Result<Univariatized, ApproxError> {
    let n = z.len();
    let m = z.modulus();
    if n == 0 || 2 * n > UNIVARIATE_MAX_VARS {
        return Err(ApproxError::TooLarge(format!("{} variables, at most {UNIVARIATE_MAX_VARS}", 2 * n)));
    }
    if p.n > 2 * n || q.n > 2 * n {
        return Err(ApproxError::PreconditionViolated("approximant has too many variables".into()));
    }
    if foolers.m != m || foolers.n != n || foolers.classes.len() != m as usize {
        return Err(ApproxError::PreconditionViolated("fooling family does not match the multiset".into()));
    }
    let zs = element_residues(z);
    let xmask = (1u32 << n) - 1;
    let form = |x: u32| -> i64 { (0..n).filter(|j| x >> j & 1 == 1).map(|j| zs[j] as i64).sum() };
    let f = |xy: u32| -> f64 {
        // doubled argument 1 + 2 sum z_j x_j - 2 m |y| is odd, never zero
        let arg = 1 + 2 * form(xy & xmask) - 2 * m as i64 * (xy >> n).count_ones() as i64;
        if arg > 0 {
            1.0
        } else {
            -1.0
        }
    };
    let big = 2 * n;
    let (pt, qt) = (MultilinearPoly::from_terms(big, p.terms()).table(), MultilinearPoly::from_terms(big, q.terms()).table());
    let mut input_error = 0.0f64;
    for xy in 0..1u32 << big {
        if qt[xy as usize] == 0.0 {
            return Err(ApproxError::DenominatorVanishes(xy));
        }
        input_error = input_error.max((f(xy) - pt[xy as usize] / qt[xy as usize]).abs());
    }
    if input_error >= 1.0 {
        return Err(ApproxError::PreconditionViolated(format!("input error {input_error} is not below 1")));
    }
    // y-symmetrization of p^2, q^2, pq
    let mut star = vec![[0.0f64; 3]; (1usize << n) * (n + 1)];
    let mut count = vec![0u32; n + 1];
    for y in 0..1u32 << n {
        count[y.count_ones() as usize] += 1;
    }
    for xy in 0..1u32 << big {
        let (x, t) = ((xy & xmask) as usize, (xy >> n).count_ones() as usize);
        let (pv, qv) = (pt[xy as usize], qt[xy as usize]);
        let cell = &mut star[x * (n + 1) + t];
        cell[0] += pv * pv;
        cell[1] += qv * qv;
        cell[2] += pv * qv;
    }
    for x in 0..1usize << n {
        for t in 0..=n {
            for v in star[x * (n + 1) + t].iter_mut() {
                *v /= count[t] as f64;
            }
        }
    }
    // averaging over mu_s with l(x, s) = (sum (z_j mod m) x_j - s) / m
    let (lo, hi) = (-(m as i64) - 1, m as i64 - 1);
    let mut values: Vec<(f64, [f64; 3])> = Vec::new();
    for s in lo..=hi {
        let class = s.rem_euclid(m as i64) as u64;
        let dist = &foolers.classes[&class];
        let mut acc = [0.0f64; 3];
        for (&x, &w) in dist.inputs.iter().zip(&dist.probs) {
            let diff = form(x) - s;
            if diff.rem_euclid(m as i64) != 0 {
                return Err(ApproxError::PreconditionViolated(format!("input {x:#b} is outside class {class}")));
            }
            let l = diff / m as i64;
            if !(0..=n as i64).contains(&l) {
                return Err(ApproxError::PreconditionViolated(format!("linear form {l} outside 0..={n}")));
            }
            let cell = &star[x as usize * (n + 1) + l as usize];
            for k in 0..3 {
                acc[k] += w * cell[k];
            }
        }
        values.push((s as f64, acc));
    }
    let (d0, d1) = (p.degree(), q.degree());
    let bounds = (2 * d0, 2 * d1, d0 + d1);
    let fit = |k: usize, bound: usize| -> Result<UniPoly, ApproxError> {
        let pts: Vec<(f64, f64)> = values.iter().map(|(s, v)| (*s, v[k])).collect();
        let used = pts.len().min(bound + 1);
        let poly = UniPoly::interpolate(&pts[..used]);
        let scale = pts.iter().fold(1.0f64, |a, (_, v)| a.max(v.abs()));
        for &(s, v) in &pts[used..] {
            if (poly.eval(s) - v).abs() > 1e-7 * scale {
                return Err(ApproxError::PreconditionViolated(format!(
                    "averaged values do not lie on a polynomial of degree {bound}"
                )));
            }
        }
        Ok(poly)
    };
    let p2 = fit(0, bounds.0)?;
    let q2 = fit(1, bounds.1)?;
    let r2 = fit(2, bounds.2)?;
    let mut error_rq = 0.0f64;
    let mut error_pr = 0.0f64;
    let mut positive = true;
    for s in (1..=m as i64).flat_map(|k| [k, -k]) {
        let t = (s - 1) as f64;
        let sg = s.signum() as f64;
        let (pv, qv, rv) = (p2.eval(t), q2.eval(t), r2.eval(t));
        positive &= pv > 0.0 && qv > 0.0 && rv * sg > 0.0;
        error_rq = error_rq.max((rv / qv - sg).abs());
        error_pr = error_pr.max((pv / rv - sg).abs());
    }
    Ok(Univariatized {
        m,
        n,
        input_degrees: (d0, d1),
        degree_bounds: bounds,
        p2,
        q2,
        r2,
        input_error,
        error_rq,
        error_pr,
        fooling_sufficient: foolers.degree >= bounds.0.max(bounds.1).max(bounds.2),
        positive,
    })
}

/// Exact `E(f, d) = 0` check: the table interpolant has integer coefficients.
pub fn exact_interpolant(f: &BooleanFunctionTable) -> Vec<i64> {
    mobius_i64(&f.values.iter().map(|&v| v as i64).collect::<Vec<_>>())
}

/// Number of monomials a degree-`d` program in `n` variables carries.
pub fn basis_size(n: usize, d: usize) -> usize {
    monomial_count(n, d)
}

/// Exact rational value of `|<psi, f>|` for a certificate given as rationals.
pub fn exact_correlation(f: &BooleanFunctionTable, psi: &[BigRational]) -> BigRational {
    f.domain_points()
        .iter()
        .zip(psi)
        .map(|(&x, w)| w * rational(f.values[x as usize] as i64, 1))
        .fold(BigRational::zero(), |a, b| a + b)
        .abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn builtins_and_text() {
        let maj = BooleanFunctionTable::majority(3).unwrap();
        assert_eq!(maj.values(), &[1, 1, 1, -1, 1, -1, -1, -1]);
        let par = BooleanFunctionTable::parity(2).unwrap();
        assert_eq!(par.values(), &[1, -1, -1, 1]);
        // OMB_2: sign(1 - 2 x_1 + 4 x_2)
        assert_eq!(BooleanFunctionTable::omb(2).unwrap().values(), &[1, -1, 1, 1]);
        let back = BooleanFunctionTable::parse(&maj.to_text()).unwrap();
        assert_eq!(back, maj);
        let partial = BooleanFunctionTable::parse("1\n*\n-1\n1\n").unwrap();
        assert_eq!(partial.domain_points(), vec![0, 2, 3]);
        assert!(BooleanFunctionTable::parse("1\n-1\n1\n").is_err());
        assert!(BooleanFunctionTable::halfspace(&[1, -1], 0).is_err());
        assert_eq!(BooleanFunctionTable::halfspace(&[-1, -1, -1], -3).unwrap(), maj);
    }

    #[test]
    fn minimax_examples() {
        let par2 = BooleanFunctionTable::parity(2).unwrap();
        let r = minimax_poly(&par2, 1).unwrap();
        assert!((r.error - 1.0).abs() < 1e-9);
        assert!(r.numerator.iter().all(|c| c.abs() < 1e-9));
        let lb = certificate_lower_bound(&par2, 1, r.dual_certificate.as_ref().unwrap(), 1e-9).unwrap();
        assert!((lb - 1.0).abs() < 1e-9);
        let maj3 = BooleanFunctionTable::majority(3).unwrap();
        let full = minimax_poly(&maj3, 3).unwrap();
        assert_eq!(full.error, 0.0);
        let p = full.numerator_poly().unwrap();
        assert!((0..8).all(|x| p.eval(x) == maj3.values()[x as usize] as f64));
        // E(MAJ_3, 1) = 1/2: best linear is 1 - |x| + 1/2 clipped symmetric
        let lin = minimax_poly(&maj3, 1).unwrap();
        assert!((lin.error - 0.5).abs() < 1e-9);
        assert!((lin.lower_bound.unwrap() - lin.error).abs() < 1e-9);
    }

    #[test]
    fn threshold_examples() {
        let c = threshold_degree(&BooleanFunctionTable::constant(3, -1).unwrap()).unwrap();
        assert_eq!(c.degree, 0);
        let m = threshold_degree(&BooleanFunctionTable::majority(3).unwrap()).unwrap();
        assert_eq!(m.degree, 1);
        let par3 = BooleanFunctionTable::parity(3).unwrap();
        let s = threshold_degree(&par3).unwrap();
        assert_eq!(s.degree, 3);
        assert!(s.exact);
        assert!(verify_lower_certificate(&par3, 3, s.lower_certificate.as_ref().unwrap(), 1e-12));
    }

    #[test]
    fn density_examples() {
        let chi = BooleanFunctionTable::from_fn(3, |x| if (x & 0b101).count_ones() % 2 == 1 { -1 } else { 1 }).unwrap();
        assert_eq!(
            threshold_density(&chi, 4).unwrap(),
            DensityResult::Exact { size: 1, family: vec![0b101], weights: vec![1.0] }
        );
        let and2 = BooleanFunctionTable::from_fn(2, |x| if x == 3 { -1 } else { 1 }).unwrap();
        match threshold_density(&and2, 4).unwrap() {
            DensityResult::Exact { size, .. } => assert_eq!(size, 3),
            other => panic!("{other:?}"),
        }
        assert_eq!(threshold_density(&and2, 2).unwrap(), DensityResult::LowerBoundOnly { searched: 2 });
    }

    #[test]
    fn buhrman_examples() {
        let b = buhrman_sign_poly(4.0, 1.0 / 3.0).unwrap();
        assert!(b.grid_error <= 1.0 / 3.0);
        assert_eq!(b.degree % 2, 1);
        let smaller = BuhrmanPoly { degree: b.degree - 2, ..b.clone() };
        if b.degree > 1 {
            assert!((1..=4).any(|t| (1.0 - smaller.eval(t as f64)).abs() > 1.0 / 3.0));
        }
        let one = BuhrmanPoly { big_n: 4.0, degree: 1, grid_error: 0.0 };
        assert!((one.eval(3.0) - 0.75).abs() < 1e-15);
        for t in 1..=4 {
            assert!((b.eval(t as f64) + b.eval(-(t as f64))).abs() < 1e-12);
        }
        let coeffs = b.coefficients().unwrap();
        assert!((coeffs.eval(2.0) - b.eval(2.0)).abs() < 1e-9);
    }

    #[test]
    fn newman_examples() {
        for (n, d) in [(10.0, 1), (100.0, 3), (1000.0, 5), (1000.0, 2), (1e4, 3), (2.0, 7)] {
            let r = newman_rational_sign(n, d).unwrap();
            assert!(r.grid_error <= r.bound + 1e-9, "N={n} d={d}: {} > {}", r.grid_error, r.bound);
            assert!((r.eval(7.5) + r.eval(-7.5)).abs() < 1e-12);
            let e = r.to_rational();
            assert!((e.eval(3.0) - r.eval(3.0)).abs() < 1e-9);
            assert!(e.num.degree() <= d && e.den.degree() <= d);
        }
    }

    #[test]
    fn rational_examples() {
        let r = rational_minimax_discrete(&[-1.0, 1.0], &[-1.0, 1.0], 0, 0).unwrap();
        assert!((r.error - 1.0).abs() < 1e-9);
        // sign on {+-1,+-2,+-3} at (1,1) beats every polynomial of degree 1
        let pts: Vec<f64> = (1..=3).flat_map(|k| [k as f64, -(k as f64)]).collect();
        let tg: Vec<f64> = pts.iter().map(|t| t.signum()).collect();
        let rat = rational_minimax_discrete(&pts, &tg, 1, 1).unwrap();
        let pol = rational_minimax_discrete(&pts, &tg, 1, 0).unwrap();
        assert!(rat.error <= pol.error + 1e-9);
        assert!(rat.lower_bound.unwrap() <= rat.error + 1e-12);
        assert!(rat.error - rat.lower_bound.unwrap() <= 1e-6);
        for (&t, &y) in pts.iter().zip(&tg) {
            assert!((rat.eval_univariate(t).unwrap() - y).abs() <= rat.error + 1e-12);
        }
    }

    #[test]
    fn d1_zero_matches_dual_formulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let pts: Vec<f64> = (0..12).map(|i| i as f64 - 5.5).collect();
            let tg: Vec<f64> = pts.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = rational_minimax_discrete(&pts, &tg, 3, 0).unwrap();
            let b = minimax_poly_discrete(&pts, &tg, 3).unwrap();
            assert!((a.error - b.error).abs() < 1e-6);
        }
    }

    #[test]
    fn symmetrize_examples() {
        let x1 = MultilinearPoly::linear(0.0, &[1.0, 0.0, 0.0, 0.0]);
        let s = symmetrize(&x1, &[4]).unwrap();
        assert!((s.eval(&[3.0]) - 0.75).abs() < 1e-12);
        assert_eq!(s.degree(), 1);
        let c = symmetrize(&MultilinearPoly::constant(3, 2.5), &[3]).unwrap();
        assert_eq!(c.terms, vec![(vec![0], 2.5)]);
        let x12 = MultilinearPoly::from_terms(2, [(0b11, 1.0)]);
        let s2 = symmetrize(&x12, &[2]).unwrap();
        for t in 0..=2 {
            let t = t as f64;
            assert!((s2.eval(&[t]) - t * (t - 1.0) / 2.0).abs() < 1e-12);
        }
        // two blocks: x_1 y_1 -> t u / 4 for blocks of size 2
        let xy = MultilinearPoly::from_terms(4, [(0b0101, 1.0)]);
        let s3 = symmetrize(&xy, &[2, 2]).unwrap();
        assert!((s3.eval(&[1.0, 2.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn averaging_proposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let k = rng.gen_range(1..10);
            let a: Vec<f64> = (0..k).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..5.0)).collect();
            let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
            let (lo, mid, hi) = averaging_bounds(&a, &b, &w);
            assert!(lo <= mid + 1e-12 && mid <= hi + 1e-12);
        }
    }

    #[test]
    fn exact_rational_gap() {
        let maj = BooleanFunctionTable::majority(3).unwrap();
        let half = rational(1, 2);
        assert!(rational_gap_exact(&maj, 1, 1, &half).unwrap() <= BigRational::zero());
        assert!(rational_gap_exact(&maj, 1, 1, &rational(3, 5)).unwrap() > BigRational::zero());
        assert!(rational_gap_exact(&maj, 2, 2, &rational(1, 100)).unwrap() > BigRational::zero());
    }

    #[test]
    fn beigel_rejects_budget() {
        let maj = BooleanFunctionTable::majority(3).unwrap();
        let lin = minimax_poly(&maj, 1).unwrap();
        let r = BooleanRational::from_result(&lin).unwrap();
        assert!(matches!(beigel_signrep(&maj, &r, &maj, &r), Err(ApproxError::ErrorBudgetExceeded(_))));
        let exact = BooleanRational::from_result(&minimax_poly(&maj, 3).unwrap()).unwrap();
        let s = beigel_signrep(&maj, &exact, &maj, &exact).unwrap();
        assert!(s.degree <= 12);
        assert!(s.margin > 0.0);
    }
}
