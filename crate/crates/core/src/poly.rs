//! Multilinear polynomials on {0,1}^n and dense univariate polynomials.
//!
//! A monomial is a bitmask: bit `j` set means `x_{j+1}` appears. Coefficient
//! vectors are always listed in graded-lex order: by degree, then
//! lexicographically by the sorted list of variable indices.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;

pub type Monomial = u32;

/// Graded-lex comparison of two monomials.
pub fn grlex_cmp(a: Monomial, b: Monomial) -> Ordering {
    a.count_ones().cmp(&b.count_ones()).then_with(|| {
        // the lowest differing index decides: whoever holds it comes first
        let diff = a ^ b;
        if diff == 0 {
            Ordering::Equal
        } else if a & (diff & diff.wrapping_neg()) != 0 {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    })
}

/// All monomials in `n` variables of degree at most `d`, graded-lex, starting with 1.
pub fn monomials_up_to(n: usize, d: usize) -> Vec<Monomial> {
    assert!(n <= 31, "at most 31 variables");
    let mut out = Vec::new();
    for deg in 0..=d.min(n) {
        let mut idx: Vec<usize> = (0..deg).collect();
        loop {
            out.push(idx.iter().fold(0, |acc, &i| acc | (1 << i)));
            // next combination in lex order
            let mut i = deg;
            while i > 0 && idx[i - 1] == n - deg + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..deg {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out
}

/// Number of monomials of degree at most `d` in `n` variables.
pub fn monomial_count(n: usize, d: usize) -> usize {
    let mut total = 0usize;
    let mut c = 1usize;
    for k in 0..=d.min(n) {
        total += c;
        c = c * (n - k) / (k + 1);
    }
    total
}

/// Multilinear polynomial with real coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultilinearPoly {
    pub n: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl MultilinearPoly {
    pub fn zero(n: usize) -> Self {
        MultilinearPoly { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::from_terms(n, [(0, c)])
    }

    /// `c + sum_j a[j] x_{j+1}`.
    pub fn linear(c: f64, a: &[f64]) -> Self {
        let n = a.len();
        Self::from_terms(n, std::iter::once((0, c)).chain(a.iter().enumerate().map(|(j, &w)| (1 << j, w))))
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (Monomial, f64)>) -> Self {
        let mut p = Self::zero(n);
        for (mono, c) in terms {
            assert!((mono as u64) < (1u64 << n), "monomial outside the variable range");
            *p.terms.entry(mono).or_insert(0.0) += c;
        }
        p.terms.retain(|_, c| *c != 0.0);
        p
    }

    /// Coefficients over `monos`, zeros where absent.
    pub fn from_coeffs(n: usize, monos: &[Monomial], coeffs: &[f64]) -> Self {
        Self::from_terms(n, monos.iter().copied().zip(coeffs.iter().copied()))
    }

    /// Terms in graded-lex order.
    pub fn terms(&self) -> Vec<(Monomial, f64)> {
        let mut t: Vec<_> = self.terms.iter().map(|(&k, &v)| (k, v)).collect();
        t.sort_by(|a, b| grlex_cmp(a.0, b.0));
        t
    }

    pub fn coeff(&self, mono: Monomial) -> f64 {
        self.terms.get(&mono).copied().unwrap_or(0.0)
    }

    pub fn coeffs_over(&self, monos: &[Monomial]) -> Vec<f64> {
        monos.iter().map(|&a| self.coeff(a)).collect()
    }

    /// Degree, with the zero polynomial at degree 0.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|a| a.count_ones() as usize).max().unwrap_or(0)
    }

    pub fn eval(&self, x: u32) -> f64 {
        self.terms.iter().filter(|(&a, _)| a & x == a).map(|(_, c)| c).sum()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_terms(self.n.max(other.n), self.terms.iter().chain(other.terms.iter()).map(|(&a, &c)| (a, c)))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_terms(self.n, self.terms.iter().map(|(&a, &c)| (a, c * s)))
    }

    /// Product reduced by `x^2 = x`.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = BTreeMap::new();
        for (&a, &c) in &self.terms {
            for (&b, &d) in &other.terms {
                *out.entry(a | b).or_insert(0.0) += c * d;
            }
        }
        Self::from_terms(self.n.max(other.n), out)
    }

    /// `u(self)` by Horner's rule.
    pub fn compose(u: &UniPoly, inner: &Self) -> Self {
        let mut acc = Self::zero(inner.n);
        for &c in u.coeffs.iter().rev() {
            acc = acc.mul(inner).add(&Self::constant(inner.n, c));
        }
        acc
    }

    /// Values on every point of {0,1}^n, indexed by input mask.
    pub fn table(&self) -> Vec<f64> {
        (0..1u32 << self.n).map(|x| self.eval(x)).collect()
    }

    /// Renames variable `j` to `map[j]` inside a space of `n` variables.
    pub fn relabel(&self, n: usize, map: &[usize]) -> Self {
        let remap = |a: Monomial| {
            (0..self.n).filter(|j| a >> j & 1 == 1).fold(0, |acc, j| acc | (1 << map[j]))
        };
        Self::from_terms(n, self.terms.iter().map(|(&a, &c)| (remap(a), c)))
    }
}

/// Multilinear coefficients from a full value table (Moebius inversion).
pub fn mobius(values: &[f64]) -> Vec<f64> {
    let mut c = values.to_vec();
    let n = c.len().trailing_zeros();
    assert_eq!(c.len(), 1 << n, "table length must be a power of two");
    for j in 0..n {
        for x in 0..c.len() {
            if x >> j & 1 == 1 {
                c[x] -= c[x ^ (1 << j)];
            }
        }
    }
    c
}

/// Integer version of [`mobius`]; exact for integer-valued tables.
pub fn mobius_i64(values: &[i64]) -> Vec<i64> {
    let mut c = values.to_vec();
    let n = c.len().trailing_zeros();
    assert_eq!(c.len(), 1 << n, "table length must be a power of two");
    for j in 0..n {
        for x in 0..c.len() {
            if x >> j & 1 == 1 {
                c[x] -= c[x ^ (1 << j)];
            }
        }
    }
    c
}

/// Dense univariate polynomial, coefficients by ascending power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniPoly {
    pub coeffs: Vec<f64>,
}

impl UniPoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        UniPoly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        UniPoly { coeffs: vec![c] }
    }

    /// Highest index with a nonzero coefficient.
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    /// Highest index with `|c| > tol * max|c|`.
    pub fn numeric_degree(&self, tol: f64) -> usize {
        let scale = self.coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        self.coeffs.iter().rposition(|&c| c.abs() > tol * scale).unwrap_or(0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        UniPoly::new((0..len).map(|i| get(&self.coeffs, i) + get(&other.coeffs, i)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return UniPoly::new(Vec::new());
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        UniPoly::new(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        UniPoly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `p(a t + b)`.
    pub fn compose_affine(&self, a: f64, b: f64) -> Self {
        let inner = UniPoly::new(vec![b, a]);
        self.coeffs.iter().rev().fold(UniPoly::new(vec![0.0]), |acc, &c| acc.mul(&inner).add(&UniPoly::constant(c)))
    }

    /// `p(-t)`.
    pub fn reflect(&self) -> Self {
        UniPoly::new(self.coeffs.iter().enumerate().map(|(i, &c)| if i % 2 == 1 { -c } else { c }).collect())
    }

    /// Interpolating polynomial of degree `< points.len()` (Newton form, expanded).
    pub fn interpolate(points: &[(f64, f64)]) -> Self {
        let k = points.len();
        let mut dd: Vec<f64> = points.iter().map(|p| p.1).collect();
        for level in 1..k {
            for i in (level..k).rev() {
                dd[i] = (dd[i] - dd[i - 1]) / (points[i].0 - points[i - level].0);
            }
        }
        let mut acc = UniPoly::new(vec![0.0]);
        for i in (0..k).rev() {
            acc = acc.mul(&UniPoly::new(vec![-points[i].0, 1.0])).add(&UniPoly::constant(dd[i]));
        }
        acc
    }
}

/// A ratio of univariate polynomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniRational {
    pub num: UniPoly,
    pub den: UniPoly,
}

impl UniRational {
    pub fn eval(&self, t: f64) -> f64 {
        self.num.eval(t) / self.den.eval(t)
    }
}

/// Binomial coefficient as f64.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lex_listing() {
        assert_eq!(monomials_up_to(3, 2), vec![0, 0b001, 0b010, 0b100, 0b011, 0b101, 0b110]);
        assert_eq!(monomials_up_to(4, 4).len(), 16);
        for (n, d) in [(5, 2), (8, 3), (10, 10)] {
            let m = monomials_up_to(n, d);
            assert_eq!(m.len(), monomial_count(n, d));
            assert!(m.windows(2).all(|w| grlex_cmp(w[0], w[1]) == Ordering::Less));
        }
    }

    #[test]
    fn multilinear_arithmetic() {
        let p = MultilinearPoly::linear(1.0, &[2.0, -1.0]);
        let sq = p.mul(&p);
        for x in 0..4u32 {
            assert_eq!(sq.eval(x), p.eval(x).powi(2));
        }
        assert_eq!(sq.degree(), 2);
        let cube = MultilinearPoly::compose(&UniPoly::new(vec![0.0, 0.0, 0.0, 1.0]), &p);
        for x in 0..4u32 {
            assert_eq!(cube.eval(x), p.eval(x).powi(3));
        }
    }

    #[test]
    fn mobius_roundtrip() {
        let vals = [1.0, -1.0, -1.0, 1.0];
        let c = mobius(&vals);
        let p = MultilinearPoly::from_coeffs(2, &[0, 1, 2, 3], &c);
        assert_eq!(p.table(), vals.to_vec());
        assert_eq!(mobius_i64(&[1, -1, -1, 1]), vec![1, -2, -2, 4]);
    }

    #[test]
    fn univariate_ops() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, (i * i) as f64 - 3.0)).collect();
        let p = UniPoly::interpolate(&pts);
        assert_eq!(p.numeric_degree(1e-12), 2);
        assert!((p.eval(7.0) - 46.0).abs() < 1e-9);
        let q = p.compose_affine(2.0, 1.0);
        assert!((q.eval(1.5) - p.eval(4.0)).abs() < 1e-9);
        assert!((p.reflect().eval(2.0) - p.eval(-2.0)).abs() < 1e-12);
        assert_eq!(binomial(10, 3), 120.0);
    }
}
