//! Exact distribution of `sum_j z_j X_j mod m` for uniform `X in {0,1}^n`,
//! the Fourier and discrepancy bounds on its distance from uniform, and
//! LP-synthesized fooling distributions on the residue classes.

use crate::discrepancy::{disc, IntegerMultiset};
use crate::lp::{LinearProgram, LpError, Relation, Sense};
use crate::poly::monomials_up_to;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ops::Add;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("input too large: {0}")]
    TooLarge(String),
    #[error("residue class {0} is empty")]
    EmptyClass(u64),
    #[error("no fooling family at this degree; best moment spread {best_spread:e}")]
    Infeasible { best_spread: f64 },
    #[error("LP failure: {0}")]
    Lp(#[from] LpError),
}

/// An input `x in {0,1}^n` packed with `x_{j+1}` in bit `j`.
pub type InputMask = u32;

/// `Pr[sum z_j X_j = s mod m] = numerators[s] / 2^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistributionTable {
    pub m: u64,
    pub n: u64,
    pub numerators: Vec<BigUint>,
}

impl DistributionTable {
    pub fn prob(&self, s: u64) -> BigRational {
        BigRational::new(
            BigInt::from(self.numerators[(s % self.m) as usize].clone()),
            BigInt::one() << self.n as usize,
        )
    }

    pub fn probs(&self) -> Vec<BigRational> {
        (0..self.m).map(|s| self.prob(s)).collect()
    }

    pub fn total(&self) -> BigRational {
        self.probs().into_iter().fold(BigRational::zero(), |a, b| a + b)
    }

    /// `max_s |P(s) - 1/m|`, exactly.
    pub fn max_deviation(&self) -> BigRational {
        let two_n = BigInt::one() << self.n as usize;
        let m = BigInt::from(self.m);
        let worst = self
            .numerators
            .iter()
            .map(|c| (&m * BigInt::from(c.clone()) - &two_n).abs())
            .max()
            .unwrap_or_default();
        BigRational::new(worst, m * two_n)
    }
}

#[derive(Serialize, Deserialize)]
pub struct RationalJson {
    pub num: String,
    pub den: String,
}

impl From<&BigRational> for RationalJson {
    fn from(r: &BigRational) -> Self {
        Self {
            num: r.numer().to_string(),
            den: r.denom().to_string(),
        }
    }
}

impl RationalJson {
    pub fn parse(&self) -> Result<BigRational, String> {
        let num: BigInt = self.num.parse().map_err(|e| format!("{e}"))?;
        let den: BigInt = self.den.parse().map_err(|e| format!("{e}"))?;
        if den.is_zero() {
            return Err("zero denominator".into());
        }
        Ok(BigRational::new(num, den))
    }
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    m: u64,
    n: u64,
    probs: Vec<RationalJson>,
}

impl Serialize for DistributionTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TableJson {
            m: self.m,
            n: self.n,
            probs: self.probs().iter().map(RationalJson::from).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DistributionTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = TableJson::deserialize(d)?;
        let scale = BigRational::from_integer(BigInt::one() << raw.n as usize);
        let numerators = raw
            .probs
            .iter()
            .map(|p| {
                let v = p.parse().map_err(D::Error::custom)? * &scale;
                if !v.is_integer() || v.is_negative() {
                    return Err(D::Error::custom("probability is not k/2^n"));
                }
                v.to_integer().to_biguint().ok_or_else(|| D::Error::custom("negative"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if numerators.len() as u64 != raw.m {
            return Err(D::Error::custom("table length differs from m"));
        }
        Ok(DistributionTable {
            m: raw.m,
            n: raw.n,
            numerators,
        })
    }
}

/// Inputs `x` (as masks) with `sum z_j x_j = s mod m`.
pub fn residue_class(z: &IntegerMultiset, s: u64, n_cap: usize) -> Result<Vec<InputMask>, DistributionError> {
    let n = z.len();
    let n_cap = n_cap.min(24);
    if n > n_cap {
        return Err(DistributionError::TooLarge(format!("n = {n} exceeds cap {n_cap}")));
    }
    let m = z.modulus();
    let s = s % m;
    let zs = element_residues(z);
    Ok((0..1u32 << n).filter(|&x| form_value(&zs, x, m) == s).collect())
}

/// Residues of the elements in their original order.
pub fn element_residues(z: &IntegerMultiset) -> Vec<u64> {
    let m = BigInt::from(z.modulus());
    z.elements()
        .iter()
        .map(|e| {
            let r = ((e % &m) + &m) % &m;
            r.to_u64().expect("residue fits")
        })
        .collect()
}

fn form_value(zs: &[u64], x: InputMask, m: u64) -> u64 {
    zs.iter()
        .enumerate()
        .filter(|(j, _)| x >> j & 1 == 1)
        .fold(0u64, |acc, (_, &z)| ((acc as u128 + z as u128) % m as u128) as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dp,
    Walk,
}

pub const DP_CAP: u64 = 100_000_000;
pub const WALK_MAX_M: u64 = 512;
pub const WALK_MAX_N: u64 = 10_000;

pub fn exact_distribution(z: &IntegerMultiset, method: Method) -> Result<DistributionTable, DistributionError> {
    let m = z.modulus();
    let n = z.len() as u64;
    let zs = element_residues(z);
    let numerators = match method {
        Method::Dp => {
            if n.saturating_mul(m) > DP_CAP {
                return Err(DistributionError::TooLarge(format!("n*m = {} exceeds {DP_CAP}", n as u128 * m as u128)));
            }
            if n < 127 {
                widen(dp::<u128>(m, &zs))
            } else {
                dp::<BigUint>(m, &zs)
            }
        }
        Method::Walk => {
            if m > WALK_MAX_M || n > WALK_MAX_N {
                return Err(DistributionError::TooLarge(format!(
                    "walk needs m <= {WALK_MAX_M} and n <= {WALK_MAX_N}, got m={m}, n={n}"
                )));
            }
            if n < 127 {
                widen(walk::<u128>(m, &zs))
            } else {
                walk::<BigUint>(m, &zs)
            }
        }
    };
    Ok(DistributionTable { m, n, numerators })
}

fn widen(v: Vec<u128>) -> Vec<BigUint> {
    v.into_iter().map(BigUint::from).collect()
}

/// `probs <- (probs + shift_z(probs)) / 2`, keeping numerators over `2^j`.
fn dp<T: Clone + Zero + One + Add<Output = T>>(m: u64, zs: &[u64]) -> Vec<T> {
    let m = m as usize;
    let mut cur = vec![T::zero(); m];
    cur[0] = T::one();
    for &z in zs {
        let z = z as usize;
        cur = (0..m)
            .map(|s| cur[s].clone() + cur[(s + m - z) % m].clone())
            .collect();
    }
    cur
}

/// `p_n = T_{-z_n} ... T_{-z_1} p_0` with `T_{-z} = I/2 + circ(e_{-z mod m})/2`
/// applied as explicit dense matrices (numerators of `2 T`).
fn walk<T: Clone + Zero + One + Add<Output = T>>(m: u64, zs: &[u64]) -> Vec<T> {
    let m = m as usize;
    let mut p = vec![T::zero(); m];
    p[0] = T::one();
    for &z in zs {
        let shift = (m - z as usize % m) % m;
        // circulant with first row e_shift: entry (i, k) is 1 when k - i = shift (mod m)
        let matrix: Vec<Vec<u8>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|k| u8::from(i == k) + u8::from((k + m - i) % m == shift))
                    .collect()
            })
            .collect();
        p = matrix
            .iter()
            .map(|row| {
                row.iter().zip(&p).fold(T::zero(), |acc, (&a, v)| match a {
                    0 => acc,
                    1 => acc + v.clone(),
                    _ => acc + v.clone() + v.clone(),
                })
            })
            .collect();
    }
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub m: u64,
    pub n: u64,
    pub delta: f64,
    pub disc: f64,
    /// `max_s |P(s) - 1/m|` as an exact fraction.
    pub observed_num: String,
    pub observed_den: String,
    pub observed: f64,
    /// `(1/m) sum_{k=1}^{m-1} prod_j |(1 + w^{k z_j})/2|`.
    pub fourier_bound: f64,
    /// `((1 + disc)/2)^{n/2}`.
    pub disc_bound: f64,
    /// `log2` of `(2(1-2 delta)/(1+disc))^{(1/2-delta) n} 2^{-H(delta) n - 2}`.
    pub admissible_m_log2: f64,
    pub numeric_error: f64,
    pub sandwich_holds: bool,
}

pub fn binary_entropy(delta: f64) -> f64 {
    let h = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    h(delta) + h(1.0 - delta)
}

pub fn uniformity_report(z: &IntegerMultiset, delta: f64) -> Result<UniformityReport, DistributionError> {
    let table = exact_distribution(z, Method::Dp)?;
    let m = z.modulus();
    let n = z.len() as u64;
    let cert = disc(z);
    let zs = element_residues(z);
    let fourier: f64 = (1..m)
        .map(|k| {
            zs.iter()
                .map(|&zj| {
                    let phase = ((k as u128 * zj as u128) % m as u128) as f64 / m as f64;
                    (std::f64::consts::PI * phase).cos().abs()
                })
                .product::<f64>()
        })
        .sum::<f64>()
        / m as f64;
    let d = cert.upper().min(1.0);
    let disc_bound = ((1.0 + d) / 2.0).powf(n as f64 / 2.0);
    let observed_exact = table.max_deviation();
    let observed = observed_exact.to_f64().unwrap_or(f64::NAN);
    let numeric_error = 1e-12 + 8.0 * (n as f64 + 4.0) * f64::EPSILON + cert.numeric_error * n as f64;
    let ratio = 2.0 * (1.0 - 2.0 * delta) / (1.0 + cert.value);
    let admissible_m_log2 = (0.5 - delta) * n as f64 * ratio.log2() - binary_entropy(delta) * n as f64 - 2.0;
    let sandwich_holds = observed <= fourier + numeric_error
        && fourier <= (m - 1) as f64 / m as f64 * disc_bound + numeric_error;
    Ok(UniformityReport {
        m,
        n,
        delta,
        disc: cert.value,
        observed_num: observed_exact.numer().to_string(),
        observed_den: observed_exact.denom().to_string(),
        observed,
        fourier_bound: fourier,
        disc_bound,
        admissible_m_log2,
        numeric_error,
        sandwich_holds,
    })
}

/// Per-class distributions whose low-degree moments agree across classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoolingFamily {
    pub m: u64,
    pub degree: usize,
    pub n: usize,
    /// For each class `s`: the class inputs (ascending) and their probabilities.
    pub classes: BTreeMap<u64, ClassDistribution>,
    /// Largest cross-class spread of any monomial expectation of degree `<= d`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub inputs: Vec<InputMask>,
    pub probs: Vec<f64>,
}

pub const FOOLING_MAX_N: usize = 20;
pub const FOOLING_MAX_M: u64 = 64;
const FOOLING_MAX_TABLEAU: usize = 60_000_000;

/// Expectation of the monomial `prod_{i in mask} x_i` under a class distribution.
pub fn monomial_expectation(dist: &ClassDistribution, mono: InputMask) -> f64 {
    dist.inputs
        .iter()
        .zip(&dist.probs)
        .filter(|(x, _)| *x & mono == mono)
        .map(|(_, p)| p)
        .sum()
}

/// Largest spread over classes of every monomial expectation of degree `1..=d`.
pub fn moment_spread(family: &FoolingFamily) -> f64 {
    monomials_up_to(family.n, family.degree)
        .into_iter()
        .filter(|&a| a != 0)
        .map(|a| {
            let vals: Vec<f64> = family.classes.values().map(|c| monomial_expectation(c, a)).collect();
            let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
            let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
            hi - lo
        })
        .fold(0.0, f64::max)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Vectors `c` with `c_g <= sizes_g` and `sum c <= total`.
fn count_vectors(sizes: &[usize], total: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &g in sizes {
        out = out
            .into_iter()
            .flat_map(|c: Vec<usize>| {
                let used: usize = c.iter().sum();
                (0..=g.min(total - used)).map(move |k| {
                    let mut c = c.clone();
                    c.push(k);
                    c
                })
            })
            .collect();
    }
    out
}

/// Solved over orbits of the group permuting equal-residue variables: the moment
/// constraints are invariant under it, so averaging any feasible family over the
/// group keeps it feasible and the optimum is attained by an orbit-uniform one.
pub fn fooling_distributions(z: &IntegerMultiset, d: usize) -> Result<FoolingFamily, DistributionError> {
    let n = z.len();
    let m = z.modulus();
    if n > FOOLING_MAX_N || m > FOOLING_MAX_M || d > n {
        return Err(DistributionError::TooLarge(format!(
            "need n <= {FOOLING_MAX_N}, m <= {FOOLING_MAX_M}, d <= n; got n={n}, m={m}, d={d}"
        )));
    }
    let zs = element_residues(z);
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (j, &r) in zs.iter().enumerate() {
        groups.entry(r).or_default().push(j);
    }
    let residues: Vec<u64> = groups.keys().copied().collect();
    let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
    // orbit = number of ones in each group
    let orbits = count_vectors(&sizes, n);
    let mut class_orbits: Vec<Vec<usize>> = vec![Vec::new(); m as usize];
    for (o, c) in orbits.iter().enumerate() {
        let s = c.iter().zip(&residues).map(|(&k, &r)| k as u64 % m * r % m).sum::<u64>() % m;
        class_orbits[s as usize].push(o);
    }
    if let Some(s) = class_orbits.iter().position(|c| c.is_empty()) {
        return Err(DistributionError::EmptyClass(s as u64));
    }
    let types: Vec<Vec<usize>> = count_vectors(&sizes, d).into_iter().filter(|a| a.iter().any(|&k| k > 0)).collect();
    let moment = |a: &[usize], c: &[usize]| -> f64 {
        a.iter().zip(c).zip(&sizes).map(|((&a, &c), &g)| binomial(c, a) / binomial(g, a)).product()
    };
    let rows = 2 * types.len() * (m as usize - 1) + m as usize;
    let cols = orbits.len() + 1;
    if rows * (cols + rows) > FOOLING_MAX_TABLEAU {
        return Err(DistributionError::TooLarge(format!(
            "fooling LP would have {rows} rows and {cols} columns"
        )));
    }
    let mut lp = LinearProgram::<f64>::new(Sense::Minimize);
    let vars: Vec<usize> = orbits.iter().map(|_| lp.add_var(0.0, false)).collect();
    let t = lp.add_var(1.0, false);
    for c in &class_orbits {
        lp.add_constraint(c.iter().map(|&o| (vars[o], 1.0)).collect(), Relation::Eq, 1.0);
    }
    for a in &types {
        let row = |s: usize, sign: f64| -> Vec<(usize, f64)> {
            class_orbits[s]
                .iter()
                .map(|&o| (vars[o], sign * moment(a, &orbits[o])))
                .filter(|&(_, v)| v != 0.0)
                .collect()
        };
        let base = row(0, -1.0);
        for s in 1..m as usize {
            let mut diff = row(s, 1.0);
            diff.extend(base.iter().cloned());
            let mut upper = diff.clone();
            upper.push((t, -1.0));
            lp.add_constraint(upper, Relation::Le, 0.0);
            let mut lower = diff;
            lower.push((t, 1.0));
            lp.add_constraint(lower, Relation::Ge, 0.0);
        }
    }
    let sol = lp.solve()?;
    let orbit_index: BTreeMap<Vec<usize>, usize> = orbits.iter().cloned().zip(0..).collect();
    let group_of: Vec<usize> = zs.iter().map(|r| residues.binary_search(r).unwrap()).collect();
    let mut family_classes: BTreeMap<u64, ClassDistribution> = (0..m)
        .map(|s| (s, ClassDistribution { inputs: Vec::new(), probs: Vec::new() }))
        .collect();
    for x in 0..1u32 << n {
        let mut c = vec![0usize; sizes.len()];
        for j in (0..n).filter(|j| x >> j & 1 == 1) {
            c[group_of[j]] += 1;
        }
        let size: f64 = c.iter().zip(&sizes).map(|(&k, &g)| binomial(g, k)).product();
        let p = sol.x[vars[orbit_index[&c]]].max(0.0) / size;
        let entry = family_classes.get_mut(&form_value(&zs, x, m)).expect("class exists");
        entry.inputs.push(x);
        entry.probs.push(p);
    }
    for dist in family_classes.values_mut() {
        let total: f64 = dist.probs.iter().sum();
        dist.probs.iter_mut().for_each(|p| *p /= total);
    }
    let mut family = FoolingFamily {
        m,
        degree: d,
        n,
        classes: family_classes,
        residual: 0.0,
    };
    family.residual = moment_spread(&family);
    if family.residual > 1e-9 {
        return Err(DistributionError::Infeasible {
            best_spread: family.residual,
        });
    }
    Ok(family)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(m: u64, z: &[i64]) -> IntegerMultiset {
        IntegerMultiset::from_i64(m, z).unwrap()
    }

    fn rats(v: &[(i64, i64)]) -> Vec<BigRational> {
        v.iter().map(|&(a, b)| BigRational::new(a.into(), b.into())).collect()
    }

    #[test]
    fn small_tables() {
        for method in [Method::Dp, Method::Walk] {
            assert_eq!(exact_distribution(&ms(2, &[1]), method).unwrap().probs(), rats(&[(1, 2), (1, 2)]));
            assert_eq!(exact_distribution(&ms(2, &[2]), method).unwrap().probs(), rats(&[(1, 1), (0, 1)]));
            assert_eq!(
                exact_distribution(&ms(3, &[1, 1]), method).unwrap().probs(),
                rats(&[(1, 4), (1, 2), (1, 4)])
            );
        }
    }

    #[test]
    fn walk_caps() {
        let big = IntegerMultiset::from_residues(513, &[1]).unwrap();
        assert!(matches!(exact_distribution(&big, Method::Walk), Err(DistributionError::TooLarge(_))));
    }

    #[test]
    fn wide_numerators_agree() {
        let z = IntegerMultiset::from_residues(7, &vec![3; 130]).unwrap();
        let a = exact_distribution(&z, Method::Dp).unwrap();
        let b = exact_distribution(&z, Method::Walk).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total(), BigRational::one());
    }

    #[test]
    fn classes() {
        assert_eq!(residue_class(&ms(2, &[1, 1]), 0, 24).unwrap(), vec![0b00, 0b11]);
        assert_eq!(residue_class(&ms(2, &[1, 1]), 1, 24).unwrap(), vec![0b01, 0b10]);
        assert!(residue_class(&ms(2, &[2, 2]), 1, 24).unwrap().is_empty());
        assert!(matches!(residue_class(&ms(2, &[1; 5]), 1, 4), Err(DistributionError::TooLarge(_))));
    }

    #[test]
    fn report_examples() {
        let r = uniformity_report(&ms(3, &[1, 1]), 0.0).unwrap();
        assert_eq!((r.observed_num.as_str(), r.observed_den.as_str()), ("1", "6"));
        assert!(r.sandwich_holds);
        let t = uniformity_report(&IntegerMultiset::trivial(5).unwrap(), 0.0).unwrap();
        // 32 subsets cannot split evenly over 5 classes: counts (8,6,6,6,6)
        assert_eq!((t.observed_num.as_str(), t.observed_den.as_str()), ("1", "20"));
        assert!((t.disc_bound - 0.5f64.powf(2.5)).abs() < 1e-12);
        let expect = (2.0 / (1.0 + t.disc)).log2() * 2.5 - 2.0;
        assert!((t.admissible_m_log2 - expect).abs() < 1e-12);
    }

    #[test]
    fn fooling_examples() {
        let f = fooling_distributions(&ms(2, &[1, 1]), 1).unwrap();
        assert!(f.residual <= 1e-12);
        for c in f.classes.values() {
            assert!((monomial_expectation(c, 1) - 0.5).abs() < 1e-12);
        }
        assert_eq!(fooling_distributions(&ms(2, &[2, 2]), 1).unwrap_err(), DistributionError::EmptyClass(1));
        assert!(fooling_distributions(&ms(3, &[1, 2, 1]), 0).is_ok());
    }

    #[test]
    fn table_json_roundtrip() {
        let t = exact_distribution(&ms(5, &[1, 2, 2, 4]), Method::Dp).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<DistributionTable>(&s).unwrap(), t);
    }
}
