//! m-discrepancy of integer multisets.
//!
//! `disc(Z, m) = max_{1 <= k < m} |(1/n) sum_j w^{k z_j}|` with `w = exp(2 pi i/m)`.
//! Sparse inputs are evaluated directly over the nonzero frequencies with
//! exact integer phase indices; dense inputs go through an exact-length FFT.
//! No zero padding is ever used: the values live at the exact m-th roots.

use crate::numeric::roots_of_unity;
use num_bigint::{BigInt, Sign};
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscrepancyError {
    #[error("modulus must be at least 2, got {0}")]
    BadModulus(u64),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("no set with disc <= {eps} after {budget} trials (best {best_value})")]
    BudgetExhausted {
        eps: f64,
        budget: u64,
        best_value: f64,
        best: Box<IntegerMultiset>,
    },
}

/// A multiset of integers together with its residues modulo `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerMultiset {
    modulus: u64,
    elements: Vec<BigInt>,
    residues: Vec<u64>,
}

impl IntegerMultiset {
    pub fn new(modulus: u64, elements: Vec<BigInt>) -> Result<Self, DiscrepancyError> {
        if modulus < 2 {
            return Err(DiscrepancyError::BadModulus(modulus));
        }
        let m = BigInt::from(modulus);
        let mut residues: Vec<u64> = elements
            .iter()
            .map(|z| z.mod_floor(&m).to_u64().expect("residue fits in u64"))
            .collect();
        residues.sort_unstable();
        Ok(Self {
            modulus,
            elements,
            residues,
        })
    }

    pub fn from_i64(modulus: u64, elements: &[i64]) -> Result<Self, DiscrepancyError> {
        Self::new(modulus, elements.iter().map(|&z| BigInt::from(z)).collect())
    }

    pub fn from_residues(modulus: u64, residues: &[u64]) -> Result<Self, DiscrepancyError> {
        Self::new(modulus, residues.iter().map(|&z| BigInt::from(z)).collect())
    }

    /// `{0, 1, ..., m-1}`.
    pub fn trivial(modulus: u64) -> Result<Self, DiscrepancyError> {
        let all: Vec<u64> = (0..modulus).collect();
        Self::from_residues(modulus, &all)
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn elements(&self) -> &[BigInt] {
        &self.elements
    }

    /// Residues modulo `m`, ascending, with multiplicity.
    pub fn residues(&self) -> &[u64] {
        &self.residues
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `(residue, multiplicity)` for every residue that occurs.
    pub fn support(&self) -> Vec<(u64, u64)> {
        let mut out: Vec<(u64, u64)> = Vec::new();
        for &r in &self.residues {
            match out.last_mut() {
                Some((last, c)) if *last == r => *c += 1,
                _ => out.push((r, 1)),
            }
        }
        out
    }

    /// Dense frequency vector of length `m`.
    pub fn freq(&self) -> Vec<u64> {
        let mut f = vec![0u64; self.modulus as usize];
        for &r in &self.residues {
            f[r as usize] += 1;
        }
        f
    }

    pub fn negated(&self) -> Self {
        Self::new(self.modulus, self.elements.iter().map(|z| -z).collect())
            .expect("modulus already validated")
    }

    pub fn reduced(&self) -> Self {
        Self::from_residues(self.modulus, &self.residues).expect("modulus already validated")
    }

    pub fn repeated(&self, copies: usize) -> Self {
        let elements = (0..copies).flat_map(|_| self.elements.iter().cloned()).collect();
        Self::new(self.modulus, elements).expect("modulus already validated")
    }

    /// Same residues viewed modulo a different modulus.
    pub fn with_modulus(&self, modulus: u64) -> Result<Self, DiscrepancyError> {
        Self::new(modulus, self.elements.clone())
    }

    /// 64-bit FNV-1a over the ascending residues, each encoded as 8 little-endian bytes.
    pub fn digest(&self) -> u64 {
        fnv1a64(self.residues.iter().flat_map(|r| r.to_le_bytes()))
    }
}

pub fn fnv1a64(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn digest_hex(d: u64) -> String {
    format!("{d:016x}")
}

#[derive(Serialize, Deserialize)]
struct MultisetJson {
    modulus: u64,
    elements: Vec<String>,
}

impl Serialize for IntegerMultiset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MultisetJson {
            modulus: self.modulus,
            elements: self.elements.iter().map(|z| z.to_string()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntegerMultiset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = MultisetJson::deserialize(d)?;
        let elements = raw
            .elements
            .iter()
            .map(|s| s.parse::<BigInt>().map_err(D::Error::custom))
            .collect::<Result<Vec<_>, _>>()?;
        IntegerMultiset::new(raw.modulus, elements).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyCertificate {
    pub m: u64,
    pub n: u64,
    pub value: f64,
    pub argmax_k: u64,
    pub numeric_error: f64,
    pub elements_digest: String,
}

impl DiscrepancyCertificate {
    /// Upper end of the certified interval.
    pub fn upper(&self) -> f64 {
        self.value + self.numeric_error
    }
}

/// Largest `|sum|` over `k` in `1..=m/2`, smallest `k` on ties.
fn argmax_magnitude(values: impl IndexedParallelIterator<Item = (u64, f64)>) -> (u64, f64) {
    values.reduce(
            || (u64::MAX, -1.0),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        )
}

fn use_fft(m: u64, support: usize) -> bool {
    m > 64 && (support as f64) > 24.0 * (m as f64).log2()
}

#[inline]
fn phase(k: u64, r: u64, m: u64) -> usize {
    if m <= u32::MAX as u64 {
        ((k * r) % m) as usize
    } else {
        ((k as u128 * r as u128) % m as u128) as usize
    }
}

/// Fourier magnitudes `|sum_j f_j w^{kj}|` for `k` in `1..=m/2` of a sparse frequency list.
fn sparse_magnitudes(m: u64, support: &[(u64, u64)]) -> Vec<f64> {
    let roots = roots_of_unity(m as usize);
    let half = (m / 2) as usize;
    (1..half + 1)
        .into_par_iter()
        .with_min_len(256)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(r, c) in support {
                acc += roots[phase(k as u64, r, m)] * c as f64;
            }
            acc.norm()
        })
        .collect()
}

fn dense_magnitudes(m: u64, freq: &[u64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = freq.iter().map(|&c| Complex64::new(c as f64, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m as usize).process(&mut buf);
    buf[1..=(m / 2) as usize].iter().map(|z| z.norm()).collect()
}

/// The m-discrepancy with its maximizing frequency and a rigorous rounding bound.
pub fn disc(z: &IntegerMultiset) -> DiscrepancyCertificate {
    let m = z.modulus;
    let n = z.len() as u64;
    let digest = digest_hex(z.digest());
    if n == 0 {
        return DiscrepancyCertificate {
            m,
            n,
            value: 0.0,
            argmax_k: 1,
            numeric_error: 0.0,
            elements_digest: digest,
        };
    }
    let support = z.support();
    let (mags, numeric_error) = if use_fft(m, support.len()) {
        let freq = z.freq();
        let l2: f64 = freq.iter().map(|&c| (c as f64).powi(2)).sum::<f64>().sqrt();
        let bound = 8.0 * f64::EPSILON * ((m as f64).log2() + 1.0) * (m as f64).sqrt() * l2 / n as f64;
        (dense_magnitudes(m, &freq), bound)
    } else {
        let bound = 4.0 * f64::EPSILON * (support.len() as f64 + 8.0);
        (sparse_magnitudes(m, &support), bound)
    };
    let (k, mag) = argmax_magnitude(mags.into_par_iter().enumerate().map(|(i, v)| (i as u64 + 1, v)));
    DiscrepancyCertificate {
        m,
        n,
        value: (mag / n as f64).clamp(0.0, 1.0),
        argmax_k: k,
        numeric_error,
        elements_digest: digest,
    }
}

/// `disc(Z, m) > eps`, stopping at the first witness frequency.
pub fn disc_exceeds(m: u64, residues: &[u64], eps: f64) -> bool {
    let n = residues.len() as f64;
    if residues.is_empty() {
        return false;
    }
    let roots = roots_of_unity(m as usize);
    let limit = eps * n;
    (1..(m / 2) as usize + 1).into_par_iter().with_min_len(512).any(|k| {
        let acc: Complex64 = residues.iter().map(|&r| roots[phase(k as u64, r, m)]).sum();
        acc.norm() > limit
    })
}

/// Fixed-point bits used by the exact cross-check.
const FIXED_BITS: u64 = 192;
const PI_DIGITS: &str = "3.14159265358979323846264338327950288419716939937510582097494459230781640628620899";

fn fixed_pi() -> BigInt {
    let digits: String = PI_DIGITS.chars().filter(|c| c.is_ascii_digit()).collect();
    let num: BigInt = digits.parse().expect("pi digits");
    let den = BigInt::from(10u32).pow((digits.len() - 1) as u32);
    (num << FIXED_BITS) / den
}

/// `cos(2 pi j / m)` scaled by `2^FIXED_BITS`, via Taylor series in integers.
fn fixed_cos(j: u64, m: u64, pi: &BigInt) -> BigInt {
    let x = (pi * BigInt::from(2 * j)) / BigInt::from(m);
    let x2 = (&x * &x) >> FIXED_BITS;
    let mut term = BigInt::from(1) << FIXED_BITS;
    let mut sum = term.clone();
    for i in 1..120u64 {
        term = -(&term * &x2 >> FIXED_BITS) / BigInt::from((2 * i - 1) * (2 * i));
        if term.is_zero() {
            break;
        }
        sum += &term;
    }
    sum
}

/// Exact-arithmetic cross-check: `|S_k|^2 = sum_d C_d cos(2 pi k d/m)` with
/// integer autocorrelations `C_d` and fixed-point cosines accurate to ~2^-180.
/// Returns `(value, argmax_k)`. Intended for small moduli.
pub fn disc_exact(z: &IntegerMultiset) -> (f64, u64) {
    let m = z.modulus;
    let n = z.len();
    if n == 0 {
        return (0.0, 1);
    }
    let f = z.freq();
    let mu = m as usize;
    let corr: Vec<BigInt> = (0..mu)
        .map(|d| (0..mu).map(|a| BigInt::from(f[a] * f[(a + d) % mu])).sum())
        .collect();
    let pi = fixed_pi();
    let cos: Vec<BigInt> = (0..m).map(|j| fixed_cos(j, m, &pi)).collect();
    let mut best: Option<(BigInt, u64)> = None;
    for k in 1..m {
        let s: BigInt = (0..mu)
            .map(|d| &corr[d] * &cos[((k as usize) * d) % mu])
            .sum();
        if best.as_ref().map_or(true, |(b, _)| s > *b) {
            best = Some((s, k));
        }
    }
    let (sq, k) = best.expect("m >= 2");
    let sq = if sq.sign() == Sign::Minus { BigInt::zero() } else { sq };
    // |S|^2 / n^2 as a float, then the root
    let scaled = (sq << 64u32) / (BigInt::from(n as u64 * n as u64) << FIXED_BITS);
    let ratio = scaled.to_f64().unwrap_or(0.0) / 2f64.powi(64);
    (ratio.sqrt(), k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryBounds {
    /// `4 m exp(-n eps^2 / 8)`.
    pub tail_bound: f64,
    /// `1 - 2 pi / floor((m-1)^(1/n))`, clamped at zero.
    pub floor: f64,
}

/// `floor(x^(1/n))` exactly.
pub fn integer_root(x: u64, n: u32) -> u64 {
    if n == 1 || x <= 1 {
        return x;
    }
    let pow_le = |r: u64| -> bool {
        let mut acc: u128 = 1;
        for _ in 0..n {
            acc *= r as u128;
            if acc > x as u128 {
                return false;
            }
        }
        true
    };
    let mut r = (x as f64).powf(1.0 / n as f64).round() as u64 + 1;
    while !pow_le(r) {
        r -= 1;
    }
    while pow_le(r + 1) {
        r += 1;
    }
    r
}

pub fn theory_bounds(n: u64, m: u64, eps: f64) -> TheoryBounds {
    let tail_bound = 4.0 * m as f64 * (-(n as f64) * eps * eps / 8.0).exp();
    let root = integer_root(m.saturating_sub(1), n.min(u32::MAX as u64) as u32);
    let floor = if root == 0 {
        0.0
    } else {
        (1.0 - std::f64::consts::TAU / root as f64).max(0.0)
    };
    TheoryBounds { tail_bound, floor }
}

/// Seeded rejection sampling of `size` distinct nonzero residues with `disc <= eps`.
pub fn random_search(
    m: u64,
    size: usize,
    eps: f64,
    seed: u64,
    budget: u64,
) -> Result<IntegerMultiset, DiscrepancyError> {
    if m < 2 {
        return Err(DiscrepancyError::BadModulus(m));
    }
    if size == 0 || size as u64 > m - 1 {
        return Err(DiscrepancyError::PreconditionViolated(format!(
            "need 1 <= size <= m-1, got size {size} for m {m}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) || budget == 0 {
        return Err(DiscrepancyError::PreconditionViolated(format!(
            "need 0 < eps < 1 and budget >= 1, got eps {eps}, budget {budget}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, IntegerMultiset)> = None;
    for _ in 0..budget {
        let mut residues: Vec<u64> = index::sample(&mut rng, (m - 1) as usize, size)
            .into_iter()
            .map(|i| i as u64 + 1)
            .collect();
        residues.sort_unstable();
        let candidate = IntegerMultiset::from_residues(m, &residues)?;
        let cert = disc(&candidate);
        if cert.value <= eps {
            return Ok(candidate);
        }
        if best.as_ref().map_or(true, |(v, _)| cert.value < *v) {
            best = Some((cert.value, candidate));
        }
    }
    let (best_value, best) = best.expect("budget >= 1");
    Err(DiscrepancyError::BudgetExhausted {
        eps,
        budget,
        best_value,
        best: Box::new(best),
    })
}
