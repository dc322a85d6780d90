//! Number theory and circulant spectra shared by the rest of the crate.
//!
//! Primes are `u64`; primality uses deterministic Miller-Rabin with the
//! first thirteen prime witnesses, which is exact for every `u64`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NumericError {
    #[error("{a} is not invertible modulo {m} (gcd = {gcd})")]
    NotCoprime { a: u64, m: u64, gcd: u64 },
    #[error("modulus must be at least 2, got {0}")]
    BadModulus(u64),
}

/// Primes `p` with `lo < p <= hi`, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimeRange {
    pub lo: f64,
    pub hi: f64,
    pub primes: Vec<u64>,
}

impl PrimeRange {
    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }
}

const MR_WITNESSES: [u64; 13] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &MR_WITNESSES {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &MR_WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Sieve of Eratosthenes up to and including `n`.
pub fn sieve(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if composite[i] {
            continue;
        }
        out.push(i as u64);
        let mut j = i * i;
        while j <= n {
            composite[j] = true;
            j += i;
        }
    }
    out
}

const SIEVE_LIMIT: u64 = 50_000_000;

/// Primes in the half-open real interval `(lo, hi]`.
pub fn primes_in_halfopen(lo: f64, hi: f64) -> PrimeRange {
    let lo_floor = if lo.is_finite() && lo > 0.0 { lo.floor() as u64 } else { 0 };
    let hi_floor = if hi.is_finite() && hi > 0.0 {
        hi.floor().min(u64::MAX as f64) as u64
    } else {
        0
    };
    let primes = if hi_floor < 2 || hi_floor <= lo_floor {
        Vec::new()
    } else if hi_floor <= SIEVE_LIMIT {
        segmented(lo_floor + 1, hi_floor)
    } else {
        (lo_floor + 1..=hi_floor).filter(|&p| is_prime(p)).collect()
    };
    PrimeRange { lo, hi, primes }
}

/// Number of primes `<= x`.
pub fn prime_pi(x: f64) -> usize {
    primes_in_halfopen(0.0, x).len()
}

fn segmented(a: u64, b: u64) -> Vec<u64> {
    let root = (b as f64).sqrt() as u64 + 1;
    let base = sieve(root);
    let len = (b - a + 1) as usize;
    let mut composite = vec![false; len];
    for &p in &base {
        let start = ((a + p - 1) / p).max(p) * p;
        let mut j = start;
        while j <= b {
            composite[(j - a) as usize] = true;
            j += p;
        }
    }
    (0..len)
        .filter(|&i| !composite[i] && a + i as u64 >= 2)
        .map(|i| a + i as u64)
        .collect()
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// The inverse of `a` modulo `m`, in `1..m`.
pub fn mod_inverse(a: u64, m: u64) -> Result<u64, NumericError> {
    if m < 2 {
        return Err(NumericError::BadModulus(m));
    }
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return Err(NumericError::NotCoprime { a, m, gcd: r0 as u64 });
    }
    Ok(t0.rem_euclid(m as i128) as u64)
}

/// Number of distinct prime divisors, by trial division.
pub fn distinct_prime_divisors(mut n: u64) -> u32 {
    let mut count = 0;
    let mut p = 2u64;
    while p.saturating_mul(p) <= n {
        if n % p == 0 {
            count += 1;
            while n % p == 0 {
                n /= p;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        count += 1;
    }
    count
}

/// `nu[k]` for every `k <= n`, by a linear pass over primes.
pub fn distinct_prime_divisor_table(n: usize) -> Vec<u8> {
    let mut nu = vec![0u8; n + 1];
    for p in 2..=n {
        if nu[p] == 0 {
            let mut j = p;
            while j <= n {
                nu[j] += 1;
                j += p;
            }
        }
    }
    nu
}

/// `exp(2 pi i j / m)` for `j in 0..m`, each evaluated independently.
pub fn roots_of_unity(m: usize) -> Vec<Complex64> {
    (0..m)
        .map(|j| {
            let theta = TAU * (j as f64) / (m as f64);
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirculantSpectrum {
    pub order: usize,
    pub first_row: Vec<Complex64>,
    pub eigenvalues: Vec<Complex64>,
    pub error_bound: f64,
}

const DIRECT_LIMIT: usize = 2048;

/// Eigenvalues `sum_j c_j w^{kj}` of the circulant matrix with the given first row.
///
/// Small orders use a root table indexed by `kj mod m`; larger orders use an
/// exact-length FFT.
pub fn circulant_eigenvalues(first_row: &[Complex64]) -> CirculantSpectrum {
    let m = first_row.len();
    assert!(m > 0, "circulant order must be positive");
    let eigenvalues = if m <= DIRECT_LIMIT {
        let roots = roots_of_unity(m);
        (0..m)
            .map(|k| {
                first_row
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * roots[(k * j) % m])
                    .sum()
            })
            .collect()
    } else {
        // inverse transform uses exp(+2 pi i jk/m), matching the definition
        let mut buf = first_row.to_vec();
        FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
        buf
    };
    let l1: f64 = first_row.iter().map(|c| c.norm()).sum();
    let error_bound = (m as f64) * l1 * f64::EPSILON;
    CirculantSpectrum {
        order: m,
        first_row: first_row.to_vec(),
        eigenvalues,
        error_bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_prime_ranges() {
        assert_eq!(primes_in_halfopen(1.5, 3.0).primes, vec![2, 3]);
        assert_eq!(primes_in_halfopen(2.5, 5.0).primes, vec![3, 5]);
        assert!(primes_in_halfopen(8.0, 10.0).is_empty());
        assert_eq!(primes_in_halfopen(50.0, 100.0).len(), 10);
    }

    #[test]
    fn miller_rabin_agrees_with_sieve() {
        let s = sieve(20_000);
        let mr: Vec<u64> = (0..=20_000).filter(|&n| is_prime(n)).collect();
        assert_eq!(s, mr);
        assert!(is_prime(18_446_744_073_709_551_557));
        assert!(!is_prime(3_215_031_751));
    }

    #[test]
    fn large_range_uses_trial_path() {
        let lo = 60_000_000_000.0;
        let r = primes_in_halfopen(lo, lo + 200.0);
        assert!(r.primes.iter().all(|&p| is_prime(p)));
        assert!(!r.is_empty());
    }

    #[test]
    fn inverses() {
        assert_eq!(mod_inverse(3, 7), Ok(5));
        assert_eq!(mod_inverse(1, 9), Ok(1));
        assert_eq!(mod_inverse(2, 19), Ok(10));
        assert!(matches!(mod_inverse(4, 6), Err(NumericError::NotCoprime { gcd: 2, .. })));
    }

    #[test]
    fn prime_divisor_counts() {
        assert_eq!(distinct_prime_divisors(1), 0);
        assert_eq!(distinct_prime_divisors(12), 2);
        assert_eq!(distinct_prime_divisors(30), 3);
        let table = distinct_prime_divisor_table(1000);
        for n in 1..=1000u64 {
            assert_eq!(table[n as usize] as u32, distinct_prime_divisors(n));
        }
    }

    #[test]
    fn circulant_examples() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let s = circulant_eigenvalues(&[c(0.0), c(1.0), c(1.0)]);
        let ev: Vec<f64> = s.eigenvalues.iter().map(|z| z.re).collect();
        assert!((ev[0] - 2.0).abs() < 1e-12);
        assert!((ev[1] + 1.0).abs() < 1e-12 && (ev[2] + 1.0).abs() < 1e-12);
        let id = circulant_eigenvalues(&[c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert!(id.eigenvalues.iter().all(|z| (z - c(1.0)).norm() < 1e-12));
        assert_eq!(circulant_eigenvalues(&[c(2.5)]).eigenvalues, vec![c(2.5)]);
    }

    #[test]
    fn fft_path_matches_direct() {
        let m = 3001;
        let row: Vec<Complex64> = (0..m)
            .map(|j| Complex64::new(((j * 7919) % 13) as f64 - 6.0, 0.0))
            .collect();
        let fast = circulant_eigenvalues(&row);
        let roots = roots_of_unity(m);
        for k in [0usize, 1, 17, 1500, 3000] {
            let direct: Complex64 = row.iter().enumerate().map(|(j, c)| c * roots[(k * j) % m]).sum();
            assert!((direct - fast.eigenvalues[k]).norm() <= fast.error_bound);
        }
    }
}
