//! Halfspaces with exact integer weights: the master halfspace of a multiset,
//! the hardest halfspace `h_n`, black-box approximants, the Krause-Pudlak
//! transform and the lifting to number-on-forehead problems.

use crate::approx::{newman_rational_sign, ApproxError, ApproxResult, Basis, BooleanFunctionTable, MAX_VARS};
use crate::construction::{analytic_c_eps_at, build_low_disc_set_with, Mode, PracticalOptions};
use crate::discrepancy::{digest_hex, disc, random_search, DiscrepancyCertificate, DiscrepancyError, IntegerMultiset};
use crate::distribution::{element_residues, RationalJson};
use crate::poly::{monomial_count, MultilinearPoly};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HalfspaceError {
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("argument vanishes at input {0:#b}")]
    Vanishes(u64),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Discrepancy(#[from] DiscrepancyError),
}

/// Exhaustive checks and tables run up to this many variables.
pub const EXHAUSTIVE_MAX_VARS: usize = 20;

mod big_vec {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

mod big_one {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn ser_rational<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    RationalJson::from(r).serialize(s)
}

fn de_rational<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
    RationalJson::deserialize(d)?.parse().map_err(serde::de::Error::custom)
}

/// Where a halfspace came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<IntegerMultiset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub copies: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_prime: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disc_certificate: Option<DiscrepancyCertificate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// `h(x) = sign(sum_i w_i x_i - theta)` on `{0,1}^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceSpec {
    pub n: usize,
    #[serde(with = "big_vec")]
    pub weights: Vec<BigInt>,
    #[serde(serialize_with = "ser_rational", deserialize_with = "de_rational")]
    pub threshold: BigRational,
    pub provenance: Provenance,
}

/// `A(x) = sum_i a_i x_i + c`, a positive multiple of the halfspace argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmallForm {
    pub a: Vec<i128>,
    pub c: i128,
}

impl SmallForm {
    pub fn eval(&self, x: u64) -> i128 {
        self.a.iter().enumerate().filter(|&(j, _)| j < 64 && x >> j & 1 == 1).map(|(_, w)| w).sum::<i128>() + self.c
    }

    /// `(min |A|, max |A|)` over the cube.
    pub fn abs_range(&self) -> (i128, i128) {
        let n = self.a.len();
        // Gray-code walk over [lo, hi), one weight update per step
        let chunk = |lo: u64, hi: u64| {
            let mut g = lo ^ (lo >> 1);
            let mut acc = self.eval(g);
            let mut best = (acc.abs(), acc.abs());
            for i in lo + 1..hi {
                let ng = i ^ (i >> 1);
                let j = (g ^ ng).trailing_zeros() as usize;
                acc += if ng >> j & 1 == 1 { self.a[j] } else { -self.a[j] };
                g = ng;
                best = (best.0.min(acc.abs()), best.1.max(acc.abs()));
            }
            best
        };
        let total = 1u64 << n;
        let pieces = 64u64.min(total);
        let step = total / pieces;
        (0..pieces)
            .into_par_iter()
            .map(|p| chunk(p * step, (p + 1) * step))
            .reduce(|| (i128::MAX, 0), |a, b| (a.0.min(b.0), a.1.max(b.1)))
    }
}

impl HalfspaceSpec {
    pub fn new(weights: Vec<BigInt>, threshold: BigRational, provenance: Provenance) -> Self {
        HalfspaceSpec { n: weights.len(), weights, threshold, provenance }
    }

    pub fn from_i64(weights: &[i64], theta_num: i64, theta_den: i64) -> Self {
        Self::new(
            weights.iter().map(|&w| BigInt::from(w)).collect(),
            BigRational::new(theta_num.into(), theta_den.into()),
            Provenance { kind: "custom".into(), ..Default::default() },
        )
    }

    /// `(a, c)` with `A(x) = sum a_i x_i + c = den(theta) * (sum w_i x_i - theta)`.
    pub fn integer_form(&self) -> (Vec<BigInt>, BigInt) {
        let q = self.threshold.denom();
        let a = self.weights.iter().map(|w| w * q).collect();
        (a, -self.threshold.numer().clone())
    }

    /// The integer form in `i128`, when every partial sum fits comfortably.
    pub fn small_form(&self) -> Option<SmallForm> {
        let (a, c) = self.integer_form();
        let total: BigInt = a.iter().map(|v| v.abs()).sum::<BigInt>() + c.abs();
        if total.bits() > 120 {
            return None;
        }
        Some(SmallForm { a: a.iter().map(|v| v.to_i128().expect("fits")).collect(), c: c.to_i128().expect("fits") })
    }

    /// Exact argument `A(x)` for `x` given as a bit vector.
    pub fn argument(&self, x: &[bool]) -> BigInt {
        let (a, c) = self.integer_form();
        a.iter().zip(x).filter(|(_, &b)| b).fold(c, |acc, (w, _)| acc + w)
    }

    pub fn eval_bits(&self, x: &[bool]) -> i8 {
        if self.argument(x).is_positive() {
            1
        } else {
            -1
        }
    }

    /// `h(x)` for `n <= 64`, `x` a mask with bit `j` holding `x_{j+1}`.
    pub fn eval(&self, x: u64) -> i8 {
        match self.small_form() {
            Some(f) => {
                if f.eval(x) > 0 {
                    1
                } else {
                    -1
                }
            }
            None => self.eval_bits(&(0..self.n).map(|j| x >> j & 1 == 1).collect::<Vec<_>>()),
        }
    }

    /// `Some(true)` when the argument never vanishes on the cube. A non-integer
    /// threshold decides it at once; otherwise exhaustive up to 20 variables.
    pub fn never_zero(&self) -> Option<bool> {
        if !self.threshold.is_integer() {
            return Some(true);
        }
        if self.n > EXHAUSTIVE_MAX_VARS {
            return None;
        }
        let f = self.small_form()?;
        Some(f.abs_range().0 > 0)
    }

    pub fn to_table(&self) -> Result<BooleanFunctionTable, HalfspaceError> {
        if self.n > MAX_VARS {
            return Err(HalfspaceError::TooLarge(format!("{} variables for a table", self.n)));
        }
        let f = self.small_form().ok_or_else(|| HalfspaceError::TooLarge("weights exceed 120 bits".into()))?;
        let mut zero = None;
        let t = BooleanFunctionTable::from_fn(self.n, |x| {
            let v = f.eval(x as u64);
            if v == 0 {
                zero.get_or_insert(x as u64);
            }
            if v > 0 {
                1
            } else {
                -1
            }
        })?;
        match zero {
            Some(x) => Err(HalfspaceError::Vanishes(x)),
            None => Ok(t),
        }
    }

    /// `|theta| + sum |w_i|` of the integer form.
    pub fn integer_weight_sum(&self) -> BigInt {
        let (a, c) = self.integer_form();
        a.iter().map(|v| v.abs()).sum::<BigInt>() + c.abs()
    }
}

/// `sign(1/2 + sum (z_j mod m) x_j - m sum y_j)` on `2|Z|` variables, `x` first.
pub fn build_master_halfspace(z: &IntegerMultiset) -> Result<HalfspaceSpec, HalfspaceError> {
    if z.is_empty() {
        return Err(HalfspaceError::BadParams("empty multiset".into()));
    }
    let m = z.modulus();
    let mut weights: Vec<BigInt> = element_residues(z).into_iter().map(BigInt::from).collect();
    weights.extend(std::iter::repeat(-BigInt::from(m)).take(z.len()));
    Ok(HalfspaceSpec::new(
        weights,
        BigRational::new((-1).into(), 2.into()),
        Provenance {
            kind: "master".into(),
            m: Some(m),
            z_digest: Some(digest_hex(z.digest())),
            z: Some(z.clone()),
            ..Default::default()
        },
    ))
}

/// How `build_hardest_halfspace` chooses `c'`.
#[derive(Debug, Clone, PartialEq)]
pub enum HardestMode {
    /// `c' = min{1/200, 1/(2 C_{1/10})}` with the module's analytic constant.
    Paper,
    /// User `c'`; `eps` is the discrepancy target, `seed` drives the construction.
    Demo { c_prime: BigRational, eps: f64, seed: u64 },
}

/// `C_{1/10}` as evaluated by the faithful parameter choice at `m = 2^62`.
pub fn paper_c_one_tenth() -> f64 {
    analytic_c_eps_at(1 << 62, 0.1)
}

pub fn paper_c_prime() -> f64 {
    (1.0f64 / 200.0).min(1.0 / (2.0 * paper_c_one_tenth()))
}

const DEMO_MAX_LOG_M: u64 = 40;

pub fn build_hardest_halfspace(n: usize, mode: &HardestMode) -> Result<HalfspaceSpec, HalfspaceError> {
    if n == 0 {
        return Err(HalfspaceError::BadParams("n must be at least 1".into()));
    }
    match mode {
        HardestMode::Paper => {
            let c_prime = paper_c_prime();
            if (n as f64) < 1.0 / c_prime {
                let mut weights = vec![BigInt::zero(); n];
                weights[0] = BigInt::from(-1);
                // (-1)^{x_1} = sign(1/2 - x_1)
                return Ok(HalfspaceSpec::new(
                    weights,
                    BigRational::new((-1).into(), 2.into()),
                    Provenance {
                        kind: "hardest".into(),
                        mode: Some("paper".into()),
                        c_prime: Some(format!("{c_prime:e}")),
                        notes: vec![format!(
                            "n < 1/c' = {:e}: the construction returns (-1)^(x_1), which meets the bound trivially",
                            1.0 / c_prime
                        )],
                        ..Default::default()
                    },
                ));
            }
            Err(HalfspaceError::TooLarge(format!("n >= 1/c' = {:e}", 1.0 / c_prime)))
        }
        HardestMode::Demo { c_prime, eps, seed } => {
            if !c_prime.is_positive() {
                return Err(HalfspaceError::BadParams("c' must be positive".into()));
            }
            let log_m = (c_prime * BigInt::from(n)).floor().to_integer();
            if log_m < BigInt::one() {
                return Err(HalfspaceError::BadParams(format!("floor(c' n) = {log_m} < 1")));
            }
            let log_m = log_m.to_u64().filter(|&v| v <= DEMO_MAX_LOG_M).ok_or_else(|| {
                HalfspaceError::TooLarge(format!("floor(c' n) = {log_m} exceeds {DEMO_MAX_LOG_M}"))
            })?;
            let m = 1u64 << log_m;
            let half = (n / 2).max(1);
            if half < 1 || (n < 2) {
                return Err(HalfspaceError::BadParams("n must be at least 2 in demo mode".into()));
            }
            let opts = PracticalOptions { size_cap: Some(half), ..Default::default() };
            let report = build_low_disc_set_with(m, *eps, Mode::Practical, *seed, &opts);
            let mut notes = report.notes.clone();
            let z = if report.final_set.len() <= half {
                report.final_set
            } else {
                let size = half.min((m - 1) as usize);
                notes.push(format!("construction exceeded n/2; best-effort random search at size {size}"));
                match random_search(m, size, *eps, *seed, 400) {
                    Ok(z) => z,
                    Err(DiscrepancyError::BudgetExhausted { best, .. }) => *best,
                    Err(e) => return Err(e.into()),
                }
            };
            let cert = disc(&z);
            if cert.upper() > *eps {
                notes.push(format!(
                    "certified disc {:.6} misses the target {eps}: sets of size <= n/2 cannot reach it here",
                    cert.upper()
                ));
            }
            // k copies with n/4 <= k|Z| <= n/2
            let copies = n.div_ceil(4 * z.len()).max(1);
            let dup = z.repeated(copies);
            let master = build_master_halfspace(&dup)?;
            let mut weights = master.weights;
            weights.resize(n, BigInt::zero());
            Ok(HalfspaceSpec::new(
                weights,
                master.threshold,
                Provenance {
                    kind: "hardest".into(),
                    mode: Some("demo".into()),
                    m: Some(m),
                    z_digest: Some(digest_hex(z.digest())),
                    z: Some(z),
                    copies: Some(copies),
                    c_prime: Some(c_prime.to_string()),
                    seed: Some(*seed),
                    disc_certificate: Some(cert),
                    notes,
                },
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlackboxKind {
    PolyLinear,
    RationalNewman,
}

impl std::str::FromStr for BlackboxKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "poly_linear" => Ok(BlackboxKind::PolyLinear),
            "rational_newman" => Ok(BlackboxKind::RationalNewman),
            other => Err(format!("unknown kind {other:?} (poly_linear, rational_newman)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackboxApprox {
    pub kind: BlackboxKind,
    pub result: ApproxResult,
    /// Exact error of the linear approximant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_error: Option<RationalText>,
    /// Range bound `N` of the integer form on the cube.
    pub big_n: String,
    /// `1 - 1/S` for the linear kind, `1 - N^{-1/d}` for the rational kind.
    pub bound: f64,
}

/// A rational as `num/den` text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalText(pub String);

impl RationalText {
    pub fn parse(&self) -> Option<BigRational> {
        let (n, d) = self.0.split_once('/').unwrap_or((&self.0, "1"));
        let (n, d): (BigInt, BigInt) = (n.parse().ok()?, d.parse().ok()?);
        (!d.is_zero()).then(|| BigRational::new(n, d))
    }
}

impl From<&BigRational> for RationalText {
    fn from(r: &BigRational) -> Self {
        RationalText(format!("{}/{}", r.numer(), r.denom()))
    }
}

const EXPAND_MAX_MONOMIALS: usize = 20_000;

/// Black-box approximants built from the integer form `A` of `h`.
///
/// The linear kind is `A(x) / S` with `S = |c| + sum |a_i|`; its error is
/// exactly `1 - min|A| / S`, which is `1 - 1/S` whenever `|A| = 1` somewhere.
/// The rational kind composes the Newman approximant on `[1, N]` with `A`.
pub fn blackbox_approx(h: &HalfspaceSpec, d: usize, kind: BlackboxKind) -> Result<BlackboxApprox, HalfspaceError> {
    if h.n > EXHAUSTIVE_MAX_VARS {
        return Err(HalfspaceError::TooLarge(format!("{} variables, exhaustive check needs <= {EXHAUSTIVE_MAX_VARS}", h.n)));
    }
    let form = h.small_form().ok_or_else(|| HalfspaceError::TooLarge("weights exceed 120 bits".into()))?;
    let (lo, hi) = form.abs_range();
    if lo == 0 {
        let x = (0..1u64 << h.n).find(|&x| form.eval(x) == 0).unwrap_or(0);
        return Err(HalfspaceError::Vanishes(x));
    }
    let n = h.n;
    let s: i128 = form.a.iter().map(|v| v.abs()).sum::<i128>() + form.c.abs();
    let linear = || -> MultilinearPoly {
        MultilinearPoly::linear(form.c as f64, &form.a.iter().map(|&v| v as f64).collect::<Vec<_>>())
    };
    match kind {
        BlackboxKind::PolyLinear => {
            let exact = BigRational::one() - BigRational::new(lo.into(), s.into());
            let p = linear().scale(1.0 / s as f64);
            let numerator = p.coeffs_over(&crate::poly::monomials_up_to(n, 1));
            Ok(BlackboxApprox {
                kind,
                result: ApproxResult {
                    d0: 1,
                    d1: 0,
                    error: exact.to_f64().unwrap_or(f64::NAN),
                    basis: Basis::Multilinear { n },
                    numerator,
                    denominator: vec![1.0],
                    dual_certificate: None,
                    lower_bound: None,
                },
                exact_error: Some(RationalText::from(&exact)),
                big_n: hi.to_string(),
                bound: 1.0 - 1.0 / s as f64,
            })
        }
        BlackboxKind::RationalNewman => {
            if d == 0 {
                return Err(HalfspaceError::BadParams("rational degree must be at least 1".into()));
            }
            // rescale so that |A| >= 1 becomes |A / lo| >= 1
            let big_n = hi as f64 / lo as f64;
            let (eval_r, bound, num, den): (Box<dyn Fn(f64) -> f64 + Sync>, f64, _, _) = if big_n <= 1.0 {
                (Box::new(|t: f64| t.signum()), 0.0, None, None)
            } else {
                let r = newman_rational_sign(big_n, d)?;
                let bound = r.bound;
                let rat = r.to_rational();
                (Box::new(move |t: f64| r.eval(t)), bound, Some(rat.num), Some(rat.den))
            };
            let scale = lo as f64;
            let error = (0..1u64 << n)
                .into_par_iter()
                .map(|x| {
                    let a = form.eval(x);
                    let target = if a > 0 { 1.0 } else { -1.0 };
                    (target - eval_r(a as f64 / scale)).abs()
                })
                .reduce(|| 0.0, f64::max);
            let expand = monomial_count(n, d) <= EXPAND_MAX_MONOMIALS;
            let inner = linear().scale(1.0 / scale);
            let (numerator, denominator, basis) = match (num, den) {
                (Some(p), Some(q)) if expand => {
                    let monos = crate::poly::monomials_up_to(n, d);
                    (
                        MultilinearPoly::compose(&p, &inner).coeffs_over(&monos),
                        MultilinearPoly::compose(&q, &inner).coeffs_over(&monos),
                        Basis::Multilinear { n },
                    )
                }
                (None, None) => (inner.coeffs_over(&crate::poly::monomials_up_to(n, 1)), vec![1.0], Basis::Multilinear { n }),
                _ => (Vec::new(), Vec::new(), Basis::Custom),
            };
            Ok(BlackboxApprox {
                kind,
                result: ApproxResult {
                    d0: d,
                    d1: d,
                    error,
                    basis,
                    numerator,
                    denominator,
                    dual_certificate: None,
                    lower_bound: None,
                },
                exact_error: None,
                big_n: format!("{hi}/{lo}"),
                bound,
            })
        }
    }
}

fn check_kp(n: usize) -> Result<(), HalfspaceError> {
    if 3 * n > MAX_VARS {
        return Err(HalfspaceError::TooLarge(format!("{} variables for the transform table", 3 * n)));
    }
    Ok(())
}

/// `f^KP(x, y, z) = f(w)` with `w_i = x_i` when `z_i = 0` and `y_i` when `z_i = 1`.
/// Variables are laid out as `x` (bits `0..n`), `y` (`n..2n`), `z` (`2n..3n`).
pub fn kp_transform(f: &BooleanFunctionTable) -> Result<BooleanFunctionTable, HalfspaceError> {
    let n = f.n();
    check_kp(n)?;
    let mask = (1u32 << n) - 1;
    Ok(BooleanFunctionTable::from_fn(3 * n, |v| {
        let (x, y, z) = (v & mask, (v >> n) & mask, (v >> (2 * n)) & mask);
        f.values()[((!z & x) | (z & y)) as usize]
    })?)
}

/// The same transform through `w_i = (x_i + y_i + (x_i xor z_i) - (y_i xor z_i)) / 2`.
pub fn kp_transform_arithmetic(f: &BooleanFunctionTable) -> Result<BooleanFunctionTable, HalfspaceError> {
    let n = f.n();
    check_kp(n)?;
    Ok(BooleanFunctionTable::from_fn(3 * n, |v| {
        let bit = |k: usize| (v >> k & 1) as i32;
        let w = (0..n).fold(0u32, |acc, i| {
            let (x, y, z) = (bit(i), bit(n + i), bit(2 * n + i));
            let twice = x + y + (x ^ z) - (y ^ z);
            debug_assert!(twice == 0 || twice == 2);
            acc | ((twice / 2) as u32) << i
        });
        f.values()[w as usize]
    })?)
}

/// `F(x_1, ..., x_k) = sign(w_0 + sum_{j,i} w_j prod_p x_{p,(j,i)})`, block `j` of
/// `m_blk` coordinates; coordinate `(j, i)` is bit `j * m_blk + i` of every party.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedProblemSpec {
    pub k: usize,
    pub n: usize,
    pub m_blk: usize,
    #[serde(with = "big_one")]
    pub w0: BigInt,
    /// Monomial weight shared by every coordinate of block `j`.
    #[serde(with = "big_vec")]
    pub weights: Vec<BigInt>,
}

impl LiftedProblemSpec {
    pub fn coordinates(&self) -> usize {
        self.n * self.m_blk
    }

    pub fn monomial_count(&self) -> usize {
        self.coordinates() + 1
    }

    /// `ceil(log2 l) + 2` for `l` monomials.
    pub fn upp_upper_bound(&self) -> u32 {
        let l = self.monomial_count() as u64;
        (64 - (l - 1).leading_zeros()) + 2
    }

    fn coordinate_hits(&self, parties: &[u64]) -> u64 {
        parties.iter().fold(u64::MAX, |acc, &x| acc & x)
    }

    /// Exact value of the sign argument.
    pub fn argument(&self, parties: &[u64]) -> BigInt {
        let hits = self.coordinate_hits(parties);
        let mut acc = self.w0.clone();
        for j in 0..self.n {
            let count = (0..self.m_blk).filter(|i| hits >> (j * self.m_blk + i) & 1 == 1).count();
            if count > 0 {
                acc += &self.weights[j] * BigInt::from(count);
            }
        }
        acc
    }

    pub fn eval(&self, parties: &[u64]) -> i8 {
        if self.argument(parties).is_positive() {
            1
        } else {
            -1
        }
    }

    /// Whether every block has at most one coordinate where all parties hold 1.
    pub fn in_promise(&self, parties: &[u64]) -> bool {
        let hits = self.coordinate_hits(parties);
        (0..self.n).all(|j| ((hits >> (j * self.m_blk)) & ((1u64 << self.m_blk) - 1)).count_ones() <= 1)
    }

    /// Block inputs `b_j = 1 - (number of all-ones coordinates in block j)`.
    pub fn block_input(&self, parties: &[u64]) -> u64 {
        let hits = self.coordinate_hits(parties);
        (0..self.n).fold(0, |acc, j| {
            let blk = (hits >> (j * self.m_blk)) & ((1u64 << self.m_blk) - 1);
            acc | ((blk == 0) as u64) << j
        })
    }
}

/// Lifts `h` through `b_j = (1 - UDISJ*)/2 = 1 - sum_i prod_p x_{p,(j,i)}`.
pub fn lift_to_nof(h: &HalfspaceSpec, k: usize, m_blk: usize) -> Result<LiftedProblemSpec, HalfspaceError> {
    if k == 0 || m_blk == 0 {
        return Err(HalfspaceError::BadParams("k and m_blk must be positive".into()));
    }
    if h.n * m_blk > 64 {
        return Err(HalfspaceError::TooLarge(format!("{} coordinates per party, at most 64", h.n * m_blk)));
    }
    let (a, c) = h.integer_form();
    let w0 = a.iter().fold(c, |acc, w| acc + w);
    Ok(LiftedProblemSpec { k, n: h.n, m_blk, w0, weights: a.iter().map(|w| -w).collect() })
}

/// Realising matrix `R = U V^T` of a two-party sign pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankFactorization {
    pub rows: usize,
    pub cols: usize,
    pub inner_dim: usize,
    /// Exact rank of the realising matrix.
    pub rank: usize,
    pub signs_match: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RectangleDiscrepancy {
    /// Maximum over all rectangles.
    Exact { value: f64 },
    /// Maximum over sampled rectangles; a lower bound on the discrepancy.
    Sampled { value: f64, samples: u64, seed: u64 },
}

impl RectangleDiscrepancy {
    pub fn value(&self) -> f64 {
        match self {
            RectangleDiscrepancy::Exact { value } | RectangleDiscrepancy::Sampled { value, .. } => *value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunicationReport {
    pub factorization: RankFactorization,
    pub sign_rank_bound: usize,
    pub upp_upper_bound: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rectangle_discrepancy: Option<RectangleDiscrepancy>,
    /// `log2(2 / disc)` for a supplied certified discrepancy upper bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pp_lower_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum RectangleMode {
    #[default]
    Skip,
    Exhaustive,
    Sampled { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CertificateOptions {
    pub rectangles: RectangleMode,
    pub supplied_disc: Option<f64>,
}

/// Largest side for the two-party matrix (`2^12` rows).
pub const MATRIX_MAX_COORDS: usize = 12;
/// Exhaustive rectangles enumerate subsets of the shorter side.
pub const RECT_EXHAUSTIVE_MAX_SIDE: usize = 16;
const RANK_DIRECT_MAX: usize = 256;

/// `pp >= log2(2 / disc)`.
pub fn pp_lower_bound(disc: f64) -> f64 {
    (2.0 / disc).log2()
}

/// The `+-1` sign matrix of a two-party problem; row `x`, column `y`.
pub fn sign_matrix(f: &LiftedProblemSpec) -> Result<Vec<Vec<i8>>, HalfspaceError> {
    if f.k != 2 {
        return Err(HalfspaceError::BadParams(format!("{} parties; the matrix needs 2", f.k)));
    }
    let l = f.coordinates();
    if l > MATRIX_MAX_COORDS {
        return Err(HalfspaceError::TooLarge(format!("{l} coordinates, at most {MATRIX_MAX_COORDS}")));
    }
    Ok((0..1u64 << l).map(|x| (0..1u64 << l).map(|y| f.eval(&[x, y])).collect()).collect())
}

/// Matrix as CSV, one row per line.
pub fn sign_matrix_csv(f: &LiftedProblemSpec) -> Result<String, HalfspaceError> {
    let m = sign_matrix(f)?;
    let mut out = String::new();
    for row in m {
        let line: Vec<&str> = row.iter().map(|&v| if v > 0 { "1" } else { "-1" }).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Exact rank by fraction-free elimination.
pub fn exact_rank(rows: &[Vec<BigInt>]) -> usize {
    let mut a: Vec<Vec<BigInt>> = rows.to_vec();
    let cols = a.first().map_or(0, |r| r.len());
    let mut rank = 0;
    let mut prev = BigInt::one();
    for c in 0..cols {
        let Some(p) = (rank..a.len()).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(rank, p);
        for i in rank + 1..a.len() {
            for j in c + 1..cols {
                let v = (&a[rank][c] * &a[i][j] - &a[i][c] * &a[rank][j]) / &prev;
                a[i][j] = v;
            }
            a[i][c] = BigInt::zero();
        }
        prev = a[rank][c].clone();
        rank += 1;
        if rank == a.len() {
            break;
        }
    }
    rank
}

/// Rank factorisation `R(x, y) = <(1, x_1, ..., x_l), (w_0, w_1 y_1, ..., w_l y_l)>`.
pub fn rank_factorization(f: &LiftedProblemSpec) -> Result<RankFactorization, HalfspaceError> {
    let m = sign_matrix(f)?;
    let l = f.coordinates();
    let side = 1usize << l;
    let coord_w = |i: usize| &f.weights[i / f.m_blk];
    let u: Vec<Vec<BigInt>> = (0..side as u64)
        .map(|x| std::iter::once(BigInt::one()).chain((0..l).map(|i| BigInt::from(x >> i & 1))).collect())
        .collect();
    let v: Vec<Vec<BigInt>> = (0..side as u64)
        .map(|y| std::iter::once(f.w0.clone()).chain((0..l).map(|i| coord_w(i) * BigInt::from(y >> i & 1))).collect())
        .collect();
    let entry = |x: usize, y: usize| -> BigInt { u[x].iter().zip(&v[y]).map(|(a, b)| a * b).sum() };
    let signs_match = (0..side).all(|x| (0..side).all(|y| entry(x, y).signum() == BigInt::from(m[x][y])));
    // U has full column rank, so rank(U V^T) = rank(V)
    let rank = if side <= RANK_DIRECT_MAX {
        let r: Vec<Vec<BigInt>> = (0..side).map(|x| (0..side).map(|y| entry(x, y)).collect()).collect();
        exact_rank(&r)
    } else {
        debug_assert_eq!(exact_rank(&u), l + 1);
        exact_rank(&v)
    };
    Ok(RankFactorization { rows: side, cols: side, inner_dim: l + 1, rank, signs_match })
}

/// `max_{S,T} |sum_{x in S, y in T} M(x,y)| / (rows * cols)` over all rectangles.
pub fn rectangle_discrepancy_exact(m: &[Vec<i8>]) -> Result<f64, HalfspaceError> {
    let (r, c) = (m.len(), m.first().map_or(0, |row| row.len()));
    let (short, long, at): (usize, usize, Box<dyn Fn(usize, usize) -> i64 + Sync>) = if r <= c {
        (r, c, Box::new(|s, l| m[s][l] as i64))
    } else {
        (c, r, Box::new(|s, l| m[l][s] as i64))
    };
    if short > RECT_EXHAUSTIVE_MAX_SIDE {
        return Err(HalfspaceError::TooLarge(format!("shorter side {short}, exhaustive limit {RECT_EXHAUSTIVE_MAX_SIDE}")));
    }
    // for a fixed subset of the short side, the best long-side subset takes
    // every positive column sum or every negative one
    let best = (1u64..1 << short)
        .into_par_iter()
        .map(|set| {
            let (mut pos, mut neg) = (0i64, 0i64);
            for l in 0..long {
                let s: i64 = (0..short).filter(|&i| set >> i & 1 == 1).map(|i| at(i, l)).sum();
                if s > 0 {
                    pos += s;
                } else {
                    neg -= s;
                }
            }
            pos.max(neg)
        })
        .max()
        .unwrap_or(0);
    Ok(best as f64 / (r * c) as f64)
}

/// Seeded random rectangles; every sample also takes the best column set for its rows.
pub fn rectangle_discrepancy_sampled(m: &[Vec<i8>], samples: u64, seed: u64) -> f64 {
    let (r, c) = (m.len(), m.first().map_or(0, |row| row.len()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sets: Vec<Vec<bool>> = (0..samples).map(|_| (0..r).map(|_| rng.gen::<bool>()).collect()).collect();
    let best = sets
        .par_iter()
        .map(|rows| {
            let (mut pos, mut neg) = (0i64, 0i64);
            for y in 0..c {
                let s: i64 = (0..r).filter(|&x| rows[x]).map(|x| m[x][y] as i64).sum();
                if s > 0 {
                    pos += s;
                } else {
                    neg -= s;
                }
            }
            pos.max(neg)
        })
        .max()
        .unwrap_or(0);
    best as f64 / (r * c) as f64
}

pub fn communication_certificates(f: &LiftedProblemSpec, opts: &CertificateOptions) -> Result<CommunicationReport, HalfspaceError> {
    let factorization = rank_factorization(f)?;
    let rectangle_discrepancy = match &opts.rectangles {
        RectangleMode::Skip => None,
        RectangleMode::Exhaustive => Some(RectangleDiscrepancy::Exact { value: rectangle_discrepancy_exact(&sign_matrix(f)?)? }),
        RectangleMode::Sampled { samples, seed } => Some(RectangleDiscrepancy::Sampled {
            value: rectangle_discrepancy_sampled(&sign_matrix(f)?, *samples, *seed),
            samples: *samples,
            seed: *seed,
        }),
    };
    let certified = opts.supplied_disc.or(match &rectangle_discrepancy {
        Some(RectangleDiscrepancy::Exact { value }) => Some(*value),
        _ => None,
    });
    Ok(CommunicationReport {
        sign_rank_bound: factorization.inner_dim,
        factorization,
        upp_upper_bound: f.upp_upper_bound(),
        rectangle_discrepancy,
        pp_lower_bound: certified.filter(|&d| d > 0.0).map(pp_lower_bound),
    })
}

/// Greatest common divisor of the integer form, for display.
pub fn content(h: &HalfspaceSpec) -> BigInt {
    let (a, c) = h.integer_form();
    a.iter().fold(c, |g, v| g.gcd(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn master_12() -> HalfspaceSpec {
        build_master_halfspace(&IntegerMultiset::from_i64(3, &[1, 2]).unwrap()).unwrap()
    }

    #[test]
    fn master_examples() {
        let h = master_12();
        let w: Vec<i64> = h.weights.iter().map(|v| v.to_i64().unwrap()).collect();
        assert_eq!(w, vec![1, 2, -3, -3]);
        assert_eq!(h.threshold, BigRational::new((-1).into(), 2.into()));
        assert_eq!(h.eval(0), 1);
        assert_eq!(h.never_zero(), Some(true));
        let f = h.small_form().unwrap();
        assert!((0..16).all(|x| f.eval(x) % 2 != 0));
        let json = serde_json::to_string(&h).unwrap();
        assert!(json.contains("\"-3\""));
        let back: HalfspaceSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn hardest_paper_fallback() {
        let h = build_hardest_halfspace(100, &HardestMode::Paper).unwrap();
        assert_eq!(h.n, 100);
        for x in [0u64, 1, 2, 3, u64::MAX] {
            assert_eq!(h.eval(x), if x & 1 == 1 { -1 } else { 1 });
        }
        assert!(paper_c_prime() < 1.0 / 200.0);
    }

    #[test]
    fn linear_blackbox() {
        let h = master_12();
        let r = blackbox_approx(&h, 1, BlackboxKind::PolyLinear).unwrap();
        // integer form 1 + 2x1 + 4x2 - 6y1 - 6y2: S = 19, min |A| = 1
        assert_eq!(r.exact_error.unwrap().parse().unwrap(), BigRational::new(18.into(), 19.into()));
        let maj = HalfspaceSpec::from_i64(&[-1, -1, -1], -7, 4);
        let r = blackbox_approx(&maj, 1, BlackboxKind::PolyLinear).unwrap();
        assert!(r.result.error < 1.0);
        assert_eq!(maj.to_table().unwrap(), BooleanFunctionTable::majority(3).unwrap());
    }

    #[test]
    fn newman_blackbox() {
        let h = master_12();
        for d in 1..=3 {
            let r = blackbox_approx(&h, d, BlackboxKind::RationalNewman).unwrap();
            assert!(r.result.error <= r.bound + 1e-9);
            let p = r.result.numerator_poly().unwrap();
            let q = r.result.denominator_poly().unwrap();
            let t = h.to_table().unwrap();
            for x in 0..16u32 {
                assert!((t.values()[x as usize] as f64 - p.eval(x) / q.eval(x)).abs() <= r.bound + 1e-9);
            }
        }
    }

    #[test]
    fn kp_examples() {
        let id = BooleanFunctionTable::new(1, vec![1, -1]).unwrap();
        let kp = kp_transform(&id).unwrap();
        // bits: x, y, z
        assert_eq!(kp.values(), &[1, -1, 1, -1, 1, 1, -1, -1]);
        assert_eq!(kp, kp_transform_arithmetic(&id).unwrap());
        let f = BooleanFunctionTable::omb(3).unwrap();
        let kp = kp_transform(&f).unwrap();
        for x in 0..8u32 {
            for y in 0..8u32 {
                assert_eq!(kp.values()[(x | y << 3) as usize], f.values()[x as usize]);
                assert_eq!(kp.values()[(x | y << 3 | 7 << 6) as usize], f.values()[y as usize]);
            }
        }
    }

    #[test]
    fn lifting_examples() {
        let h = master_12();
        let f = lift_to_nof(&h, 2, 2).unwrap();
        assert_eq!(f.monomial_count(), 9);
        let mut checked = 0;
        for x in 0..256u64 {
            for y in 0..256u64 {
                if f.in_promise(&[x, y]) {
                    assert_eq!(f.eval(&[x, y]), h.eval(f.block_input(&[x, y])));
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
        let solo = lift_to_nof(&h, 1, 1).unwrap();
        for x in 0..16u64 {
            assert_eq!(solo.eval(&[x]), h.eval(!x & 15));
        }
    }

    #[test]
    fn certificates() {
        let h = HalfspaceSpec::from_i64(&[1, 2, -4], -1, 2);
        let f = lift_to_nof(&h, 2, 1).unwrap();
        let rep = communication_certificates(&f, &CertificateOptions { rectangles: RectangleMode::Exhaustive, supplied_disc: None }).unwrap();
        assert!(rep.factorization.signs_match);
        assert!(rep.factorization.rank <= 4);
        let ones = vec![vec![1i8; 4]; 4];
        assert_eq!(rectangle_discrepancy_exact(&ones).unwrap(), 1.0);
        assert_eq!(exact_rank(&[vec![BigInt::one(); 3], vec![BigInt::one(); 3]]), 1);
        assert_eq!(pp_lower_bound(0.5), 2.0);
        let csv = sign_matrix_csv(&f).unwrap();
        assert_eq!(csv.lines().count(), 8);
    }
}
