//! Derandomized construction of sparse low-discrepancy sets.
//!
//! The iteration lemma lifts equal-size sets `S_p` modulo small primes to a
//! set modulo `m`:
//! `S = {(r + s * (p^-1 mod m)) mod m : 1 <= r <= R, p in (P/2, P] prime, p !| m, s in S_p}`.
//! Three applications of it (stage 1 sets modulo primes near `P'`, stage 2
//! sets modulo primes near `P''`, stage 3 the final set modulo `m`) give the
//! explicit construction. Every output is certified by [`disc`].

use crate::discrepancy::{disc, random_search, DiscrepancyCertificate, DiscrepancyError, IntegerMultiset};
use crate::numeric::{distinct_prime_divisors, mod_inverse, prime_pi, primes_in_halfopen, sieve};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("sets S_p have unequal sizes: {0:?}")]
    CardinalityMismatch(BTreeMap<u64, usize>),
    #[error(transparent)]
    Discrepancy(#[from] DiscrepancyError),
}

/// Input to one application of the iteration lemma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationInput {
    pub m: u64,
    pub r: u64,
    pub p: f64,
    /// One set per prime `p in (P/2, P]` with `p !| m`; each a subset of `1..p`.
    pub sets: BTreeMap<u64, Vec<u64>>,
}

impl IterationInput {
    /// Primes the lemma ranges over for this `(m, P)`.
    pub fn primes(m: u64, p: f64) -> Vec<u64> {
        primes_in_halfopen(p / 2.0, p)
            .primes
            .into_iter()
            .filter(|q| m % q != 0)
            .collect()
    }

    fn validate_structure(&self) -> Result<(), ConstructionError> {
        if self.m < 2 || self.r < 1 || self.p < 2.0 {
            return Err(ConstructionError::PreconditionViolated(format!(
                "need m >= 2, R >= 1, P >= 2; got m={}, R={}, P={}",
                self.m, self.r, self.p
            )));
        }
        let expected = Self::primes(self.m, self.p);
        let given: Vec<u64> = self.sets.keys().copied().collect();
        if expected != given {
            return Err(ConstructionError::PreconditionViolated(format!(
                "sets must be indexed by exactly the primes {expected:?}, got {given:?}"
            )));
        }
        for (&p, s) in &self.sets {
            if s.iter().any(|&x| x == 0 || x >= p) {
                return Err(ConstructionError::PreconditionViolated(format!(
                    "S_{p} must be a subset of 1..{p}"
                )));
            }
            let mut sorted = s.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != s.len() {
                return Err(ConstructionError::PreconditionViolated(format!("S_{p} has repeated elements")));
            }
        }
        let sizes: BTreeMap<u64, usize> = self.sets.iter().map(|(&p, s)| (p, s.len())).collect();
        if sizes.values().collect::<std::collections::BTreeSet<_>>().len() > 1 {
            return Err(ConstructionError::CardinalityMismatch(sizes));
        }
        Ok(())
    }
}

/// One application of the iteration lemma. Output size is `R * sum |S_p|`;
/// `m >= P^2 (R+1)` guarantees the elements are distinct and nonzero.
pub fn iterate(inp: &IterationInput) -> Result<IntegerMultiset, ConstructionError> {
    if (inp.m as f64) < inp.p * inp.p * (inp.r + 1) as f64 {
        return Err(ConstructionError::PreconditionViolated(format!(
            "m = {} < P^2 (R+1) = {}",
            inp.m,
            inp.p * inp.p * (inp.r + 1) as f64
        )));
    }
    iteration_set(inp)
}

/// The lemma's set formula with only the structural checks (prime index set,
/// subsets of `1..p`, equal sizes); the size condition on `m` is not enforced.
pub fn iteration_set(inp: &IterationInput) -> Result<IntegerMultiset, ConstructionError> {
    inp.validate_structure()?;
    let m = inp.m;
    let mut residues = Vec::new();
    for r in 1..=inp.r {
        for (&p, s) in &inp.sets {
            let inv = mod_inverse(p, m).expect("p does not divide m");
            for &x in s {
                let v = (r as u128 + x as u128 * inv as u128) % m as u128;
                residues.push(v as u64);
            }
        }
    }
    Ok(IntegerMultiset::from_residues(m, &residues)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationConstants {
    /// `c = 4 C^2`.
    pub c: f64,
    pub big_c: f64,
    /// Largest `P` over which the prime-count inequality was checked.
    pub p_max: u64,
    /// Range `[m_min, m_max]` over which the divisor-count inequality was checked.
    pub m_min: u64,
    pub m_max: u64,
}

const P_MAX: u64 = 1_000_000;
const M_MIN: u64 = 3;
const M_MAX: u64 = 10_000_000;

/// The smallest `C >= 1` with `pi(P) - pi(P/2) >= P / (C log2 P)` for all real
/// `P in [C, P_MAX]` and `max_{k <= m} nu(k) <= C log2 m / log2 log2 m` for all
/// integers `m in [M_MIN, M_MAX]`, together with `c = 4 C^2`.
pub fn iteration_constants() -> IterationConstants {
    static CACHE: OnceLock<IterationConstants> = OnceLock::new();
    *CACHE.get_or_init(compute_constants)
}

fn compute_constants() -> IterationConstants {
    let primes = sieve(P_MAX);
    // breakpoints where pi(P) - pi(P/2) changes: P = p (gain) and P = 2p (loss)
    let mut events: Vec<(u64, i64)> = primes.iter().map(|&p| (p, 1)).collect();
    events.extend(primes.iter().filter(|&&p| 2 * p <= P_MAX).map(|&p| (2 * p, -1)));
    events.sort_unstable();
    let ratio = |p: f64, count: i64| p / (p.log2() * count as f64);
    // pieces [a, b) with constant count; on each, P / log2 P is convex so the
    // supremum sits at an endpoint (left end included, right end as a limit)
    let mut pieces: Vec<(f64, f64, i64)> = Vec::new();
    let mut count = 0i64;
    let mut start = 2.0;
    let mut i = 0;
    while i < events.len() {
        let at = events[i].0;
        let mut delta = 0;
        while i < events.len() && events[i].0 == at {
            delta += events[i].1;
            i += 1;
        }
        if at as f64 > start && count > 0 {
            pieces.push((start, at as f64, count));
        }
        count += delta;
        start = at as f64;
    }
    if (P_MAX as f64) > start && count > 0 {
        pieces.push((start, P_MAX as f64, count));
    }
    let sup_from = |c: f64| -> f64 {
        pieces
            .iter()
            .filter(|(_, b, _)| *b > c)
            .map(|&(a, b, k)| ratio(a.max(c), k).max(ratio(b, k)))
            .fold(0.0, f64::max)
    };
    // divisor side: max nu(k) for k <= m is the number of primorials <= m
    let mut primorials = Vec::new();
    let mut acc = 1u64;
    for &p in &primes {
        match acc.checked_mul(p) {
            Some(v) if v <= M_MAX => {
                acc = v;
                primorials.push(v);
            }
            _ => break,
        }
    }
    let mut nu_side: f64 = 0.0;
    for m in M_MIN..=M_MAX {
        let nu_max = primorials.iter().filter(|&&q| q <= m).count() as f64;
        let lm = (m as f64).log2();
        nu_side = nu_side.max(nu_max * lm.log2() / lm);
    }
    let (mut lo, mut hi) = (1.0f64, 64.0f64);
    let ok = |c: f64| c >= nu_side && c >= sup_from(c);
    if ok(lo) {
        hi = lo;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let big_c = hi * (1.0 + 1e-12);
    IterationConstants {
        c: 4.0 * big_c * big_c,
        big_c,
        p_max: P_MAX,
        m_min: M_MIN,
        m_max: M_MAX,
    }
}

/// Per-frequency check of the two correlation bounds for an iterated set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaimCheck {
    pub k: u64,
    pub value: f64,
    pub bound_near: f64,
    pub bound_far: f64,
}

impl ClaimCheck {
    pub fn slack(&self) -> f64 {
        self.bound_near.min(self.bound_far) - self.value
    }
}

/// For every `k in 1..m`: `|(1/|S|) sum_{s in S} e(ks/m)|` against
/// `2 pi min(k, m-k)/m + max_p disc(S_p, p) + (nu(k) + nu(m-k))/|P|` and
/// `m / (2 R min(k, m-k))`.
pub fn correlation_claims(inp: &IterationInput) -> Result<Vec<ClaimCheck>, ConstructionError> {
    let s = iterate(inp)?;
    let m = inp.m;
    let n = s.len() as f64;
    let max_sub = inp
        .sets
        .iter()
        .map(|(&p, sp)| disc(&IntegerMultiset::from_residues(p, sp).expect("p >= 2")).value)
        .fold(0.0, f64::max);
    let n_primes = inp.sets.len() as f64;
    let roots = crate::numeric::roots_of_unity(m as usize);
    let support = s.support();
    Ok((1..m as usize)
        .into_par_iter()
        .map(|k| {
            let k = k as u64;
            let acc: Complex64 = support
                .iter()
                .map(|&(r, c)| roots[((k as u128 * r as u128) % m as u128) as usize] * c as f64)
                .sum();
            let near = k.min(m - k);
            let nu = (distinct_prime_divisors(k) + distinct_prime_divisors(m - k)) as f64;
            ClaimCheck {
                k,
                value: acc.norm() / n,
                bound_near: TAU * near as f64 / m as f64 + max_sub + nu / n_primes,
                bound_far: m as f64 / (2.0 * inp.r as f64 * near as f64),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Paper,
    Practical,
    Random,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(Mode::Paper),
            "practical" => Ok(Mode::Practical),
            "random" => Ok(Mode::Random),
            other => Err(format!("unknown mode {other:?} (paper, practical, random)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Trivial,
    ThreeStage,
    RandomSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: u8,
    /// The `P` the stage ranges primes over (`P'` for stages 1-2, `P''` for stage 3).
    pub p_param: f64,
    pub r: u64,
    pub primes: usize,
    pub set_size: usize,
    pub max_disc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c: f64,
    pub big_c: f64,
    pub delta: f64,
    /// `|Z| / log2 m` of this output.
    pub c_eps_observed: f64,
    /// Size bound of the faithful parameter choice divided by `log2 m`.
    pub c_eps_analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub mode: Mode,
    pub m: u64,
    pub eps: f64,
    pub seed: u64,
    pub branch: Branch,
    pub stages: Vec<StageRecord>,
    pub final_set: IntegerMultiset,
    pub certificate: DiscrepancyCertificate,
    pub constants: Constants,
    pub notes: Vec<String>,
}

/// Tunables for the practical and random modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PracticalOptions {
    /// Stage-1 discrepancy target; defaults to `eps`.
    pub delta: Option<f64>,
    /// Upper bound on `|Z|`; defaults to `floor(40 log2 m)`.
    pub size_cap: Option<usize>,
    /// Number of three-stage configurations tried before falling back.
    pub attempts: usize,
    /// Trials per size in the random-search fallback.
    pub search_budget: u64,
}

impl Default for PracticalOptions {
    fn default() -> Self {
        Self {
            delta: None,
            size_cap: None,
            attempts: 6,
            search_budget: 400,
        }
    }
}

/// Parameters of one three-stage run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StagePlan {
    pub p1: f64,
    pub t: usize,
    pub r2: u64,
    pub p2: f64,
    pub r3: u64,
    pub delta: f64,
}

/// Stage 1: a `t`-subset of `1..p` with small discrepancy modulo `p`.
fn stage_one_set(p: u64, t: usize, delta: f64, seed: u64) -> Vec<u64> {
    let budget = 2000;
    let mut best = match random_search(p, t, delta.min(0.999_999), seed, budget) {
        Ok(z) => z.residues().to_vec(),
        Err(DiscrepancyError::BudgetExhausted { best, .. }) => best.residues().to_vec(),
        Err(_) => (1..=t as u64).collect(),
    };
    let value = |s: &[u64]| disc(&IntegerMultiset::from_residues(p, s).expect("p >= 2")).value;
    if value(&best) > delta && p <= 31 && binomial(p - 1, t as u64) <= 200_000 {
        let mut best_v = value(&best);
        for combo in Combinations::new((p - 1) as usize, t) {
            let cand: Vec<u64> = combo.iter().map(|&i| i as u64 + 1).collect();
            let v = value(&cand);
            if v < best_v - 1e-15 {
                best_v = v;
                best = cand;
                if v <= delta {
                    break;
                }
            }
        }
    }
    best
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Lexicographic `t`-subsets of `0..n`.
struct Combinations {
    idx: Vec<usize>,
    n: usize,
    started: bool,
}

impl Combinations {
    fn new(n: usize, t: usize) -> Self {
        Self {
            idx: (0..t).collect(),
            n,
            started: false,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        let t = self.idx.len();
        if t > self.n {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.idx.clone());
        }
        let mut i = t;
        while i > 0 {
            i -= 1;
            if self.idx[i] < self.n - t + i {
                self.idx[i] += 1;
                for j in i + 1..t {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                return Some(self.idx.clone());
            }
        }
        None
    }
}

fn stage_seed(seed: u64, stage: u64, p: u64) -> u64 {
    seed ^ stage.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ p.wrapping_mul(0xbf58_476d_1ce4_e5b9)
}

/// Runs the three stages; returns the final set and the stage records.
pub fn three_stage(m: u64, plan: &StagePlan, seed: u64) -> Result<(IntegerMultiset, Vec<StageRecord>), ConstructionError> {
    let primes1 = primes_in_halfopen(plan.p1 / 2.0, plan.p1).primes;
    let s1: BTreeMap<u64, Vec<u64>> = primes1
        .par_iter()
        .map(|&p| (p, stage_one_set(p, plan.t, plan.delta, stage_seed(seed, 1, p))))
        .collect();
    let d1 = s1
        .iter()
        .map(|(&p, s)| disc(&IntegerMultiset::from_residues(p, s).expect("p >= 2")).value)
        .fold(0.0, f64::max);
    let primes2 = IterationInput::primes(m, plan.p2);
    let s2: Vec<(u64, IntegerMultiset)> = primes2
        .par_iter()
        .map(|&q| {
            let sets = s1.iter().filter(|(&p, _)| q % p != 0).map(|(&p, s)| (p, s.clone())).collect();
            iterate(&IterationInput { m: q, r: plan.r2, p: plan.p1, sets }).map(|z| (q, z))
        })
        .collect::<Result<_, _>>()?;
    let d2 = s2.iter().map(|(_, z)| disc(z).value).fold(0.0, f64::max);
    let size2 = s2.first().map_or(0, |(_, z)| z.len());
    let sets3 = s2.iter().map(|(q, z)| (*q, z.residues().to_vec())).collect();
    let z = iterate(&IterationInput {
        m,
        r: plan.r3,
        p: plan.p2,
        sets: sets3,
    })?;
    let d3 = disc(&z).value;
    let stages = vec![
        StageRecord {
            stage: 1,
            p_param: plan.p1,
            r: 0,
            primes: s1.len(),
            set_size: plan.t,
            max_disc: d1,
        },
        StageRecord {
            stage: 2,
            p_param: plan.p1,
            r: plan.r2,
            primes: s2.len(),
            set_size: size2,
            max_disc: d2,
        },
        StageRecord {
            stage: 3,
            p_param: plan.p2,
            r: plan.r3,
            primes: s2.len(),
            set_size: z.len(),
            max_disc: d3,
        },
    ];
    Ok((z, stages))
}

/// Feasible three-stage plans for `m` within the size cap, most promising first.
pub fn practical_plans(m: u64, delta: f64, cap: usize) -> Vec<StagePlan> {
    let mut plans: Vec<(usize, usize, StagePlan)> = Vec::new();
    for p1 in 4..=32u64 {
        let primes1 = primes_in_halfopen(p1 as f64 / 2.0, p1 as f64).primes;
        let Some(&min_p1) = primes1.first() else { continue };
        for r2 in 1..=3u64 {
            let p2 = 2.0 * (p1 * p1 * (r2 + 1)) as f64;
            for r3 in 1..=4u64 {
                if (m as f64) < p2 * p2 * (r3 + 1) as f64 {
                    continue;
                }
                let n2 = IterationInput::primes(m, p2).len();
                if n2 == 0 {
                    continue;
                }
                for t in 1..min_p1 as usize {
                    let size = r3 as usize * n2 * r2 as usize * primes1.len() * t;
                    if size <= cap {
                        plans.push((
                            n2,
                            size,
                            StagePlan {
                                p1: p1 as f64,
                                t,
                                r2,
                                p2,
                                r3,
                                delta,
                            },
                        ));
                    }
                }
            }
        }
    }
    plans.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)));
    plans.into_iter().map(|(_, _, p)| p).collect()
}

/// Guards of the faithful parameter choice, in order, with their outcomes.
pub fn paper_guards(m: u64, eps: f64) -> (f64, f64, f64, Vec<(String, bool)>) {
    let c = iteration_constants().c;
    let delta = eps / (11.0 * c);
    let lm = (m as f64).ln();
    let p1 = (1.0 / delta) * ((1.0 / delta) * lm).ln();
    let p2 = (1.0 / delta) * lm;
    let inv2 = 1.0 / (delta * delta);
    let k1 = (8.0 * (8.0 * p1).ln() / (delta * delta)).ceil();
    let r = (inv2 + 1.0).ceil();
    let mut guards = vec![
        ("P' >= 1/delta^2".to_string(), p1 >= inv2),
        ("P' > 4 ceil(8 ln(8P')/delta^2)^2".to_string(), p1 > 4.0 * k1 * k1),
        ("P'' >= 2 P'^2 ceil(1/delta^2 + 1)".to_string(), p2 >= 2.0 * p1 * p1 * r),
        ("m >= P''^2 ceil(1/delta^2 + 1)".to_string(), m as f64 >= p2 * p2 * r),
    ];
    if guards.iter().all(|g| g.1) {
        guards.push(("pi(P') > pi(P'/2)".to_string(), prime_pi(p1) > prime_pi(p1 / 2.0)));
        guards.push((
            "pi(P'') - pi(P''/2) > nu(m)".to_string(),
            prime_pi(p2) - prime_pi(p2 / 2.0) > distinct_prime_divisors(m) as usize,
        ));
    }
    (delta, p1, p2, guards)
}

/// `|Z| / log2 m` of the faithful parameter choice at target `eps`.
pub fn analytic_c_eps_at(m: u64, eps: f64) -> f64 {
    analytic_c_eps(m, eps / (11.0 * iteration_constants().c))
}

fn analytic_c_eps(m: u64, delta: f64) -> f64 {
    let lm = (m as f64).ln().max(1.0);
    let p1 = (1.0 / delta) * ((1.0 / delta) * lm).ln().max(1.0);
    let r = (1.0 / (delta * delta) + 1.0).ceil();
    let k1 = (8.0 * (8.0 * p1).ln() / (delta * delta)).ceil();
    let s2 = r * (p1 / 2.0) * k1;
    r * (lm / (2.0 * delta)) * s2 / (m as f64).log2().max(1.0)
}

/// Builds a low-discrepancy set modulo `m`; never fails, degrades to the trivial set.
pub fn build_low_disc_set(m: u64, eps: f64, mode: Mode, seed: u64) -> ConstructionReport {
    build_low_disc_set_with(m, eps, mode, seed, &PracticalOptions::default())
}

pub fn build_low_disc_set_with(m: u64, eps: f64, mode: Mode, seed: u64, opts: &PracticalOptions) -> ConstructionReport {
    let m = m.max(2);
    let consts = iteration_constants();
    let log_m = (m as f64).log2();
    let cap = opts.size_cap.unwrap_or((40.0 * log_m).floor() as usize).max(1);
    let mut notes = Vec::new();
    let mut stages = Vec::new();
    let (delta, outcome): (f64, Option<(Branch, IntegerMultiset)>) = match mode {
        Mode::Paper => {
            let (delta, p1, p2, guards) = paper_guards(m, eps);
            let failed: Vec<&String> = guards.iter().filter(|g| !g.1).map(|g| &g.0).collect();
            if failed.is_empty() {
                let r = (1.0 / (delta * delta)).ceil() as u64;
                let plan = StagePlan {
                    p1,
                    t: (8.0 * (8.0 * p1).ln() / (delta * delta)).ceil() as usize,
                    r2: r,
                    p2,
                    r3: r,
                    delta,
                };
                match three_stage(m, &plan, seed) {
                    Ok((z, st)) => {
                        stages = st;
                        (delta, Some((Branch::ThreeStage, z)))
                    }
                    Err(e) => {
                        notes.push(format!("three-stage run failed: {e}"));
                        (delta, None)
                    }
                }
            } else {
                for g in failed {
                    notes.push(format!("guard failed: {g}"));
                }
                (delta, None)
            }
        }
        Mode::Practical => {
            let delta = opts.delta.unwrap_or(eps);
            let mut found = None;
            for plan in practical_plans(m, delta, cap).into_iter().take(opts.attempts) {
                match three_stage(m, &plan, seed) {
                    Ok((z, st)) => {
                        let value = st.last().map_or(1.0, |s| s.max_disc);
                        notes.push(format!(
                            "three-stage P'={} t={} R'={} P''={} R''={}: |Z|={} disc={value:.6}",
                            plan.p1,
                            plan.t,
                            plan.r2,
                            plan.p2,
                            plan.r3,
                            z.len()
                        ));
                        if value <= eps && disc(&z).upper() <= eps {
                            stages = st;
                            found = Some((Branch::ThreeStage, z));
                            break;
                        }
                    }
                    Err(e) => notes.push(format!("three-stage plan rejected: {e}")),
                }
            }
            if found.is_none() {
                notes.push("no three-stage plan met the target; using random search".to_string());
                found = random_fallback(m, eps, seed, cap, opts.search_budget, &mut notes);
            }
            (delta, found)
        }
        Mode::Random => (eps, random_fallback(m, eps, seed, cap, opts.search_budget, &mut notes)),
    };
    let (branch, set) = outcome.unwrap_or_else(|| {
        (
            Branch::Trivial,
            IntegerMultiset::trivial(m).expect("m >= 2"),
        )
    });
    let certificate = disc(&set);
    let paper_delta = eps / (11.0 * consts.c);
    ConstructionReport {
        mode,
        m,
        eps,
        seed,
        branch,
        stages,
        constants: Constants {
            c: consts.c,
            big_c: consts.big_c,
            delta,
            c_eps_observed: set.len() as f64 / log_m,
            c_eps_analytic: analytic_c_eps(m, paper_delta),
        },
        final_set: set,
        certificate,
        notes,
    }
}

/// Random search over growing sizes, starting near `ln(m)/eps^2`.
fn random_fallback(m: u64, eps: f64, seed: u64, cap: usize, budget: u64, notes: &mut Vec<String>) -> Option<(Branch, IntegerMultiset)> {
    if !(eps > 0.0 && eps < 1.0) || m < 3 {
        notes.push("random search needs 0 < eps < 1 and m >= 3".to_string());
        return None;
    }
    let max_size = cap.min((m - 1) as usize);
    let mut size = (((m as f64).ln() / (eps * eps)).ceil() as usize).clamp(1, max_size);
    loop {
        match random_search(m, size, eps, seed ^ size as u64, budget) {
            Ok(z) if disc(&z).upper() <= eps => {
                notes.push(format!("random search succeeded at size {size}"));
                return Some((Branch::RandomSearch, z));
            }
            _ => {}
        }
        if size == max_size {
            notes.push("random search exhausted its size range; using the trivial set".to_string());
            return None;
        }
        size = (size + size / 4 + 1).min(max_size);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(m: u64, r: u64, p: f64, sets: &[(u64, &[u64])]) -> IterationInput {
        IterationInput {
            m,
            r,
            p,
            sets: sets.iter().map(|(p, s)| (*p, s.to_vec())).collect(),
        }
    }

    #[test]
    fn lemma_examples() {
        let one = iterate(&input(19, 1, 3.0, &[(2, &[1]), (3, &[1])])).unwrap();
        assert_eq!(one.residues(), &[11, 14]);
        let two = input(19, 2, 3.0, &[(2, &[1]), (3, &[1])]);
        assert_eq!(iteration_set(&two).unwrap().residues(), &[11, 12, 14, 15]);
        assert!(matches!(iterate(&two), Err(ConstructionError::PreconditionViolated(_))));
        assert!(matches!(
            iterate(&input(10, 1, 3.0, &[(3, &[1])])),
            Err(ConstructionError::PreconditionViolated(_))
        ));
        assert!(matches!(
            iterate(&input(19, 1, 3.0, &[(2, &[1]), (3, &[1, 2])])),
            Err(ConstructionError::CardinalityMismatch(_))
        ));
    }

    #[test]
    fn constants_are_consistent() {
        let k = iteration_constants();
        assert!(k.big_c >= 1.0);
        assert_eq!(k.c, 4.0 * k.big_c * k.big_c);
        let count = (prime_pi(100.0) - prime_pi(50.0)) as f64;
        assert_eq!(count, 10.0);
        assert!(k.big_c >= 100.0 / (count * 100f64.log2()));
    }

    #[test]
    fn paper_mode_is_trivial_at_desk_scale() {
        let r = build_low_disc_set(1000, 0.1, Mode::Paper, 0);
        assert_eq!(r.branch, Branch::Trivial);
        assert_eq!(r.final_set.len(), 1000);
        assert!(r.certificate.value < 1e-9);
        assert!(!r.notes.is_empty());
    }

    #[test]
    fn random_mode_is_certified() {
        let r = build_low_disc_set(101, 0.5, Mode::Random, 3);
        assert_eq!(r.branch, Branch::RandomSearch);
        assert!(r.certificate.value <= 0.5);
        let res = r.final_set.residues();
        assert!(res[0] > 0 && res.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn combinations_enumerate_all() {
        assert_eq!(Combinations::new(5, 2).count(), 10);
        assert_eq!(Combinations::new(4, 0).count(), 1);
        assert_eq!(binomial(30, 15), 155_117_520);
    }

    #[test]
    fn claims_hold_on_small_instance() {
        let inp = input(199, 3, 5.0, &[(3, &[1]), (5, &[2])]);
        for c in correlation_claims(&inp).unwrap() {
            assert!(c.slack() >= -1e-9, "{c:?}");
        }
    }
}
