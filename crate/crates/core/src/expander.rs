//! Circulant expanders with low-discrepancy connection sets.
//!
//! The connection set is `(Z + D) u (-Z - D) mod n` for a shift `D` that keeps
//! the two halves disjoint and away from zero. Every nontrivial eigenvalue is
//! `2 Re(w^{kD} sum_z w^{kz})`, so `lambda <= 2|Z| disc(Z, n)`.

use crate::construction::{analytic_c_eps_at, build_low_disc_set_with, Branch, Mode, PracticalOptions};
use crate::discrepancy::{disc, DiscrepancyCertificate, IntegerMultiset};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpanderError {
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("invalid connection set: {0}")]
    InvalidConnectionSet(String),
}

/// Undirected simple circulant graph on `Z_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirculantGraph {
    pub n: u64,
    /// Sorted, closed under negation, without 0.
    pub connection_set: Vec<u64>,
    pub degree: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spectrum: Option<Vec<f64>>,
    pub lambda: f64,
}

impl CirculantGraph {
    pub fn new(n: u64, connection_set: Vec<u64>) -> Result<Self, ExpanderError> {
        if n < 2 {
            return Err(ExpanderError::BadParams(format!("order {n} < 2")));
        }
        let mut s = connection_set;
        s.sort_unstable();
        s.dedup();
        if s.iter().any(|&c| c == 0 || c >= n) {
            return Err(ExpanderError::InvalidConnectionSet("elements must lie in 1..n".into()));
        }
        if s.iter().any(|&c| s.binary_search(&(n - c)).is_err()) {
            return Err(ExpanderError::InvalidConnectionSet("not closed under negation".into()));
        }
        let degree = s.len();
        let mut g = CirculantGraph { n, connection_set: s, degree, spectrum: None, lambda: 0.0 };
        g.lambda = g.gap().lambda;
        Ok(g)
    }

    pub fn complete(n: u64) -> Result<Self, ExpanderError> {
        Self::new(n, (1..n).collect())
    }

    pub fn cycle(n: u64) -> Result<Self, ExpanderError> {
        Self::new(n, vec![1, n - 1])
    }

    pub fn has_edge(&self, u: u64, v: u64) -> bool {
        let diff = (v + self.n - u % self.n) % self.n;
        self.connection_set.binary_search(&diff).is_ok()
    }

    /// Eigenvalue `sum_{c in S} cos(2 pi k c / n)` for each `k`.
    pub fn eigenvalue(&self, k: u64) -> f64 {
        self.connection_set.iter().map(|&c| (TAU * ((k as u128 * c as u128) % self.n as u128) as f64 / self.n as f64).cos()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (0..self.n).into_par_iter().map(|k| self.eigenvalue(k)).collect()
    }

    pub fn with_spectrum(mut self) -> Self {
        self.spectrum = Some(self.eigenvalues());
        self
    }

    fn gap(&self) -> SpectralGap {
        let (k, lambda) = (1..self.n)
            .into_par_iter()
            .map(|k| (k, self.eigenvalue(k).abs()))
            .reduce(|| (0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
        let lambda = if self.n == 1 { 0.0 } else { lambda };
        SpectralGap {
            lambda,
            argmax_k: k,
            numeric_error: self.degree as f64 * 8.0 * f64::EPSILON,
            disc_bound: None,
            top_eigenvalue: self.eigenvalue(0),
        }
    }

    /// One line `u v` per edge with `u < v`.
    pub fn edge_list(&self) -> String {
        let mut out = String::new();
        for u in 0..self.n {
            for &c in &self.connection_set {
                let v = (u + c) % self.n;
                if u < v {
                    writeln!(out, "{u} {v}").expect("string write");
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGap {
    pub lambda: f64,
    pub argmax_k: u64,
    pub top_eigenvalue: f64,
    pub numeric_error: f64,
    /// `2|Z| disc(Z, n)` when the generating set is known.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub disc_bound: Option<f64>,
}

pub fn spectral_gap(g: &CirculantGraph, generator: Option<&IntegerMultiset>) -> SpectralGap {
    let mut gap = g.gap();
    gap.disc_bound = generator.map(|z| 2.0 * z.len() as f64 * disc(z).upper());
    gap
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpanderBranch {
    Complete,
    Circulant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpanderReport {
    pub n: u64,
    pub eps: f64,
    pub mode: Mode,
    pub seed: u64,
    pub branch: ExpanderBranch,
    pub graph: CirculantGraph,
    pub gap: SpectralGap,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generator: Option<IntegerMultiset>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generator_certificate: Option<DiscrepancyCertificate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub shift: Option<u64>,
    /// `lambda <= max{eps, 1/(n-1)} d`, checked on the computed spectrum.
    pub bound_met: bool,
    /// `d / log2 n`.
    pub c_eps_observed: f64,
    pub notes: Vec<String>,
}

/// Smallest `D` in `0..=2|Z|^2` with every `z + D` nonzero and no `z + D = -(z' + D)`.
pub fn find_shift(z: &[u64], n: u64) -> Option<u64> {
    let limit = 2 * (z.len() as u64).pow(2);
    (0..=limit).find(|&d| {
        let shifted: Vec<u64> = z.iter().map(|&v| (v % n + d % n) % n).collect();
        shifted.iter().all(|&a| a != 0)
            && shifted.iter().all(|&a| shifted.iter().all(|&b| (a + b) % n != 0))
    })
}

/// Connection set `(Z + D) u (-Z - D) mod n`.
pub fn connection_set(z: &[u64], n: u64, shift: u64) -> Vec<u64> {
    let mut s: Vec<u64> = z
        .iter()
        .flat_map(|&v| {
            let a = (v % n + shift % n) % n;
            [a, (n - a) % n]
        })
        .collect();
    s.sort_unstable();
    s
}

/// Largest `s` with `2 s^2 < n`.
fn max_generator_size(n: u64) -> usize {
    let mut s = ((n as f64 / 2.0).sqrt()) as u64 + 1;
    while s > 0 && 2 * s * s >= n {
        s -= 1;
    }
    s as usize
}

pub fn build_expander(n: u64, eps: f64, mode: Mode, seed: u64) -> Result<ExpanderReport, ExpanderError> {
    if n < 2 {
        return Err(ExpanderError::BadParams(format!("n = {n} < 2")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(ExpanderError::BadParams(format!("eps = {eps} outside (0, 1)")));
    }
    let mut notes = Vec::new();
    let log_n = (n as f64).log2().max(1.0);
    let s_max = max_generator_size(n);
    let generator = match mode {
        Mode::Paper => {
            let c_eps = analytic_c_eps_at(n.max(3), eps);
            let s = c_eps * log_n;
            if 2.0 * s * s >= n as f64 {
                notes.push(format!("2 (C_eps log n)^2 = {:.3e} >= n: complete graph", 2.0 * s * s));
                None
            } else {
                let report = build_low_disc_set_with(n, eps, Mode::Paper, seed, &PracticalOptions::default());
                Some(report.final_set)
            }
        }
        Mode::Practical | Mode::Random => {
            if s_max == 0 || n < 3 {
                notes.push("no generator fits 2|Z|^2 < n: complete graph".into());
                None
            } else {
                let cap = s_max.min((40.0 * log_n).floor() as usize).max(1);
                let opts = PracticalOptions { size_cap: Some(cap), ..Default::default() };
                let report = build_low_disc_set_with(n, eps, mode, seed, &opts);
                notes.extend(report.notes.iter().cloned());
                (report.branch != Branch::Trivial).then_some(report.final_set)
            }
        }
    };
    let circulant = generator.and_then(|z| {
        let mut residues: Vec<u64> = z.residues().to_vec();
        residues.sort_unstable();
        let distinct = residues.windows(2).all(|w| w[0] != w[1]);
        let cert = disc(&z);
        if !distinct || 2 * z.len() * z.len() >= n as usize || cert.upper() > eps {
            notes.push(format!(
                "generator unusable (|Z| = {}, distinct = {distinct}, disc = {:.6}): complete graph",
                z.len(),
                cert.upper()
            ));
            return None;
        }
        let Some(shift) = find_shift(&residues, n) else {
            notes.push("no admissible shift in 0..=2|Z|^2: complete graph".into());
            return None;
        };
        Some((z, cert, shift))
    });
    let (branch, graph, generator, cert, shift) = match circulant {
        Some((z, cert, shift)) => {
            let g = CirculantGraph::new(n, connection_set(z.residues(), n, shift))?;
            (ExpanderBranch::Circulant, g, Some(z), Some(cert), Some(shift))
        }
        None => (ExpanderBranch::Complete, CirculantGraph::complete(n)?, None, None, None),
    };
    let gap = spectral_gap(&graph, generator.as_ref());
    let allowed = eps.max(1.0 / (n - 1) as f64) * graph.degree as f64;
    let bound_met = gap.lambda <= allowed + gap.numeric_error;
    if !bound_met {
        notes.push(format!("lambda = {} exceeds {allowed}", gap.lambda));
    }
    Ok(ExpanderReport {
        n,
        eps,
        mode,
        seed,
        branch,
        c_eps_observed: graph.degree as f64 / log_n,
        gap,
        graph,
        generator,
        generator_certificate: cert,
        shift,
        bound_met,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_graphs() {
        let k5 = CirculantGraph::complete(5).unwrap();
        assert!((k5.lambda - 1.0).abs() < 1e-12);
        assert_eq!(k5.degree, 4);
        let c5 = CirculantGraph::new(5, connection_set(&[1], 5, 0)).unwrap();
        assert_eq!(c5.connection_set, vec![1, 4]);
        assert!((c5.lambda - 2.0 * (TAU / 5.0).cos().abs().max((2.0 * TAU / 5.0).cos().abs())).abs() < 1e-12);
        assert!((c5.lambda - 1.618_033_988_749_895).abs() < 1e-12);
        assert!(CirculantGraph::new(5, vec![1]).is_err());
        assert!(CirculantGraph::new(5, vec![0, 1, 4]).is_err());
        assert_eq!(c5.edge_list().lines().count(), 5);
    }

    #[test]
    fn shift_search() {
        assert_eq!(find_shift(&[1], 5), Some(0));
        // 1 + 4 = 0 mod 5 forces a shift
        let d = find_shift(&[1, 4], 5);
        assert!(d.is_some());
        let s = connection_set(&[1, 4], 5, d.unwrap());
        assert!(CirculantGraph::new(5, s.clone()).unwrap().degree == 4);
    }

    #[test]
    fn practical_builds() {
        let r = build_expander(5, 0.9, Mode::Practical, 1).unwrap();
        assert!(r.bound_met);
        let r = build_expander(1009, 0.5, Mode::Practical, 7).unwrap();
        assert!(r.bound_met);
        assert!(r.graph.degree as f64 <= 80.0 * (1009f64).log2());
        let p = build_expander(1009, 0.5, Mode::Paper, 7).unwrap();
        assert_eq!(p.branch, ExpanderBranch::Complete);
    }
}
