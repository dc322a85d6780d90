//! Independent re-derivation of every number stored in a document.

use crate::commands::{execute, read_text, Command};
use crate::document::{sha256_hex, ApproxTask, Document, Envelope, RunManifest, SCHEMA_VERSION};
use crate::{Cli, CliError};
use clap::Parser;
use mdisc::approx::{certificate_lower_bound, verify_lower_certificate, ApproxResult, BooleanFunctionTable, DensityResult};
use mdisc::construction::{Branch, ConstructionReport, Mode};
use mdisc::discrepancy::{digest_hex, disc, disc_exact, IntegerMultiset};
use mdisc::distribution::{exact_distribution, uniformity_report, DistributionTable, Method, UniformityReport, WALK_MAX_M, WALK_MAX_N};
use mdisc::expander::{connection_set, find_shift, CirculantGraph, ExpanderBranch, ExpanderReport};
use mdisc::halfspace::{
    blackbox_approx, build_hardest_halfspace, build_master_halfspace, lift_to_nof, rank_factorization, rectangle_discrepancy_exact,
    rectangle_discrepancy_sampled, sign_matrix, BlackboxApprox, CommunicationReport, HalfspaceSpec, HardestMode, LiftedProblemSpec,
    RectangleDiscrepancy, EXHAUSTIVE_MAX_VARS, RECT_EXHAUSTIVE_MAX_SIDE,
};
use mdisc::poly::MultilinearPoly;
use std::path::Path;

const FLOAT_TOL: f64 = 1e-9;
const LP_TOL: f64 = 1e-7;
const EXACT_DISC_MAX_M: u64 = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.0.push(Check { name: name.into(), ok, detail: detail.into() });
    }

    fn close(&mut self, name: &str, claimed: f64, actual: f64, tol: f64) {
        self.push(name, (claimed - actual).abs() <= tol, format!("claimed {claimed:.12e}, recomputed {actual:.12e}"));
    }
}

pub fn verify_file(path: &Path) -> Result<Vec<Check>, CliError> {
    let text = read_text(path)?;
    let env: Envelope =
        serde_json::from_str(&text).map_err(|e| CliError::Argument(format!("{}: not a document: {e}", path.display())))?;
    let mut c = Checks::default();
    c.push("schema_version", env.schema_version == SCHEMA_VERSION, format!("{}", env.schema_version));
    match &env.doc {
        Document::Lowdisc { report } => lowdisc(report, &mut c),
        Document::Halfspace { spec } => halfspace(spec, &mut c),
        Document::Expander { report } => expander(report, &mut c),
        Document::Dist { z, method, table, uniformity } => dist(z, *method, table, uniformity, &mut c),
        Document::Approx { function, task } => approx(function, task, &mut c),
        Document::Blackbox { halfspace: h, approx } => blackbox(h, approx, &mut c),
        Document::Lift { halfspace: h, lifted, certificates } => lift(h, lifted, certificates.as_ref(), &mut c),
        Document::Manifest(m) => manifest(m, path, &mut c),
    }
    Ok(c.0)
}

fn multiset(z: &IntegerMultiset, claimed: &mdisc::discrepancy::DiscrepancyCertificate, c: &mut Checks) {
    let cert = disc(z);
    c.push("certificate.m", claimed.m == z.modulus(), format!("{}", claimed.m));
    c.push("certificate.n", claimed.n == z.len() as u64, format!("{}", claimed.n));
    c.push(
        "certificate.digest",
        claimed.elements_digest == digest_hex(z.digest()),
        claimed.elements_digest.clone(),
    );
    let tol = cert.numeric_error + claimed.numeric_error + 1e-12;
    c.close("certificate.value", claimed.value, cert.value, tol);
    if z.modulus() <= EXACT_DISC_MAX_M && !z.is_empty() {
        let (exact, _) = disc_exact(z);
        c.close("certificate.value (exact arithmetic)", claimed.value, exact, tol);
    }
    if !z.is_empty() && z.modulus() > 1 {
        let k = claimed.argmax_k;
        let attained = (1..z.modulus()).contains(&k) && {
            let m = z.modulus() as f64;
            let (re, im) = z.residues().iter().fold((0.0, 0.0), |(re, im), &r| {
                let t = std::f64::consts::TAU * ((k as u128 * r as u128) % z.modulus() as u128) as f64 / m;
                (re + t.cos(), im + t.sin())
            });
            (f64::hypot(re, im) / z.len() as f64 - cert.value).abs() <= tol
        };
        c.push("certificate.argmax_k", attained, format!("k = {}", claimed.argmax_k));
    }
}

fn lowdisc(r: &ConstructionReport, c: &mut Checks) {
    c.push("final_set.modulus", r.final_set.modulus() == r.m, format!("{}", r.final_set.modulus()));
    multiset(&r.final_set, &r.certificate, c);
    if !(r.mode == Mode::Paper && r.branch == Branch::ThreeStage) {
        c.push("disc <= eps", disc(&r.final_set).upper() <= r.eps, format!("eps = {}", r.eps));
    }
    let log_m = (r.m as f64).log2();
    c.close("constants.c_eps_observed", r.constants.c_eps_observed, r.final_set.len() as f64 / log_m, FLOAT_TOL);
}

fn halfspace(h: &HalfspaceSpec, c: &mut Checks) {
    c.push("n", h.n == h.weights.len(), format!("{} weights", h.weights.len()));
    match h.never_zero() {
        Some(ok) => c.push("argument never zero", ok, "exhaustive or fractional threshold"),
        None => c.push("argument never zero", false, format!("undecided beyond {EXHAUSTIVE_MAX_VARS} variables")),
    }
    let p = &h.provenance;
    match (p.kind.as_str(), p.mode.as_deref()) {
        ("hardest", Some("paper")) => match build_hardest_halfspace(h.n, &HardestMode::Paper) {
            Ok(expected) => c.push(
                "paper fallback",
                expected.weights == h.weights && expected.threshold == h.threshold,
                "(-1)^(x_1)",
            ),
            Err(e) => c.push("paper fallback", false, e.to_string()),
        },
        ("master", _) | ("hardest", Some("demo")) => {
            let Some(z) = &p.z else {
                c.push("provenance.z", false, "missing generating multiset");
                return;
            };
            let copies = p.copies.unwrap_or(1);
            let dup = z.repeated(copies);
            match build_master_halfspace(&dup) {
                Ok(master) => {
                    let mut w = master.weights.clone();
                    w.resize(h.n, 0.into());
                    c.push("weights rebuilt from Z", w == h.weights && master.threshold == h.threshold, format!("{copies} copies"));
                }
                Err(e) => c.push("weights rebuilt from Z", false, e.to_string()),
            }
            c.push(
                "provenance.z_digest",
                p.z_digest.as_deref() == Some(digest_hex(z.digest()).as_str()),
                p.z_digest.clone().unwrap_or_default(),
            );
            if let Some(cert) = &p.disc_certificate {
                multiset(z, cert, c);
            }
            if p.kind == "hardest" {
                let size = z.len() * copies;
                c.push("n/4 <= k|Z| <= n/2", 4 * size >= h.n && 2 * size <= h.n, format!("k|Z| = {size}, n = {}", h.n));
            }
        }
        _ => {}
    }
}

fn expander(r: &ExpanderReport, c: &mut Checks) {
    let g = match CirculantGraph::new(r.n, r.graph.connection_set.clone()) {
        Ok(g) => g,
        Err(e) => {
            c.push("connection set", false, e.to_string());
            return;
        }
    };
    c.push("connection set", g.connection_set == r.graph.connection_set, "sorted, symmetric, no 0");
    c.push("degree", g.degree == r.graph.degree, format!("{}", r.graph.degree));
    c.close("lambda", r.graph.lambda, g.lambda, FLOAT_TOL * (1.0 + g.degree as f64));
    c.close("gap.lambda", r.gap.lambda, g.lambda, FLOAT_TOL * (1.0 + g.degree as f64));
    c.close("top eigenvalue = d", g.eigenvalue(0), g.degree as f64, FLOAT_TOL);
    let allowed = r.eps.max(1.0 / (r.n - 1) as f64) * g.degree as f64;
    let met = g.lambda <= allowed + r.gap.numeric_error;
    c.push("bound_met", met == r.bound_met, format!("lambda {:.6} vs {allowed:.6}", g.lambda));
    match r.branch {
        ExpanderBranch::Complete => {
            c.push("complete graph", g.degree as u64 == r.n - 1, format!("d = {}", g.degree));
            c.close("K_n lambda = 1", g.lambda, 1.0, FLOAT_TOL * r.n as f64);
        }
        ExpanderBranch::Circulant => {
            let (Some(z), Some(shift)) = (&r.generator, r.shift) else {
                c.push("generator", false, "circulant branch without generator or shift");
                return;
            };
            let mut res = z.residues().to_vec();
            res.sort_unstable();
            c.push("shift is the smallest admissible", find_shift(&res, r.n) == Some(shift), format!("D = {shift}"));
            c.push("connection set from Z", connection_set(z.residues(), r.n, shift) == g.connection_set, "(Z+D) u (-Z-D)");
            if let Some(cert) = &r.generator_certificate {
                multiset(z, cert, c);
                let bound = 2.0 * z.len() as f64 * disc(z).upper();
                c.push("lambda <= 2|Z| disc", g.lambda <= bound + FLOAT_TOL * g.degree as f64, format!("{bound:.6}"));
            }
        }
    }
}

fn dist(z: &IntegerMultiset, method: Method, table: &DistributionTable, u: &UniformityReport, c: &mut Checks) {
    match exact_distribution(z, Method::Dp) {
        Ok(t) => c.push("table (dp)", &t == table, format!("m = {}, n = {}", table.m, table.n)),
        Err(e) => c.push("table (dp)", false, e.to_string()),
    }
    if z.modulus() <= WALK_MAX_M && z.len() as u64 <= WALK_MAX_N {
        match exact_distribution(z, Method::Walk) {
            Ok(t) => c.push("table (walk)", &t == table, format!("stored via {method:?}")),
            Err(e) => c.push("table (walk)", false, e.to_string()),
        }
    }
    match uniformity_report(z, u.delta) {
        Ok(r) => {
            c.push(
                "max deviation (exact)",
                r.observed_num == u.observed_num && r.observed_den == u.observed_den,
                format!("{}/{}", u.observed_num, u.observed_den),
            );
            c.close("disc", u.disc, r.disc, 1e-12);
            c.close("fourier bound", u.fourier_bound, r.fourier_bound, 1e-12);
            c.close("disc bound", u.disc_bound, r.disc_bound, 1e-12);
            c.push("sandwich", r.sandwich_holds && u.sandwich_holds, "observed <= fourier <= disc bound");
        }
        Err(e) => c.push("uniformity report", false, e.to_string()),
    }
}

/// `max |f - p/q|` over the domain, or `None` when `q <= 0` somewhere.
fn multilinear_error(f: &BooleanFunctionTable, p: &MultilinearPoly, q: &MultilinearPoly) -> Option<f64> {
    let mut worst = 0.0f64;
    for x in f.domain_points() {
        let den = q.eval(x);
        if den <= 0.0 {
            return None;
        }
        worst = worst.max((f.values()[x as usize] as f64 - p.eval(x) / den).abs());
    }
    Some(worst)
}

fn approx_result(f: &BooleanFunctionTable, r: &ApproxResult, c: &mut Checks) -> Option<f64> {
    let (Some(p), Some(q)) = (r.numerator_poly(), r.denominator_poly()) else {
        c.push("basis", false, "expected a multilinear basis");
        return None;
    };
    match multilinear_error(f, &p, &q) {
        Some(e) => {
            c.close("error", r.error, e, LP_TOL);
            if let Some(lb) = r.lower_bound {
                c.push("lower_bound <= error", lb <= e + LP_TOL, format!("{lb:.9}"));
            }
            Some(e)
        }
        None => {
            c.push("denominator positive", false, "q <= 0 on the domain");
            None
        }
    }
}

fn approx(function: &str, task: &ApproxTask, c: &mut Checks) {
    let f = match BooleanFunctionTable::parse(function) {
        Ok(f) => f,
        Err(e) => {
            c.push("function", false, e.to_string());
            return;
        }
    };
    match task {
        ApproxTask::Poly { result } => {
            c.push("denominator is 1", result.d1 == 0 && result.denominator == vec![1.0], "polynomial");
            approx_result(&f, result, c);
            if let Some(psi) = &result.dual_certificate {
                match certificate_lower_bound(&f, result.d0, psi, LP_TOL) {
                    Some(lb) => {
                        c.push("dual certificate", lb <= result.error + LP_TOL, format!("certifies E >= {lb:.9}"));
                        c.close("dual matches error", lb, result.error, 1e-6);
                    }
                    None => c.push("dual certificate", false, "not orthogonal to the degree budget"),
                }
            }
        }
        ApproxTask::Rational { result } => {
            approx_result(&f, result, c);
        }
        ApproxTask::ThresholdDegree { result } => {
            let p = result.poly();
            let margin = f
                .domain_points()
                .iter()
                .map(|&x| f.values()[x as usize] as f64 * p.eval(x))
                .fold(f64::INFINITY, f64::min);
            c.push("sign representation", margin > 0.0, format!("margin {margin:.3e}"));
            c.close("margin", result.margin, margin, 1e-9 * (1.0 + margin.abs()));
            match &result.lower_certificate {
                Some(psi) => c.push(
                    "degree lower certificate",
                    verify_lower_certificate(&f, result.degree, psi, 1e-9),
                    format!("no sign representation of degree {}", result.degree.saturating_sub(1)),
                ),
                None => c.push("degree lower certificate", result.degree == 0, "only degree 0 needs none"),
            }
        }
        ApproxTask::ThresholdDensity { result, .. } => match result {
            DensityResult::Exact { size, family, weights } => {
                let ok = family.len() == *size
                    && f.domain_points().iter().all(|&x| {
                        let s: f64 = family
                            .iter()
                            .zip(weights)
                            .map(|(&set, w)| if (set & x).count_ones() % 2 == 1 { -w } else { *w })
                            .sum();
                        s * f.values()[x as usize] as f64 > 0.0
                    });
                c.push("parity family sign-represents f", ok, format!("{size} parities"));
            }
            DensityResult::LowerBoundOnly { searched } => c.push("lower bound only", true, format!("searched up to {searched}")),
        },
    }
}

fn blackbox(h: &HalfspaceSpec, a: &BlackboxApprox, c: &mut Checks) {
    match blackbox_approx(h, a.result.d0, a.kind) {
        Ok(again) => {
            c.push("range bound N", again.big_n == a.big_n, a.big_n.clone());
            c.push("exact error", again.exact_error == a.exact_error, format!("{:?}", a.exact_error.as_ref().map(|r| &r.0)));
            c.close("error", a.result.error, again.result.error, FLOAT_TOL);
            c.close("bound", a.bound, again.bound, 1e-12);
            c.push("error <= bound", again.result.error <= again.bound + FLOAT_TOL, format!("{:.9}", again.bound));
        }
        Err(e) => c.push("recompute", false, e.to_string()),
    }
    if let Ok(t) = h.to_table() {
        if a.result.numerator_poly().is_some() {
            approx_result(&t, &a.result, c);
        }
    }
}

fn lift(h: &HalfspaceSpec, l: &LiftedProblemSpec, cert: Option<&CommunicationReport>, c: &mut Checks) {
    match lift_to_nof(h, l.k, l.m_blk) {
        Ok(again) => c.push("lifted weights", &again == l, format!("w0 = {}", l.w0)),
        Err(e) => c.push("lifted weights", false, e.to_string()),
    }
    let Some(cert) = cert else { return };
    c.push("upp bound", cert.upp_upper_bound == l.upp_upper_bound(), format!("{}", cert.upp_upper_bound));
    match rank_factorization(l) {
        Ok(f) => {
            c.push("factorization signs", f.signs_match && cert.factorization.signs_match, "sign(U V^T) = F");
            c.push("factorization rank", f.rank == cert.factorization.rank && f.rank <= f.inner_dim, format!("rank {}", f.rank));
        }
        Err(e) => c.push("factorization", false, e.to_string()),
    }
    let side = 1usize << l.coordinates().min(20);
    let exact = if side <= RECT_EXHAUSTIVE_MAX_SIDE { sign_matrix(l).ok().and_then(|m| rectangle_discrepancy_exact(&m).ok()) } else { None };
    match &cert.rectangle_discrepancy {
        Some(RectangleDiscrepancy::Exact { value }) => match exact {
            Some(e) => c.close("rectangle discrepancy", *value, e, 1e-12),
            None => c.push("rectangle discrepancy", false, "matrix too large for exhaustive rectangles"),
        },
        Some(RectangleDiscrepancy::Sampled { value, samples, seed }) => match sign_matrix(l) {
            Ok(m) => c.close("sampled rectangles", *value, rectangle_discrepancy_sampled(&m, *samples, *seed), 1e-12),
            Err(e) => c.push("sampled rectangles", false, e.to_string()),
        },
        None => {}
    }
    if let (Some(pp), Some(e)) = (cert.pp_lower_bound, exact) {
        c.push("pp bound sound", pp <= (2.0 / e).log2() + FLOAT_TOL, format!("{pp:.6} <= log2(2/{e:.6})"));
    }
}

fn manifest(m: &RunManifest, path: &Path, c: &mut Checks) {
    let base = Path::new(&m.cwd);
    let base = if base.is_dir() { base.to_path_buf() } else { path.parent().map(Path::to_path_buf).unwrap_or_default() };
    let argv = std::iter::once("mdisc".to_string()).chain(m.argv.iter().cloned());
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            c.push("argv parses", false, e.to_string());
            return;
        }
    };
    if matches!(cli.command, Command::Verify(_)) {
        c.push("replayable", false, "verify runs are not replayed");
        return;
    }
    c.push("subcommand", cli.command.name() == m.subcommand, m.subcommand.clone());
    if let Err(e) = std::env::set_current_dir(&base) {
        c.push("working directory", false, format!("{}: {e}", base.display()));
        return;
    }
    for input in &m.inputs {
        let Some(p) = &input.path else { continue };
        match std::fs::read(p) {
            Ok(bytes) => c.push(format!("input --{}", input.flag), sha256_hex(&bytes) == input.sha256, p.clone()),
            Err(e) => c.push(format!("input --{}", input.flag), false, format!("{p}: {e}")),
        }
    }
    match execute(&cli.command) {
        Ok(artifacts) => {
            for out in &m.outputs {
                let again = artifacts.iter().find(|a| a.flag == out.flag);
                c.push(
                    format!("output --{} byte-identical", out.flag),
                    again.is_some_and(|a| sha256_hex(&a.bytes) == out.sha256),
                    out.sha256.clone(),
                );
            }
        }
        Err(e) => c.push("replay", false, e.to_string()),
    }
}
