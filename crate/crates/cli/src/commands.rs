use crate::document::{ApproxTask, Document, Envelope};
use crate::CliError;
use clap::{Args, Subcommand, ValueEnum};
use mdisc::approx::{minimax_poly, rational_minimax_boolean, threshold_degree, threshold_density, BooleanFunctionTable};
use mdisc::construction::{build_low_disc_set_with, paper_guards, Mode, PracticalOptions};
use mdisc::discrepancy::IntegerMultiset;
use mdisc::distribution::{exact_distribution, uniformity_report, Method};
use mdisc::expander::build_expander;
use mdisc::halfspace::{
    blackbox_approx, build_hardest_halfspace, communication_certificates, lift_to_nof, sign_matrix_csv, BlackboxKind,
    CertificateOptions, HalfspaceSpec, HardestMode, RationalText, RectangleMode,
};
use std::path::{Path, PathBuf};

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a low-discrepancy multiset modulo m.
    Lowdisc(LowdiscArgs),
    /// Build the hardest halfspace on n variables.
    Halfspace(HalfspaceArgs),
    /// Build a circulant expander on n vertices.
    Expander(ExpanderArgs),
    /// Exact distribution of sum z_j X_j mod m and its uniformity report.
    Dist(DistArgs),
    /// Approximate or sign-represent a Boolean function or a halfspace.
    Approx(ApproxArgs),
    /// Lift a halfspace to a number-on-forehead problem.
    Lift(LiftArgs),
    /// Re-derive every number in a document; exit 1 on any mismatch.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Lowdisc(_) => "lowdisc",
            Command::Halfspace(_) => "halfspace",
            Command::Expander(_) => "expander",
            Command::Dist(_) => "dist",
            Command::Approx(_) => "approx",
            Command::Lift(_) => "lift",
            Command::Verify(_) => "verify",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Lowdisc(a) => a.seed,
            Command::Halfspace(a) => a.seed,
            Command::Expander(a) => a.seed,
            Command::Lift(a) => a.seed,
            _ => None,
        }
    }

    /// Input files as `(flag, path)`.
    pub fn inputs(&self) -> Vec<(&'static str, PathBuf)> {
        match self {
            Command::Dist(a) => vec![("z", a.z.clone())],
            Command::Approx(a) => [("fn", &a.function), ("halfspace", &a.halfspace)]
                .into_iter()
                .filter_map(|(f, p)| p.clone().map(|p| (f, p)))
                .collect(),
            Command::Lift(a) => vec![("halfspace", a.halfspace.clone())],
            Command::Verify(a) => vec![("file", a.file.clone())],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Paper,
    Practical,
    Random,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Paper => Mode::Paper,
            ModeArg::Practical => Mode::Practical,
            ModeArg::Random => Mode::Random,
        }
    }
}

#[derive(Debug, Args)]
pub struct LowdiscArgs {
    #[arg(long)]
    pub m: u64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, value_enum, default_value = "practical")]
    pub mode: ModeArg,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Upper bound on |Z|.
    #[arg(long)]
    pub size_cap: Option<usize>,
    /// Stage-1 discrepancy target.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HardestModeArg {
    Paper,
    Demo,
}

#[derive(Debug, Args)]
pub struct HalfspaceArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "paper")]
    pub mode: HardestModeArg,
    /// Demo-mode constant as `p/q` or an integer.
    #[arg(long)]
    pub c_prime: Option<String>,
    /// Demo-mode discrepancy target.
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExpanderArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, value_enum, default_value = "practical")]
    pub mode: ModeArg,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Edge list, one `u v` per line with `u < v`.
    #[arg(long)]
    pub edges: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Dp,
    Walk,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    /// A lowdisc document, a multiset JSON, or whitespace/comma separated integers.
    #[arg(long)]
    pub z: PathBuf,
    /// Modulus; required for plain integer lists, overrides the file's otherwise.
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "dp")]
    pub method: MethodArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    Maj,
    Parity,
    Omb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ApproxKind {
    Poly,
    Rational,
    ThresholdDegree,
    ThresholdDensity,
    PolyLinear,
    RationalNewman,
}

#[derive(Debug, Args)]
pub struct ApproxArgs {
    /// Truth table file: one of `1`, `-1`, `*` per input, `#` comments.
    #[arg(long = "fn", conflicts_with_all = ["builtin", "halfspace"])]
    pub function: Option<PathBuf>,
    #[arg(long, requires = "n", conflicts_with = "halfspace")]
    pub builtin: Option<Builtin>,
    /// Variable count of the builtin.
    #[arg(long)]
    pub n: Option<usize>,
    /// Halfspace document for the black-box kinds.
    #[arg(long)]
    pub halfspace: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    /// Denominator degree for the rational kind; defaults to `--degree`.
    #[arg(long)]
    pub d1: Option<usize>,
    #[arg(long, value_enum, default_value = "poly")]
    pub kind: ApproxKind,
    /// Largest family size tried by the threshold-density search.
    #[arg(long, default_value_t = 8)]
    pub cap: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RectArg {
    Skip,
    Exhaustive,
    Sampled,
}

#[derive(Debug, Args)]
pub struct LiftArgs {
    #[arg(long)]
    pub halfspace: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub m_blk: usize,
    /// Two-party sign matrix as +-1 CSV.
    #[arg(long)]
    pub emit_matrix: Option<PathBuf>,
    /// Attach two-party certificates.
    #[arg(long)]
    pub certificates: bool,
    #[arg(long, value_enum, default_value = "skip")]
    pub rectangles: RectArg,
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Certified discrepancy upper bound for the pp bound.
    #[arg(long)]
    pub disc: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub file: PathBuf,
}

/// One produced file: `path` is `None` for standard output.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub flag: &'static str,
    pub path: Option<PathBuf>,
    pub bytes: Vec<u8>,
}

fn doc_artifact(doc: Document, out: &Option<PathBuf>) -> Artifact {
    Artifact { flag: "out", path: out.clone(), bytes: Envelope::new(doc).to_bytes() }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Argument(msg.into())
}

fn need_seed(seed: Option<u64>, why: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| bad(format!("--seed is required: {why}")))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn read_halfspace(path: &Path) -> Result<HalfspaceSpec, CliError> {
    let text = read_text(path)?;
    if let Ok(env) = serde_json::from_str::<Envelope>(&text) {
        return match env.doc {
            Document::Halfspace { spec } => Ok(spec),
            Document::Lift { halfspace, .. } | Document::Blackbox { halfspace, .. } => Ok(halfspace),
            other => Err(bad(format!("{}: a {} document holds no halfspace", path.display(), other.kind()))),
        };
    }
    serde_json::from_str(&text).map_err(|e| bad(format!("{}: not a halfspace: {e}", path.display())))
}

pub fn read_multiset(path: &Path, m: Option<u64>) -> Result<IntegerMultiset, CliError> {
    let text = read_text(path)?;
    let from_json = serde_json::from_str::<Envelope>(&text)
        .ok()
        .and_then(|env| match env.doc {
            Document::Lowdisc { report } => Some(report.final_set),
            Document::Dist { z, .. } => Some(z),
            _ => None,
        })
        .or_else(|| serde_json::from_str::<IntegerMultiset>(&text).ok());
    let z = match from_json {
        Some(z) => z,
        None => {
            let m = m.ok_or_else(|| bad("--m is required for a plain integer list"))?;
            let elements = text
                .lines()
                .map(|l| l.split('#').next().unwrap_or(""))
                .flat_map(|l| l.split(|c: char| c.is_whitespace() || c == ','))
                .filter(|t| !t.is_empty())
                .map(|t| t.parse().map_err(|e| bad(format!("{}: bad integer {t:?}: {e}", path.display()))))
                .collect::<Result<Vec<_>, _>>()?;
            return IntegerMultiset::new(m, elements).map_err(|e| bad(e.to_string()));
        }
    };
    match m {
        Some(m) if m != z.modulus() => z.with_modulus(m).map_err(|e| bad(e.to_string())),
        _ => Ok(z),
    }
}

fn parse_rational(s: &str) -> Result<num_rational::BigRational, CliError> {
    RationalText(s.trim().to_string()).parse().ok_or_else(|| bad(format!("{s:?} is not a rational p/q")))
}

pub fn execute(cmd: &Command) -> Result<Vec<Artifact>, CliError> {
    match cmd {
        Command::Lowdisc(a) => lowdisc(a),
        Command::Halfspace(a) => halfspace(a),
        Command::Expander(a) => expander(a),
        Command::Dist(a) => dist(a),
        Command::Approx(a) => approx(a),
        Command::Lift(a) => lift(a),
        Command::Verify(_) => unreachable!("verify is dispatched separately"),
    }
}

fn check_eps(eps: f64) -> Result<(), CliError> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(bad(format!("--eps must lie in (0, 1), got {eps}")))
    }
}

fn lowdisc(a: &LowdiscArgs) -> Result<Vec<Artifact>, CliError> {
    check_eps(a.eps)?;
    if a.m < 2 {
        return Err(bad("--m must be at least 2"));
    }
    let mode = Mode::from(a.mode);
    let seed = match mode {
        Mode::Paper if !paper_guards(a.m, a.eps).3.iter().all(|g| g.1) => a.seed.unwrap_or(0),
        Mode::Paper => need_seed(a.seed, "the faithful parameters are admissible and stage 1 samples")?,
        _ => need_seed(a.seed, "this mode samples")?,
    };
    let opts = PracticalOptions { delta: a.delta, size_cap: a.size_cap, ..Default::default() };
    let report = build_low_disc_set_with(a.m, a.eps, mode, seed, &opts);
    Ok(vec![doc_artifact(Document::Lowdisc { report }, &a.out)])
}

fn halfspace(a: &HalfspaceArgs) -> Result<Vec<Artifact>, CliError> {
    let mode = match a.mode {
        HardestModeArg::Paper => HardestMode::Paper,
        HardestModeArg::Demo => {
            check_eps(a.eps)?;
            let c = a.c_prime.as_deref().ok_or_else(|| bad("--c-prime is required in demo mode"))?;
            HardestMode::Demo { c_prime: parse_rational(c)?, eps: a.eps, seed: need_seed(a.seed, "demo mode samples")? }
        }
    };
    let spec = build_hardest_halfspace(a.n, &mode).map_err(|e| bad(e.to_string()))?;
    Ok(vec![doc_artifact(Document::Halfspace { spec }, &a.out)])
}

fn expander(a: &ExpanderArgs) -> Result<Vec<Artifact>, CliError> {
    check_eps(a.eps)?;
    let mode = Mode::from(a.mode);
    let seed = match mode {
        Mode::Paper => a.seed.unwrap_or(0),
        _ if a.n < 3 => a.seed.unwrap_or(0),
        _ => need_seed(a.seed, "this mode samples")?,
    };
    let report = build_expander(a.n, a.eps, mode, seed).map_err(|e| bad(e.to_string()))?;
    let mut out = Vec::new();
    if let Some(p) = &a.edges {
        out.push(Artifact { flag: "edges", path: Some(p.clone()), bytes: report.graph.edge_list().into_bytes() });
    }
    out.insert(0, doc_artifact(Document::Expander { report }, &a.out));
    Ok(out)
}

fn dist(a: &DistArgs) -> Result<Vec<Artifact>, CliError> {
    if !(a.delta > 0.0 && a.delta < 0.5) {
        return Err(bad(format!("--delta must lie in (0, 1/2), got {}", a.delta)));
    }
    let z = read_multiset(&a.z, a.m)?;
    let method = match a.method {
        MethodArg::Dp => Method::Dp,
        MethodArg::Walk => Method::Walk,
    };
    let table = exact_distribution(&z, method).map_err(|e| bad(e.to_string()))?;
    let uniformity = uniformity_report(&z, a.delta).map_err(|e| bad(e.to_string()))?;
    Ok(vec![doc_artifact(Document::Dist { z, method, table, uniformity }, &a.out)])
}

pub fn builtin_table(b: Builtin, n: usize) -> Result<BooleanFunctionTable, CliError> {
    let t = match b {
        Builtin::Maj => BooleanFunctionTable::majority(n),
        Builtin::Parity => BooleanFunctionTable::parity(n),
        Builtin::Omb => BooleanFunctionTable::omb(n),
    };
    t.map_err(|e| bad(e.to_string()))
}

fn approx(a: &ApproxArgs) -> Result<Vec<Artifact>, CliError> {
    if let Some(path) = &a.halfspace {
        let kind = match a.kind {
            ApproxKind::PolyLinear => BlackboxKind::PolyLinear,
            ApproxKind::RationalNewman => BlackboxKind::RationalNewman,
            _ => return Err(bad("--halfspace takes --kind poly-linear or rational-newman")),
        };
        let halfspace = read_halfspace(path)?;
        let approx = blackbox_approx(&halfspace, a.degree, kind).map_err(|e| bad(e.to_string()))?;
        return Ok(vec![doc_artifact(Document::Blackbox { halfspace, approx }, &a.out)]);
    }
    let f = match (&a.function, a.builtin) {
        (Some(p), _) => BooleanFunctionTable::parse(&read_text(p)?).map_err(|e| bad(format!("{}: {e}", p.display())))?,
        (None, Some(b)) => builtin_table(b, a.n.expect("clap requires --n"))?,
        (None, None) => return Err(bad("one of --fn, --builtin or --halfspace is required")),
    };
    let lab = |e: mdisc::approx::ApproxError| bad(e.to_string());
    let task = match a.kind {
        ApproxKind::Poly => ApproxTask::Poly { result: minimax_poly(&f, a.degree).map_err(lab)? },
        ApproxKind::Rational => ApproxTask::Rational {
            result: rational_minimax_boolean(&f, a.degree, a.d1.unwrap_or(a.degree)).map_err(lab)?,
        },
        ApproxKind::ThresholdDegree => ApproxTask::ThresholdDegree { result: threshold_degree(&f).map_err(lab)? },
        ApproxKind::ThresholdDensity => ApproxTask::ThresholdDensity { cap: a.cap, result: threshold_density(&f, a.cap).map_err(lab)? },
        ApproxKind::PolyLinear | ApproxKind::RationalNewman => return Err(bad("black-box kinds need --halfspace")),
    };
    Ok(vec![doc_artifact(Document::Approx { function: f.to_text(), task }, &a.out)])
}

fn lift(a: &LiftArgs) -> Result<Vec<Artifact>, CliError> {
    let halfspace = read_halfspace(&a.halfspace)?;
    let lifted = lift_to_nof(&halfspace, a.k, a.m_blk).map_err(|e| bad(e.to_string()))?;
    let rectangles = match a.rectangles {
        RectArg::Skip => RectangleMode::Skip,
        RectArg::Exhaustive => RectangleMode::Exhaustive,
        RectArg::Sampled => RectangleMode::Sampled { samples: a.samples, seed: need_seed(a.seed, "sampled rectangles")? },
    };
    let certificates = if a.certificates || rectangles != RectangleMode::Skip || a.disc.is_some() {
        let opts = CertificateOptions { rectangles, supplied_disc: a.disc };
        Some(communication_certificates(&lifted, &opts).map_err(|e| bad(e.to_string()))?)
    } else {
        None
    };
    let mut out = Vec::new();
    if let Some(p) = &a.emit_matrix {
        let csv = sign_matrix_csv(&lifted).map_err(|e| bad(e.to_string()))?;
        out.push(Artifact { flag: "emit-matrix", path: Some(p.clone()), bytes: csv.into_bytes() });
    }
    out.insert(0, doc_artifact(Document::Lift { halfspace, lifted, certificates }, &a.out));
    Ok(out)
}
