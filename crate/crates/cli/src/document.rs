//! On-disk JSON documents. Every file carries `schema_version` and `kind`.

use mdisc::approx::{ApproxResult, DensityResult, SignRepresentation};
use mdisc::construction::ConstructionReport;
use mdisc::discrepancy::IntegerMultiset;
use mdisc::distribution::{DistributionTable, Method, UniformityReport};
use mdisc::expander::ExpanderReport;
use mdisc::halfspace::{BlackboxApprox, CommunicationReport, HalfspaceSpec, LiftedProblemSpec};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub schema_version: u32,
    #[serde(flatten)]
    pub doc: Document,
}

impl Envelope {
    pub fn new(doc: Document) -> Self {
        Envelope { schema_version: SCHEMA_VERSION, doc }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("documents serialize");
        out.push(b'\n');
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Document {
    Lowdisc {
        report: ConstructionReport,
    },
    Halfspace {
        spec: HalfspaceSpec,
    },
    Expander {
        report: ExpanderReport,
    },
    Dist {
        z: IntegerMultiset,
        method: Method,
        table: DistributionTable,
        uniformity: UniformityReport,
    },
    Approx {
        /// Truth table in the text format, `*` for points outside the domain.
        function: String,
        #[serde(flatten)]
        task: ApproxTask,
    },
    Blackbox {
        halfspace: HalfspaceSpec,
        approx: BlackboxApprox,
    },
    Lift {
        halfspace: HalfspaceSpec,
        lifted: LiftedProblemSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        certificates: Option<CommunicationReport>,
    },
    Manifest(RunManifest),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Lowdisc { .. } => "lowdisc",
            Document::Halfspace { .. } => "halfspace",
            Document::Expander { .. } => "expander",
            Document::Dist { .. } => "dist",
            Document::Approx { .. } => "approx",
            Document::Blackbox { .. } => "blackbox",
            Document::Lift { .. } => "lift",
            Document::Manifest(_) => "manifest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ApproxTask {
    Poly { result: ApproxResult },
    Rational { result: ApproxResult },
    ThresholdDegree { result: SignRepresentation },
    ThresholdDensity { cap: usize, result: DensityResult },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub flag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub sha256: String,
}

/// Everything needed to re-run an invocation and compare its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Arguments after the program name, global flags removed.
    pub argv: Vec<String>,
    pub cwd: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tool_version: String,
    pub wall_time_s: f64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
