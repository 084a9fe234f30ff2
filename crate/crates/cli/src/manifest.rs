//! JSON manifest schema: a versioned task description with per-task
//! payloads, policy overrides and an optional output path.

use serde::Deserialize;
use std::collections::BTreeMap;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema: u32,
    pub task: TaskKind,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default)]
    pub out: Option<String>,
    pub payload: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Jk,
    PnoCheck,
    WebCheck,
    PdeResidual,
    WebFromSolution,
    SelfPropelled,
    Extend,
    UpConstruct,
    ClassifyPair,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Jk => "jk",
            TaskKind::PnoCheck => "pno-check",
            TaskKind::WebCheck => "web-check",
            TaskKind::PdeResidual => "pde-residual",
            TaskKind::WebFromSolution => "web-from-solution",
            TaskKind::SelfPropelled => "self-propelled",
            TaskKind::Extend => "extend",
            TaskKind::UpConstruct => "up-construct",
            TaskKind::ClassifyPair => "classify-pair",
        }
    }
}

/// Sampling policy knobs; command-line flags override manifest values.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_seed() -> u64 {
    0
}
fn default_tol() -> f64 {
    1e-9
}
fn default_samples() -> usize {
    12
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            seed: default_seed(),
            tol: default_tol(),
            samples: default_samples(),
        }
    }
}

// Per-task payloads. Matrices are rows of Gaussian-rational strings,
// expressions use the core grammar, points map variables to rationals.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JkPayload {
    pub s1: Vec<Vec<String>>,
    pub s2: Vec<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PnoCheckPayload {
    pub pno: serde_json::Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WebCheckPayload {
    pub web: serde_json::Value,
    /// "full" or "sampled" (default: sampled with n+3 parameters).
    #[serde(default)]
    pub mode: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdePayload {
    /// Catalog symbol: A0..A3, B0..B3, C0, C1, K4, K4Deg.
    pub equation: String,
    #[serde(default)]
    pub params: Vec<String>,
    pub functions: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfPropelledPayload {
    pub web: serde_json::Value,
    pub phi: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendPayload {
    pub pno: serde_json::Value,
    pub phis: [String; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpConstructPayload {
    pub pno: serde_json::Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyPairPayload {
    pub p1: serde_json::Value,
    pub p2: serde_json::Value,
    pub point: BTreeMap<String, String>,
}
