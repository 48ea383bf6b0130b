//! Experiment configuration documents (JSON).
//!
//! ```json
//! { "kind": "consensus", "seed": 7, "output": "out/consensus",
//!   "params": { "family": "families/two_member.json", "b": 64, "iterations": 200 } }
//! ```
//!
//! Paths inside `params` are resolved against the directory of the config
//! file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{RunError, RunResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(flatten)]
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum Experiment {
    Spectral(SpectralConfig),
    Consensus(ConsensusConfig),
    Decopt(DecoptConfig),
    Lowerbound(LowerboundConfig),
    FamilyDiagnose(FamilyDiagnoseConfig),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Spectral(_) => "spectral",
            Experiment::Consensus(_) => "consensus",
            Experiment::Decopt(_) => "decopt",
            Experiment::Lowerbound(_) => "lowerbound",
            Experiment::FamilyDiagnose(_) => "family-diagnose",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Weights as written in the graph file.
    #[default]
    File,
    ShortestPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    pub graph: PathBuf,
    #[serde(default)]
    pub weighting: Weighting,
    /// Retune one edge weight so that the condition number hits this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retune_chi: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsensusConfig {
    pub family: PathBuf,
    pub b: u64,
    pub iterations: usize,
    #[serde(default = "one")]
    pub dim: usize,
    /// Initial values for a one-dimensional payload; random in `[-1, 1]` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Rounds of the plain gossip baseline; none when zero.
    #[serde(default)]
    pub gossip_rounds: usize,
}

fn default_c_t() -> f64 {
    slowvary_core::decopt::DEFAULT_INNER_CONST
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoptConfig {
    pub family: PathBuf,
    pub dim: usize,
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub epsilon: f64,
    #[serde(default = "default_c_t")]
    pub c_t: f64,
    /// Batch knob of the inner method; defaults to the mixing time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<u64>,
    /// Overrides the derived inner iteration count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<usize>,
    /// Overrides the derived outer iteration count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<usize>,
}

fn default_chi_floor() -> f64 {
    slowvary_core::lowerbound::FLOOR_MIN_CHI
}

fn default_span_coordinates() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerboundConfig {
    pub n: usize,
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub m_max: usize,
    #[serde(default = "default_chi_floor")]
    pub chi_floor: f64,
    #[serde(default = "default_span_coordinates")]
    pub span_coordinates: usize,
    /// Outer steps of the accelerated method (stops earlier at the horizon).
    pub outer: usize,
    /// Inner consensus iterations per outer step.
    pub inner: usize,
    /// Rounds of the gossip-gradient baseline (stops earlier at the horizon).
    pub dgd_rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDiagnoseConfig {
    pub family: PathBuf,
    /// Horizons at which the kernel contraction is reported.
    pub steps: Vec<u64>,
}

/// Kernel of a family file: `"lazy-uniform p=0.25"`, `"lazy-ring p=0.5"`
/// or an explicit row-stochastic matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelSpec {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

/// Family file: member graph files, stationary distribution (uniform when
/// absent), kernel and mixing time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyFile {
    pub members: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
    pub kernel: KernelSpec,
    pub tau: u64,
}

pub fn parse_config(text: &str) -> RunResult<ExperimentConfig> {
    serde_json::from_str(text).map_err(|e| RunError::Schema(e.to_string()))
}

pub fn read_config(path: &Path) -> RunResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::read(path, e))?;
    parse_config(&text).map_err(|e| match e {
        RunError::Schema(m) => RunError::Schema(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn read_family_file(path: &Path) -> RunResult<FamilyFile> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::read(path, e))?;
    serde_json::from_str(&text).map_err(|e| RunError::Schema(format!("{}: {e}", path.display())))
}

/// Resolves `p` against `base` unless it is absolute.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_kind() {
        let c = parse_config(
            r#"{"kind":"consensus","seed":3,"params":{"family":"f.json","b":4,"iterations":10}}"#,
        )
        .unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.experiment.kind(), "consensus");
        let c = parse_config(
            r#"{"kind":"lowerbound","seed":0,"params":{"n":4,"mu":1,"L":100,"m_max":64,"outer":5,"inner":3,"dgd_rounds":10}}"#,
        )
        .unwrap();
        match c.experiment {
            Experiment::Lowerbound(p) => assert_eq!(p.chi_floor, 56.0),
            _ => panic!(),
        }
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(parse_config("{").is_err());
        assert!(parse_config(r#"{"kind":"nope","seed":1,"params":{}}"#).is_err());
        assert!(parse_config(
            r#"{"kind":"spectral","seed":1,"params":{"graph":"g","extra":1}}"#
        )
        .is_err());
        assert!(parse_config(r#"{"kind":"spectral","params":{"graph":"g"}}"#).is_err());
    }

    #[test]
    fn kernel_forms() {
        let f: FamilyFile = serde_json::from_str(
            r#"{"members":["a"],"kernel":[[1.0]],"tau":1}"#,
        )
        .unwrap();
        assert_eq!(f.kernel, KernelSpec::Matrix(vec![vec![1.0]]));
        let f: FamilyFile = serde_json::from_str(
            r#"{"members":["a"],"kernel":"lazy-uniform p=0.25","tau":1}"#,
        )
        .unwrap();
        assert_eq!(f.kernel, KernelSpec::Named("lazy-uniform p=0.25".into()));
    }
}
