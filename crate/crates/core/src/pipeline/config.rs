//! Run configuration shared by all subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::FitOptions;

use super::scenario::ScenarioSpec;

fn default_seed() -> u64 {
    1
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_m() -> usize {
    10
}
fn default_degree() -> usize {
    3
}
fn default_alpha() -> f64 {
    0.05
}
fn default_training() -> usize {
    5
}
fn default_reps() -> usize {
    20
}
fn default_pre() -> f64 {
    0.2
}
fn default_post() -> f64 {
    0.4
}
fn default_bin() -> f64 {
    0.001
}
fn default_trials() -> usize {
    60
}
fn default_min_spikes() -> f64 {
    10.0
}

/// Top-level configuration file. Each subcommand reads its own section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; `None` uses the available parallelism. Results do not
    /// depend on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<ScenarioSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infer: Option<InferSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prep: Option<PrepSection>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("line {}: {e}", e.line())))
    }

    /// The configuration as written next to outputs: everything except the
    /// thread count.
    pub fn resolved(&self) -> Self {
        Self {
            threads: None,
            ..self.clone()
        }
    }
}

/// Where the penalty comes from when it is not fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSpec {
    /// Scenario to simulate training panels from; defaults to `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default = "default_training")]
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub panel: PathBuf,
    /// Spline basis size; 0 fits the plain lagged logistic model.
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Fixed penalty. Without it the penalty is BIC-selected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Select the penalty on simulated training panels instead of the
    /// analyzed panel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingSpec>,
    #[serde(default)]
    pub options: FitOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferSection {
    pub panel: PathBuf,
    /// Directory holding the outputs of `fit`.
    pub fit_dir: PathBuf,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

/// Which matrix ranks edges for the AUC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AucScores {
    #[default]
    Penalized,
    Desparsified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvalSection {
    /// Score existing outputs of `simulate`, `fit` and `infer`.
    Files {
        truth_dir: PathBuf,
        fit_dir: PathBuf,
        infer_dir: PathBuf,
        #[serde(default)]
        auc_scores: AucScores,
    },
    /// Simulate, fit, infer and score `replicates` panels per scenario.
    Scenarios {
        scenarios: BTreeMap<String, ScenarioSpec>,
        #[serde(default = "default_reps")]
        replicates: usize,
        #[serde(default = "default_m")]
        m: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        #[serde(default = "default_training")]
        training_replicates: usize,
        #[serde(default)]
        auc_scores: AucScores,
        #[serde(default)]
        options: FitOptions,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepSection {
    pub events: PathBuf,
    /// Anchor files by alignment name, e.g. `stimulus` and `movement`.
    pub alignments: BTreeMap<String, PathBuf>,
    #[serde(default = "default_pre")]
    pub pre_s: f64,
    #[serde(default = "default_post")]
    pub post_s: f64,
    #[serde(default = "default_bin")]
    pub bin_width_s: f64,
    /// Most active trials kept per panel.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_min_spikes")]
    pub min_mean_spikes: f64,
}
