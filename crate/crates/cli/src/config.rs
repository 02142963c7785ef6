//! Experiment configuration: a single versioned JSON document, with
//! command-line flags overriding file values. Unknown keys are rejected so a
//! typo cannot silently fall back to a default.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use marine_core::llm::EndpointConfig;
use marine_core::simulation::{PolicySpec, ScoreModel};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Master seed; every stream in a run derives from it. Never
    /// time-derived.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Trial count; when absent each command uses its documented default
    /// (10000 for verification suites, 1000 for policy simulation).
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Invocation budget for policy simulation (the answer call is extra).
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub verify: VerifyParams,
    /// Score model for simulation commands; conditioning defaults when
    /// absent.
    #[serde(default)]
    pub model: Option<ScoreModel>,
    /// Explicit policy roster for `simulate`; a documented default set when
    /// absent.
    #[serde(default)]
    pub policies: Option<Vec<PolicySpec>>,
    #[serde(default)]
    pub endpoint: Option<EndpointConfig>,
}

fn default_seed() -> u64 {
    1
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_budget() -> usize {
    8
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            seed: default_seed(),
            trials: None,
            out_dir: default_out_dir(),
            budget: default_budget(),
            verify: VerifyParams::default(),
            model: None,
            policies: None,
            endpoint: None,
        }
    }
}

/// Parameters for the verification checks; every field has the documented
/// default pinned here.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyParams {
    /// Improvement probability for the fixed-budget ordering experiment.
    pub p: f64,
    /// Batch-size arms for the ordering experiment.
    pub m_grid: Vec<usize>,
    /// Total invocation budget per ordering arm.
    pub budget: usize,
    /// Improvement-probability floor for the growth-schedule experiment.
    pub p_floor: f64,
    /// Failure budget for the growth-schedule experiment.
    pub delta: f64,
    /// Round horizon for the growth-schedule experiment.
    pub horizon: usize,
    /// Improvement probability of the constant-batch control arm.
    pub control_p: f64,
    /// Rounds for the conditioning-drift experiment.
    pub rounds: usize,
    /// Flatness band for the mean-shift contrast.
    pub band: f64,
    /// Probability grid for the closed-form vs Monte Carlo check.
    pub p_mc_grid: Vec<f64>,
    /// Batch grid for the closed-form vs Monte Carlo check.
    pub m_mc_grid: Vec<usize>,
    /// Trials for the closed-form vs Monte Carlo check.
    pub mc_trials: usize,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            p: 0.3,
            m_grid: vec![1, 2, 4, 8],
            budget: 48,
            p_floor: 0.3,
            delta: 0.05,
            horizon: 200,
            control_p: 0.1,
            rounds: 50,
            band: 0.03,
            p_mc_grid: vec![0.05, 0.1, 0.2, 0.3, 0.45],
            m_mc_grid: vec![1, 2, 4, 8],
            mc_trials: 100_000,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        if config.version != CONFIG_VERSION {
            bail!(
                "config version {} unsupported (expected {CONFIG_VERSION})",
                config.version
            );
        }
        Ok(config)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn model_or_default(&self) -> ScoreModel {
        self.model
            .clone()
            .unwrap_or_else(ScoreModel::conditioning_defaults)
    }

    pub fn verify_trials(&self) -> usize {
        self.trials.unwrap_or(10_000)
    }

    pub fn simulate_trials(&self) -> usize {
        self.trials.unwrap_or(1_000)
    }
}
