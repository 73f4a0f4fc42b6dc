//! Experiment configuration schema (JSON).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pmcmc,
    Mlpmcmc,
}

/// One experiment: model, data synthesis, algorithm resources, outputs.
///
/// Single-level runs use `l`, `N`, `K`; multilevel runs use either the
/// explicit plan (`l_star`, `L`, `N_l`, `K_l`) or auto-allocation from
/// `epsilon` with constants `c_K`, `c_N`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: String,
    /// Model parameter overrides (partial JSON object).
    #[serde(default)]
    pub overrides: serde_json::Value,
    /// Ground-truth parameter vector for synthesis; defaults to the model's
    /// reference values.
    #[serde(default)]
    pub theta_true: Option<Vec<f64>>,

    /// Observation horizon in unit time steps.
    #[serde(rename = "T")]
    pub horizon: usize,
    /// Load observations from this CSV instead of synthesizing.
    #[serde(default)]
    pub data_path: Option<String>,
    /// Discretization level used to synthesize data.
    #[serde(default = "default_sim_level")]
    pub sim_level: u32,
    /// Law-cloud size used to synthesize data.
    #[serde(default = "default_sim_cloud")]
    pub sim_cloud: usize,

    pub algorithm: Algorithm,

    // single-level resources
    #[serde(default)]
    pub l: Option<u32>,
    #[serde(default, rename = "N")]
    pub n_particles: Option<usize>,
    #[serde(default, rename = "K")]
    pub iterations: Option<usize>,

    // multilevel resources
    #[serde(default, alias = "l*")]
    pub l_star: Option<u32>,
    #[serde(default, rename = "L")]
    pub l_max: Option<u32>,
    #[serde(default, rename = "N_l")]
    pub n_per_level: Option<Vec<usize>>,
    #[serde(default, rename = "K_l")]
    pub k_per_level: Option<Vec<usize>>,
    #[serde(default, alias = "ε")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_one", rename = "c_K")]
    pub c_k: f64,
    #[serde(default = "default_one", rename = "c_N")]
    pub c_n: f64,

    /// Delta-filter / bootstrap-filter particle count.
    #[serde(rename = "M")]
    pub filter_particles: usize,

    #[serde(default)]
    pub burn_in: usize,
    /// Proposal step standard deviations on the unconstrained scale; defaults
    /// to 0.25 per coordinate.
    #[serde(default)]
    pub proposal_scales: Option<Vec<f64>>,
    /// Explicit chain start on the natural scale; defaults to a prior draw.
    #[serde(default)]
    pub start: Option<Vec<f64>>,

    #[serde(default)]
    pub seed: u64,
    /// Parameter names whose posterior means are reported; defaults to all.
    #[serde(default)]
    pub functionals: Option<Vec<String>>,
}

fn default_sim_level() -> u32 {
    10
}

fn default_sim_cloud() -> usize {
    10_000
}

fn default_one() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("T must be at least 1".into()));
        }
        if self.filter_particles == 0 {
            return Err(Error::Config("M must be at least 1".into()));
        }
        match self.algorithm {
            Algorithm::Pmcmc => {
                if self.l.is_none() || self.n_particles.is_none() || self.iterations.is_none() {
                    return Err(Error::Config(
                        "pmcmc needs l, N, and K".into(),
                    ));
                }
            }
            Algorithm::Mlpmcmc => {
                let explicit = self.l_star.is_some()
                    && self.l_max.is_some()
                    && self.n_per_level.is_some()
                    && self.k_per_level.is_some();
                let auto = self.epsilon.is_some() && self.l_star.is_some();
                if !explicit && !auto {
                    return Err(Error::Config(
                        "mlpmcmc needs either (l_star, L, N_l, K_l) or (l_star, epsilon)".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}
