use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::PolicyConfig;
use crate::env::{EnvConfig, ACTIVITIES};
use crate::error::{Error, Result};
use crate::identity::JsdConfig;
use crate::occupant::REFERENCE_MET_SETS;
use crate::preference::ProfileVariant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupantSpec {
    pub id: String,
    pub met_indices: [f64; ACTIVITIES],
}

fn default_occupants() -> Vec<OccupantSpec> {
    REFERENCE_MET_SETS
        .iter()
        .map(|(id, met)| OccupantSpec {
            id: (*id).to_owned(),
            met_indices: *met,
        })
        .collect()
}

/// All knobs of one experiment, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_id")]
    pub experiment_id: String,
    pub n_models: usize,
    #[serde(default = "default_band")]
    pub pmv_band: f64,
    #[serde(default = "default_variant")]
    pub profile_variant: ProfileVariant,
    #[serde(default = "default_pretrain")]
    pub pretrain_episodes: u32,
    #[serde(default = "default_train")]
    pub train_episodes: u32,
    #[serde(default = "default_test")]
    pub test_episodes: u32,
    /// Overrides the variant's default divergence threshold.
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Per-episode CSV from an external baseline, for experiment B.
    #[serde(default)]
    pub baseline_csv: Option<PathBuf>,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default = "default_occupants")]
    pub occupants: Vec<OccupantSpec>,
}

fn default_id() -> String {
    "poshs".into()
}
fn default_band() -> f64 {
    0.25
}
fn default_variant() -> ProfileVariant {
    ProfileVariant::Activity12d
}
fn default_pretrain() -> u32 {
    350
}
fn default_train() -> u32 {
    150
}
fn default_test() -> u32 {
    50
}
fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Full-scale defaults for `n_models` occupants.
    pub fn new(n_models: usize) -> Self {
        Self {
            experiment_id: default_id(),
            n_models,
            pmv_band: default_band(),
            profile_variant: default_variant(),
            pretrain_episodes: default_pretrain(),
            train_episodes: default_train(),
            test_episodes: default_test(),
            tau: None,
            seeds: default_seeds(),
            output_dir: default_output(),
            baseline_csv: None,
            env: EnvConfig::default(),
            policy: PolicyConfig::default(),
            occupants: default_occupants(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=5).contains(&self.n_models) {
            return Err(Error::Config(format!(
                "n_models must be 2..=5, got {}",
                self.n_models
            )));
        }
        if self.occupants.len() < self.n_models {
            return Err(Error::Config(format!(
                "{} occupants defined, {} requested",
                self.occupants.len(),
                self.n_models
            )));
        }
        if self.pmv_band != 0.25 && self.pmv_band != 0.5 {
            return Err(Error::Config("pmv_band must be 0.25 or 0.5".into()));
        }
        if self.pretrain_episodes == 0 || self.train_episodes == 0 || self.test_episodes == 0 {
            return Err(Error::Config("episode counts must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.env.validate()?;
        self.policy.validate()?;
        self.jsd().validate()
    }

    pub fn jsd(&self) -> JsdConfig {
        let mut jsd = JsdConfig::for_variant(self.profile_variant, self.env.grid.clone());
        if let Some(tau) = self.tau {
            jsd.tau = tau;
        }
        jsd
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn occupant_ids(&self) -> Vec<String> {
        self.occupants[..self.n_models]
            .iter()
            .map(|o| o.id.clone())
            .collect()
    }
}
