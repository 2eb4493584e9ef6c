//! Run configuration file (TOML) and command-line overrides.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{DataConfig, DataKind};
use crate::engine::{SamplerConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, PolicyMode, VariationalMode};

fn default_repeats() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Phase template for the consistency rate; the dataset default when unset.
    #[serde(default)]
    pub template: Option<String>,
    /// Two-sample ELBO draws averaged per held-out example.
    #[serde(default = "default_repeats")]
    pub nll_repeats: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            template: None,
            nll_repeats: 1,
            seed: 0,
        }
    }
}

fn default_data() -> DataConfig {
    DataConfig::new(DataKind::ToyGraph)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_data")]
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: default_data(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            sampler: SamplerConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    /// Sets the model, training, sampler and evaluation seeds. The data seed
    /// (and with it the split) is left alone.
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub policy_mode: Option<PolicyMode>,
    pub q_mode: Option<VariationalMode>,
    pub top_p: Option<f64>,
    pub samples: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.model.seed = s;
            self.train.seed = s;
            self.sampler.seed = s;
            self.eval.seed = s;
        }
        if let Some(v) = o.steps {
            self.train.steps = v;
        }
        if let Some(v) = o.batch_size {
            self.train.batch_size = v;
        }
        if let Some(v) = o.policy_mode {
            self.model.policy_mode = v;
        }
        if let Some(v) = o.q_mode {
            self.model.q_mode = v;
        }
        if let Some(v) = o.top_p {
            self.sampler.top_p = v;
        }
        if let Some(v) = o.samples {
            self.sampler.samples = v;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.sampler.validate()?;
        if self.eval.nll_repeats == 0 {
            return Err(Error::Config("eval.nll_repeats must be at least 1".into()));
        }
        Ok(())
    }
}
