use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trainer::TrainConfig;

/// Version of the run-config layout; files declaring another version are rejected.
pub const RUN_CONFIG_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TranslatorBackend {
    #[default]
    Grammar,
    Llm,
}

/// Training settings plus where and how often results are written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub out_dir: PathBuf,
    /// Cycles between evaluations.
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub translator_backend: TranslatorBackend,
    /// Higher transitions examined by the staleness diagnostic at each evaluation.
    #[serde(default = "default_staleness_samples")]
    pub staleness_samples: usize,
    /// Evaluation points averaged into the terminal success rate.
    #[serde(default = "default_terminal_window")]
    pub terminal_window: usize,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_eval_every() -> usize {
    10
}

fn default_eval_episodes() -> usize {
    20
}

fn default_staleness_samples() -> usize {
    64
}

fn default_terminal_window() -> usize {
    5
}

impl RunConfig {
    pub fn new(train: TrainConfig, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            schema: RUN_CONFIG_SCHEMA,
            out_dir: out_dir.into(),
            eval_every: default_eval_every(),
            eval_episodes: default_eval_episodes(),
            translator_backend: TranslatorBackend::Grammar,
            staleness_samples: default_staleness_samples(),
            terminal_window: default_terminal_window(),
            train,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("run config: {e}")))?;
        if cfg.schema != RUN_CONFIG_SCHEMA {
            return Err(Error::config(format!(
                "run config schema {} is not the supported {RUN_CONFIG_SCHEMA}",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Validates the training settings and the evaluation plumbing. Returns
    /// the training config's lint warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.schema != RUN_CONFIG_SCHEMA {
            return Err(Error::config(format!(
                "unsupported run config schema {}",
                self.schema
            )));
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("eval_episodes must be at least 1"));
        }
        if self.eval_every == 0 {
            return Err(Error::config("eval_every must be at least 1"));
        }
        if self.terminal_window == 0 {
            return Err(Error::config("terminal_window must be at least 1"));
        }
        if self.out_dir.as_os_str().is_empty() {
            return Err(Error::config("out_dir is empty"));
        }
        self.train.validate()
    }
}
