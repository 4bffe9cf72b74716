use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, EnvKind};
use crate::error::{Error, Result};
use crate::learner::SacConfig;
use crate::replay::{HerStrategy, DEFAULT_CAPACITY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Language-relabeled higher rewards plus hindsight copies.
    Lgr2,
    /// Language-relabeled higher rewards only.
    Lgr2NoHer,
    /// Plain two-level SAC on summed environment rewards.
    Hier,
    /// Higher transitions relabeled with the achieved state as subgoal.
    Hac,
    /// Single-level SAC on the language reward.
    FlatL2r,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Lgr2,
        Mode::Lgr2NoHer,
        Mode::Hier,
        Mode::Hac,
        Mode::FlatL2r,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Lgr2 => "lgr2",
            Mode::Lgr2NoHer => "lgr2_no_her",
            Mode::Hier => "hier",
            Mode::Hac => "hac",
            Mode::FlatL2r => "flat_l2r",
        }
    }

    pub fn is_hierarchical(self) -> bool {
        self != Mode::FlatL2r
    }

    pub fn relabels_language(self) -> bool {
        matches!(self, Mode::Lgr2 | Mode::Lgr2NoHer)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s || m.as_str().replace('_', "-") == s)
            .ok_or_else(|| Error::config(format!("unknown mode `{s}`")))
    }
}

/// Everything that determines one training run except the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub env: EnvConfig,
    pub instruction: String,
    pub mode: Mode,
    /// Lower steps per subgoal.
    pub k: usize,
    pub horizon: usize,
    pub episodes: usize,
    pub her_strategy: HerStrategy,
    /// Hindsight copies per relabeled trajectory.
    pub her_count: usize,
    /// Higher trajectories drawn for relabeling each cycle.
    pub relabel_m: usize,
    /// Gradient steps per level per cycle.
    pub n_batches: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub random_eps: f64,
    pub noise_eps: f64,
    /// Probability that a lower-level sample gets a future achieved goal.
    pub lower_her_p: f64,
    pub sac: SacConfig,
    pub demo_enabled: bool,
    pub bc_weight: f64,
    pub seeds: Vec<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            env: EnvConfig::maze(0),
            instruction: "navigate to the bottom right corner".into(),
            mode: Mode::Lgr2,
            k: 10,
            horizon: 200,
            episodes: 2000,
            her_strategy: HerStrategy::Future,
            her_count: 4,
            relabel_m: 8,
            n_batches: 10,
            batch_size: 1024,
            buffer_capacity: DEFAULT_CAPACITY,
            random_eps: 0.2,
            noise_eps: 0.05,
            lower_her_p: 0.8,
            sac: SacConfig::default(),
            demo_enabled: false,
            bc_weight: 0.1,
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

impl TrainConfig {
    /// Settings used for desk-scale runs: width-64 networks and smaller batches.
    pub fn desk_scale(mode: Mode) -> Self {
        TrainConfig {
            mode,
            batch_size: 256,
            sac: SacConfig {
                hidden: 64,
                ..SacConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    /// Checks cross-field invariants. Returns lint warnings for settings
    /// that are accepted but have no effect.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let positive = [
            ("k", self.k),
            ("horizon", self.horizon),
            ("episodes", self.episodes),
            ("n_batches", self.n_batches),
            ("batch_size", self.batch_size),
            ("buffer_capacity", self.buffer_capacity),
            ("sac.hidden", self.sac.hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if self.mode.is_hierarchical() {
            if !self.horizon.is_multiple_of(self.k) {
                return Err(Error::config(format!(
                    "k = {} does not divide horizon = {}",
                    self.k, self.horizon
                )));
            }
        } else if self.k != TrainConfig::default().k {
            warnings.push(format!("k = {} is ignored in {} mode", self.k, self.mode));
        }
        if self.batch_size > self.buffer_capacity {
            return Err(Error::config("batch_size exceeds buffer_capacity"));
        }
        if self.mode == Mode::Lgr2 && self.her_count == 0 {
            return Err(Error::config("her_count must be at least 1 in lgr2 mode"));
        }
        if self.mode.relabels_language() && self.relabel_m == 0 {
            return Err(Error::config(
                "relabel_m must be at least 1 when relabeling",
            ));
        }
        if self.mode != Mode::Lgr2 && self.her_count != TrainConfig::default().her_count {
            warnings.push(format!("her_count is ignored in {} mode", self.mode));
        }
        for (name, p) in [
            ("random_eps", self.random_eps),
            ("noise_eps", self.noise_eps),
            ("lower_her_p", self.lower_her_p),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} = {p} outside [0, 1]")));
            }
        }
        let sac = &self.sac;
        if !(sac.lr > 0.0
            && sac.alpha >= 0.0
            && (0.0..1.0).contains(&sac.gamma)
            && (0.0..=1.0).contains(&sac.tau))
        {
            return Err(Error::config(
                "sac settings need lr > 0, alpha >= 0, gamma in [0, 1), tau in [0, 1]",
            ));
        }
        if sac.hidden_layers == 0 {
            return Err(Error::config("sac.hidden_layers must be positive"));
        }
        if self.bc_weight < 0.0 {
            return Err(Error::config("bc_weight must be non-negative"));
        }
        if self.demo_enabled && self.env.kind == EnvKind::Maze {
            return Err(Error::config(
                "demonstrations are not available for the maze",
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if self.instruction.trim().is_empty() {
            return Err(Error::config("instruction is empty"));
        }
        Ok(warnings)
    }
}
