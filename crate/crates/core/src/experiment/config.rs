use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{presets, MatrixDesign, RewardRule, SpmSetting};
use crate::policy::{TrainConfig, TrainingMode};
use crate::pomdp::{EpisodeSchedule, PomdpConfig};
use crate::Game;

pub const SCHEMA_VERSION: u32 = 1;

/// Which game an experiment trains on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SettingConfig {
    Maintain,
    MaintainRandomized {
        #[serde(default = "default_levels")]
        weight_levels: usize,
    },
    Escape,
    MatrixDesign {
        #[serde(default = "default_payments")]
        payments: Vec<f64>,
    },
    Allocation {
        items: usize,
        messages: usize,
    },
    MuSpm {
        /// Probability of agent 1's high value, which is `1 / (2 eps)`.
        #[serde(default = "default_spm_eps")]
        eps: f64,
    },
}

fn default_levels() -> usize {
    6
}

fn default_payments() -> Vec<f64> {
    (0..=10).map(f64::from).collect()
}

fn default_spm_eps() -> f64 {
    0.2
}

impl SettingConfig {
    pub fn id(&self) -> String {
        match self {
            SettingConfig::Maintain => "maintain".into(),
            SettingConfig::MaintainRandomized { .. } => "maintain_randomized".into(),
            SettingConfig::Escape => "escape".into(),
            SettingConfig::MatrixDesign { .. } => "matrix_design".into(),
            SettingConfig::Allocation { items, messages } => format!("allocation_k{items}_m{messages}"),
            SettingConfig::MuSpm { .. } => "mu_spm".into(),
        }
    }

    /// Parses the ids accepted on the command line, e.g. `allocation:3:2` or `mu_spm`.
    pub fn parse(id: &str) -> Result<Self> {
        let parts: Vec<&str> = id.split(':').collect();
        let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Config(format!("bad number {s:?} in {id:?}")));
        Ok(match parts.as_slice() {
            ["maintain"] => SettingConfig::Maintain,
            ["maintain_randomized"] => SettingConfig::MaintainRandomized { weight_levels: default_levels() },
            ["escape"] => SettingConfig::Escape,
            ["matrix_design"] => SettingConfig::MatrixDesign { payments: default_payments() },
            ["allocation", k, m] => SettingConfig::Allocation { items: num(k)?, messages: num(m)? },
            ["mu_spm"] => SettingConfig::MuSpm { eps: default_spm_eps() },
            _ => return Err(Error::Config(format!("unknown setting {id:?}"))),
        })
    }

    pub fn game(&self) -> Result<Game> {
        match self {
            SettingConfig::Maintain => Game::normal_form(presets::maintain(), false),
            SettingConfig::MaintainRandomized { weight_levels } => {
                crate::game::NormalForm::new(presets::maintain(), Some(*weight_levels))?.into_game()
            }
            SettingConfig::Escape => Game::normal_form(presets::escape(), false),
            SettingConfig::MatrixDesign { payments } => {
                Game::matrix_design(MatrixDesign::standard_base(), payments.clone(), RewardRule::ActionsDiffer)
            }
            SettingConfig::Allocation { items, messages } => Game::simple_allocation(*items, *messages),
            SettingConfig::MuSpm { eps } => Game::mu_spm(self.spm(*eps)?),
        }
    }

    pub fn spm_setting(&self) -> Option<Result<SpmSetting<f64>>> {
        match self {
            SettingConfig::MuSpm { eps } => Some(self.spm(*eps)),
            _ => None,
        }
    }

    fn spm(&self, eps: f64) -> Result<SpmSetting<f64>> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Config(format!("mu_spm eps must lie in (0, 1), got {eps}")));
        }
        SpmSetting::agrawal(eps)
    }

    pub fn is_bayesian(&self) -> bool {
        matches!(self, SettingConfig::Allocation { .. } | SettingConfig::MuSpm { .. })
    }

    /// Multiplicative-weights step on [0, 1]-scaled payoffs equal to a step of 0.1 on raw
    /// payoffs: `1.1^range - 1`, with `range` the widest follower payoff range.
    pub fn default_mw_epsilon(&self) -> Result<f64> {
        let game = self.game()?;
        let range = game.follower_ranges().iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
        Ok(1.1f64.powf(range) - 1.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub equilibrium_subepisodes: Option<usize>,
    pub reward_subepisodes: Option<usize>,
    pub mw_epsilon: Option<f64>,
}

/// One experiment: a setting, trainer settings, and the seeds and modes to run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub setting: SettingConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default = "default_modes")]
    pub modes: Vec<TrainingMode>,
    pub seeds: Vec<u64>,
    /// Concurrent seed pipelines; all available cores when unset.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub train: TrainConfig,
    /// Write a trainer checkpoint per seed after training.
    #[serde(default = "default_true")]
    pub checkpoints: bool,
}

fn default_modes() -> Vec<TrainingMode> {
    vec![TrainingMode::CentralizedCritic]
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_".contains(c)) {
            return Err(Error::Config(format!("experiment name {:?} must be [A-Za-z0-9_-]+", self.name)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds".into()));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.modes.is_empty() || self.modes.iter().collect::<BTreeSet<_>>().len() != self.modes.len() {
            return Err(Error::Config("modes must be nonempty and distinct".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        if let Some(eps) = self.schedule.mw_epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::Config(format!("mw_epsilon must be positive, got {eps}")));
            }
        }
        self.train.validate()?;
        self.setting.game()?;
        self.pomdp()?;
        Ok(())
    }

    pub fn pomdp(&self) -> Result<PomdpConfig<f64>> {
        let base = if self.setting.is_bayesian() { EpisodeSchedule::bayesian() } else { EpisodeSchedule::matrix() };
        let schedule = EpisodeSchedule::new(
            self.schedule.equilibrium_subepisodes.unwrap_or(base.equilibrium_subepisodes),
            self.schedule.reward_subepisodes.unwrap_or(base.reward_subepisodes),
        )?;
        let eps = match self.schedule.mw_epsilon {
            Some(e) => e,
            None => self.setting.default_mw_epsilon()?,
        };
        Ok(PomdpConfig::new(schedule, eps))
    }

    /// Trainer settings for one run.
    pub fn train_config(&self, mode: TrainingMode, seed: u64) -> TrainConfig {
        TrainConfig { mode, seed, ..self.train.clone() }
    }
}
