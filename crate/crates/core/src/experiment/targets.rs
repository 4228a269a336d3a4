use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::SettingConfig;
use crate::error::Result;
use crate::game::presets;
use crate::oracle::{
    solve_deterministic_stackelberg, solve_randomized_stackelberg, solve_spm_exhaustive, OracleReport,
    DEFAULT_SIZE_CAP, DEFAULT_TREE_CAP,
};

/// Grid resolution for leader mixtures.
pub const MIXTURE_RESOLUTION: f64 = 0.01;

/// Oracle values in the normalized units evaluations are reported in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleTarget {
    /// Best achievable evaluation reward.
    pub value: f64,
    /// For mechanism design with messages: the best reward without messaging.
    pub no_message_bound: Option<f64>,
    pub strategy: String,
    pub enumerated: usize,
    pub wall_seconds: f64,
}

impl OracleTarget {
    pub fn report(&self, setting: &SettingConfig) -> OracleReport {
        let mut strategy = self.strategy.clone();
        if let Some(b) = self.no_message_bound {
            strategy.push_str(&format!("\nbest reward without messages: {b:.6}"));
        }
        OracleReport {
            setting: setting.id(),
            strategy,
            value: self.value,
            enumerated: self.enumerated,
            wall_seconds: self.wall_seconds,
        }
    }
}

/// Solves the setting exactly.
pub fn oracle_target(setting: &SettingConfig) -> Result<OracleTarget> {
    let start = Instant::now();
    let game = setting.game()?;
    let norm = game.leader_normalizer();
    let (value, no_message_bound, strategy, enumerated) = match setting {
        SettingConfig::MaintainRandomized { .. } => {
            let s = solve_randomized_stackelberg(&presets::maintain::<f64>(), MIXTURE_RESOLUTION, DEFAULT_SIZE_CAP)?;
            (s.leader_value / norm, None, s.description, s.enumerated)
        }
        SettingConfig::MuSpm { .. } => {
            let spm = setting.spm_setting().expect("mechanism setting")?;
            let with = solve_spm_exhaustive(&spm, true, DEFAULT_TREE_CAP)?;
            let without = solve_spm_exhaustive(&spm, false, DEFAULT_TREE_CAP)?;
            let enumerated = with.enumerated + without.enumerated;
            (with.reward(), Some(without.reward()), with.describe(), enumerated)
        }
        _ => {
            let s = solve_deterministic_stackelberg(&game, DEFAULT_SIZE_CAP)?;
            (s.leader_value / norm, None, s.description, s.enumerated)
        }
    };
    Ok(OracleTarget { value, no_message_bound, strategy, enumerated, wall_seconds: start.elapsed().as_secs_f64() })
}
