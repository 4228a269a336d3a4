//! The Stackelberg POMDP: one long episode of equilibrium sub-episodes, in which the
//! followers' no-regret dynamics are driven by rollouts of the leader policy, followed by
//! reward sub-episodes that score the policy against the equilibrated followers.

mod env;
mod trace;

pub use env::{
    run_episode, run_equilibrium_phase, run_reward_phase, Actor, ActorChoice, PomdpConfig,
    PomdpState, StackelbergPomdp, StepOutcome, StrategyActor,
};
pub use trace::{EpisodeTrace, TraceStep};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Equilibrium,
    Reward,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Equilibrium => "equilibrium",
            Phase::Reward => "reward",
        }
    }
}

/// Number of equilibrium and reward sub-episodes in a long episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeSchedule {
    pub equilibrium_subepisodes: usize,
    pub reward_subepisodes: usize,
}

impl EpisodeSchedule {
    pub fn new(equilibrium_subepisodes: usize, reward_subepisodes: usize) -> Result<Self> {
        if equilibrium_subepisodes == 0 || reward_subepisodes == 0 {
            return Err(Error::Config("schedule needs T >= 1 and R >= 1".into()));
        }
        Ok(Self { equilibrium_subepisodes, reward_subepisodes })
    }

    /// 100 equilibrium and 10 reward sub-episodes.
    pub fn matrix() -> Self {
        Self { equilibrium_subepisodes: 100, reward_subepisodes: 10 }
    }

    /// 1000 equilibrium and 100 reward sub-episodes.
    pub fn bayesian() -> Self {
        Self { equilibrium_subepisodes: 1000, reward_subepisodes: 100 }
    }

    pub fn with_reward_subepisodes(self, reward_subepisodes: usize) -> Self {
        Self { reward_subepisodes, ..self }
    }
}
