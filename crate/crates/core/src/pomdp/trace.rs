use std::io::Write;

use super::Phase;
use crate::error::Result;
use crate::game::{Action, Observation};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep<R> {
    pub phase: Phase,
    /// Round index in the equilibrium phase, reward sub-episode index in the reward phase.
    pub subepisode: usize,
    pub observation: Observation,
    pub action: Action,
    pub reward: R,
    pub sampled: bool,
    pub log_prob: R,
    /// Hidden-state encoding before the action; empty unless recorded.
    pub hidden: Vec<R>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeTrace<R> {
    pub id: u64,
    pub steps: Vec<TraceStep<R>>,
}

impl<R: Real> EpisodeTrace<R> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_reward(&self) -> R {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// Undiscounted sum of rewards from each step to the end.
    pub fn reward_to_go(&self) -> Vec<R> {
        let mut out = vec![R::zero(); self.steps.len()];
        let mut acc = R::zero();
        for (k, s) in self.steps.iter().enumerate().rev() {
            acc += s.reward;
            out[k] = acc;
        }
        out
    }

    /// Rewards of the reward sub-episodes, in order.
    pub fn reward_subepisode_rewards(&self) -> Vec<R> {
        let mut out = Vec::new();
        let mut current: Option<usize> = None;
        for s in self.steps.iter().filter(|s| s.phase == Phase::Reward) {
            if current != Some(s.subepisode) {
                out.push(R::zero());
                current = Some(s.subepisode);
            }
            *out.last_mut().expect("pushed above") += s.reward;
        }
        out
    }

    /// Row per step: episode, phase, sub-episode, observation, action, reward.
    pub fn write_tsv<W: Write>(&self, mut out: W, header: bool) -> Result<()> {
        if header {
            writeln!(out, "episode\tphase\tsubepisode\tobservation\taction\treward")?;
        }
        for s in &self.steps {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{:.9}",
                self.id,
                s.phase.label(),
                s.subepisode,
                s.observation.encode(),
                crate::game::join(s.action.iter()),
                s.reward.f64()
            )?;
        }
        Ok(())
    }
}
