use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gradient::{proximal_update, PolicySample, ProximalConfig, ScoreAttribution};
use super::net::Adam;
use super::{ActMode, Architecture, CachedActor, CriticInput, CriticNet, LeaderPolicy};
use crate::error::{Error, Result};
use crate::game::BayesianGame;
use crate::pomdp::{run_episode, EpisodeTrace, PomdpConfig, StackelbergPomdp};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    /// The critic sees the full hidden state of the long episode.
    CentralizedCritic,
    /// The critic sees only the leader's observation.
    Plain,
}

impl TrainingMode {
    pub fn label(self) -> &'static str {
        match self {
            TrainingMode::CentralizedCritic => "centralized_critic",
            TrainingMode::Plain => "plain",
        }
    }

    pub fn critic_input(self) -> CriticInput {
        match self {
            TrainingMode::CentralizedCritic => CriticInput::Centralized,
            TrainingMode::Plain => CriticInput::ObservationOnly,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub critic_learning_rate: f64,
    pub clip_ratio: f64,
    /// Long episodes per policy update.
    pub batch_episodes: usize,
    /// Environment steps (policy queries) to train for.
    pub total_steps: u64,
    /// Environment steps between greedy evaluation episodes.
    pub eval_interval: u64,
    pub seed: u64,
    pub mode: TrainingMode,
    pub policy_epochs: usize,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub normalize_advantage: bool,
    pub attribution: ScoreAttribution,
    pub architecture: Architecture,
    pub critic_hidden: usize,
    pub critic_epochs: usize,
    pub critic_minibatch: usize,
    /// Reward sub-episodes in evaluation episodes; the training schedule's count if unset.
    pub eval_reward_subepisodes: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-3,
            critic_learning_rate: 1e-3,
            clip_ratio: 0.2,
            batch_episodes: 8,
            total_steps: 200_000,
            eval_interval: 10_000,
            seed: 0,
            mode: TrainingMode::CentralizedCritic,
            policy_epochs: 10,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            normalize_advantage: true,
            attribution: ScoreAttribution::FirstVisit,
            architecture: Architecture::Tabular,
            critic_hidden: 64,
            critic_epochs: 2,
            critic_minibatch: 256,
            eval_reward_subepisodes: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.learning_rate > 0.0 && self.learning_rate.is_finite(), "learning_rate must be positive"),
            (self.critic_learning_rate > 0.0, "critic_learning_rate must be positive"),
            (self.clip_ratio > 0.0 && self.clip_ratio < 1.0, "clip_ratio must lie in (0, 1)"),
            (self.batch_episodes > 0, "batch_episodes must be positive"),
            (self.total_steps > 0, "total_steps must be positive"),
            (self.eval_interval > 0, "eval_interval must be positive"),
            (self.policy_epochs > 0, "policy_epochs must be positive"),
            (self.entropy_coef >= 0.0, "entropy_coef must be non-negative"),
            (self.max_grad_norm > 0.0, "max_grad_norm must be positive"),
            (self.critic_hidden > 0, "critic_hidden must be positive"),
            (self.critic_epochs > 0, "critic_epochs must be positive"),
            (self.critic_minibatch > 0, "critic_minibatch must be positive"),
            (self.eval_reward_subepisodes != Some(0), "eval_reward_subepisodes must be positive"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Config((*msg).into())),
            None => Ok(()),
        }
    }
}

/// SplitMix64 mix of a base seed with a stream tag and an index.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xd1b5_4a32_d192_ed03));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const EPISODE_STREAM: u64 = 1;
const ACTOR_STREAM: u64 = 2;
const EVAL_STREAM: u64 = 3;

/// One greedy evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub step: u64,
    pub eval_reward: f64,
    pub value_loss: f64,
    pub mode: TrainingMode,
    pub seed: u64,
    /// Greedy action per observation class (or at the opening observation for large games).
    pub greedy: String,
}

/// Mean normalized reward over the reward phase of one greedy episode.
pub fn evaluate<R: Real>(
    policy: &LeaderPolicy<R>,
    game: &BayesianGame<R>,
    config: &PomdpConfig<R>,
    seed: u64,
) -> Result<R> {
    let mut actor = CachedActor::new(policy, game, ActMode::Greedy, seed);
    let (trace, _) = run_episode(game, &mut actor, config, seed, false)?;
    let rewards = trace.reward_subepisode_rewards();
    let n = R::from_usize_lossy(rewards.len().max(1));
    Ok(rewards.into_iter().sum::<R>() / n / game.leader_normalizer())
}

/// Greedy actions of `policy`, one `observation=action` entry per class for small games.
pub fn greedy_summary<R: Real>(policy: &LeaderPolicy<R>, game: &BayesianGame<R>) -> String {
    let layout = game.observation_layout();
    let entry = |obs| {
        let (a, _) = policy.greedy(game, &obs);
        format!("{}={}", obs.encode(), game.describe_action(&a))
    };
    if layout.classes() <= 16 {
        (0..layout.classes()).map(|k| entry(layout.decode(k))).collect::<Vec<_>>().join("; ")
    } else {
        let n = game.n_followers();
        entry(game.observe(&game.start(&vec![0; n], &vec![0; n])))
    }
}

/// Actor-critic trainer with a clipped-surrogate policy update.
pub struct Trainer<'g, R> {
    game: &'g BayesianGame<R>,
    pomdp: PomdpConfig<R>,
    eval_pomdp: PomdpConfig<R>,
    pub config: TrainConfig,
    pub policy: LeaderPolicy<R>,
    pub critic: CriticNet<R>,
    pub policy_optimizer: Adam<R>,
    pub critic_rng: ChaCha8Rng,
    pub steps: u64,
    pub episodes: u64,
    pub evaluations: u64,
    pub value_loss: Option<R>,
}

impl<'g, R: Real> Trainer<'g, R> {
    pub fn new(game: &'g BayesianGame<R>, pomdp: PomdpConfig<R>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let policy = LeaderPolicy::new(game, config.architecture, derive_seed(config.seed, 10, 0));
        let input = config.mode.critic_input();
        let inputs = match input {
            CriticInput::Centralized => StackelbergPomdp::new(game, &pomdp, 0)?.hidden_feature_len(),
            CriticInput::ObservationOnly => game.observation_layout().feature_len(),
        };
        let value_scale = R::from_usize_lossy(pomdp.schedule.reward_subepisodes);
        let critic =
            CriticNet::new(input, inputs, config.critic_hidden, value_scale, derive_seed(config.seed, 11, 0));
        let mut eval_pomdp = pomdp.clone();
        if let Some(r) = config.eval_reward_subepisodes {
            eval_pomdp.schedule = eval_pomdp.schedule.with_reward_subepisodes(r);
        }
        Ok(Self {
            game,
            eval_pomdp,
            policy_optimizer: Adam::new(policy.n_params()),
            critic_rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 12, 0)),
            pomdp,
            config,
            policy,
            critic,
            steps: 0,
            episodes: 0,
            evaluations: 0,
            value_loss: None,
        })
    }

    pub fn game(&self) -> &'g BayesianGame<R> {
        self.game
    }

    pub fn reward_scale(&self) -> R {
        R::one() / self.game.leader_normalizer()
    }

    /// Samples `count` long episodes with the current policy, starting at episode `first`.
    pub fn collect(&self, first: u64, count: usize) -> Result<Vec<EpisodeTrace<R>>> {
        let record = self.config.mode == TrainingMode::CentralizedCritic;
        (0..count as u64)
            .into_par_iter()
            .map(|k| {
                let e = first + k;
                let mut actor = CachedActor::new(
                    &self.policy,
                    self.game,
                    ActMode::Sample,
                    derive_seed(self.config.seed, ACTOR_STREAM, e),
                );
                let seed = derive_seed(self.config.seed, EPISODE_STREAM, e);
                run_episode(self.game, &mut actor, &self.pomdp, seed, record).map(|(t, _)| t)
            })
            .collect()
    }

    /// Critic regression followed by the clipped-surrogate policy step.
    pub fn update(&mut self, batch: &[EpisodeTrace<R>]) -> Result<super::UpdateStats<R>> {
        let layout = self.game.observation_layout();
        let scale = self.reward_scale();
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        let mut samples = Vec::new();
        for trace in batch {
            for (step, g) in trace.steps.iter().zip(trace.reward_to_go()) {
                let x = self.critic.input.features(step, layout);
                let target = g * scale;
                if self.config.attribution == ScoreAttribution::EveryStep || step.sampled {
                    samples.push(PolicySample {
                        observation: step.observation.clone(),
                        action: step.action.clone(),
                        old_log_prob: step.log_prob,
                        advantage: target - self.critic.value(&x),
                    });
                }
                inputs.push(x);
                targets.push(target);
            }
        }
        let loss = self.critic.fit(
            &inputs,
            &targets,
            R::lit(self.config.critic_learning_rate),
            self.config.critic_epochs,
            self.config.critic_minibatch,
            R::lit(self.config.max_grad_norm),
            &mut self.critic_rng,
        )?;
        self.value_loss = Some(loss);
        let proximal = ProximalConfig {
            learning_rate: R::lit(self.config.learning_rate),
            clip_ratio: R::lit(self.config.clip_ratio),
            epochs: self.config.policy_epochs,
            entropy_coef: R::lit(self.config.entropy_coef),
            max_grad_norm: R::lit(self.config.max_grad_norm),
            normalize_advantage: self.config.normalize_advantage,
        };
        proximal_update(self.game, &mut self.policy, &mut self.policy_optimizer, &samples, &proximal)
    }

    /// Greedy evaluation at the current step.
    pub fn evaluate_now(&self) -> Result<EvalRow> {
        let seed = derive_seed(self.config.seed, EVAL_STREAM, self.evaluations);
        let reward = evaluate(&self.policy, self.game, &self.eval_pomdp, seed)?;
        Ok(EvalRow {
            step: self.steps,
            eval_reward: reward.f64(),
            value_loss: self.value_loss.map_or(f64::NAN, |v| v.f64()),
            mode: self.config.mode,
            seed: self.config.seed,
            greedy: greedy_summary(&self.policy, self.game),
        })
    }

    fn evaluations_due(&self) -> u64 {
        (self.steps.min(self.config.total_steps) / self.config.eval_interval).saturating_sub(self.evaluations)
    }

    pub fn finished(&self) -> bool {
        self.evaluations >= self.config.total_steps / self.config.eval_interval
            && self.steps >= self.config.total_steps
    }

    /// Trains to `total_steps`, evaluating every `eval_interval` steps. Evaluations due
    /// inside a batch are run against the policy that generated the batch.
    pub fn train<F: FnMut(&EvalRow)>(&mut self, mut on_eval: F) -> Result<Vec<EvalRow>> {
        let mut rows = Vec::new();
        while !self.finished() {
            let batch = self.collect(self.episodes, self.config.batch_episodes)?;
            for trace in &batch {
                self.steps += trace.len() as u64;
                self.episodes += 1;
                if self.value_loss.is_none() {
                    // Untrained critic error on the first episode.
                    self.value_loss = Some(self.initial_value_loss(trace));
                }
                for _ in 0..self.evaluations_due() {
                    let mut row = self.evaluate_now()?;
                    self.evaluations += 1;
                    row.step = self.evaluations * self.config.eval_interval;
                    on_eval(&row);
                    rows.push(row);
                }
                if self.finished() {
                    return Ok(rows);
                }
            }
            self.update(&batch)?;
        }
        Ok(rows)
    }

    fn initial_value_loss(&self, trace: &EpisodeTrace<R>) -> R {
        let layout = self.game.observation_layout();
        let scale = self.reward_scale();
        let inputs: Vec<_> = trace.steps.iter().map(|s| self.critic.input.features(s, layout)).collect();
        let targets: Vec<_> = trace.reward_to_go().into_iter().map(|g| g * scale).collect();
        self.critic.loss(&inputs, &targets)
    }
}
