use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EpisodeSchedule, EpisodeTrace, Phase, TraceStep};
use crate::error::{Error, Result};
use crate::game::{Action, BayesianGame, LeaderStrategy, Observation, SubEpisode};
use crate::no_regret::FollowerLearner;
use crate::scalar::Real;

/// How a long episode is set up.
#[derive(Clone, Debug)]
pub struct PomdpConfig<R> {
    pub schedule: EpisodeSchedule,
    pub mw_epsilon: R,
    /// Learner every episode starts from; a fresh all-ones learner when `None`.
    pub initial_learner: Option<FollowerLearner<R>>,
}

impl<R: Real> PomdpConfig<R> {
    pub fn new(schedule: EpisodeSchedule, mw_epsilon: R) -> Self {
        Self { schedule, mw_epsilon, initial_learner: None }
    }

    pub fn fresh_learner(&self, game: &BayesianGame<R>) -> Result<FollowerLearner<R>> {
        match &self.initial_learner {
            Some(l) => Ok(l.clone()),
            None => FollowerLearner::new(game, self.mw_epsilon),
        }
    }
}

/// Full hidden state of the POMDP.
#[derive(Clone, Debug)]
pub struct PomdpState<R> {
    pub phase: Phase,
    pub learner: FollowerLearner<R>,
    pub types: Vec<usize>,
    /// Follower actions sampled for the current round or reward sub-episode.
    pub messages: Vec<usize>,
    /// Current sub-episode, holding the partial allocation and residual.
    pub sub: SubEpisode<R>,
    pub target: usize,
    pub probe: usize,
    /// Raw counterfactual payoffs gathered this round, per follower and action.
    pub utilities: Vec<Vec<R>>,
    pub round: usize,
    pub reward_index: usize,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome<R> {
    pub observation: Observation,
    pub reward: R,
    pub subepisode_done: bool,
    pub done: bool,
}

/// Decision made by the leader at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorChoice<R> {
    pub action: Action,
    /// `false` when the action was replayed from the observation-action cache.
    pub sampled: bool,
    pub log_prob: R,
}

pub trait Actor<R> {
    fn act(&mut self, obs: &Observation) -> Result<ActorChoice<R>>;
}

/// Adapts a deterministic strategy into an actor.
pub struct StrategyActor<S>(pub S);

impl<R: Real, S: LeaderStrategy> Actor<R> for StrategyActor<S> {
    fn act(&mut self, obs: &Observation) -> Result<ActorChoice<R>> {
        Ok(ActorChoice { action: self.0.act(obs), sampled: true, log_prob: R::zero() })
    }
}

pub struct StackelbergPomdp<'g, R> {
    game: &'g BayesianGame<R>,
    schedule: EpisodeSchedule,
    state: PomdpState<R>,
    rng: ChaCha8Rng,
    max_actions: usize,
}

impl<'g, R: Real> StackelbergPomdp<'g, R> {
    pub fn new(game: &'g BayesianGame<R>, config: &PomdpConfig<R>, seed: u64) -> Result<Self> {
        let learner = config.fresh_learner(game)?;
        let n = game.n_followers();
        let state = PomdpState {
            phase: Phase::Equilibrium,
            learner,
            types: vec![0; n],
            messages: vec![0; n],
            sub: game.start(&vec![0; n], &vec![0; n]),
            target: 0,
            probe: 0,
            utilities: game.action_counts().iter().map(|&k| vec![R::zero(); k]).collect(),
            round: 0,
            reward_index: 0,
            done: false,
        };
        let max_actions = game.action_counts().iter().copied().max().unwrap_or(0);
        let mut env = Self {
            game,
            schedule: config.schedule,
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_actions,
        };
        env.begin_round();
        Ok(env)
    }

    pub fn game(&self) -> &'g BayesianGame<R> {
        self.game
    }

    pub fn schedule(&self) -> EpisodeSchedule {
        self.schedule
    }

    pub fn state(&self) -> &PomdpState<R> {
        &self.state
    }

    pub fn observe(&self) -> Observation {
        self.game.observe(&self.state.sub)
    }

    fn begin_round(&mut self) {
        let s = &mut self.state;
        s.types = self.game.type_distribution().sample(&mut self.rng).to_vec();
        s.messages = s.learner.sample_actions(&s.types, &mut self.rng);
        for u in &mut s.utilities {
            u.fill(R::zero());
        }
        s.target = 0;
        s.probe = 0;
        self.start_probe();
    }

    fn start_probe(&mut self) {
        let s = &mut self.state;
        let mut actions = s.messages.clone();
        actions[s.target] = s.probe;
        s.sub = self.game.start(&s.types, &actions);
    }

    fn begin_reward(&mut self) {
        let s = &mut self.state;
        s.types = self.game.type_distribution().sample(&mut self.rng).to_vec();
        s.messages = s.learner.sample_actions(&s.types, &mut self.rng);
        s.sub = self.game.start(&s.types, &s.messages);
    }

    /// Applies one leader action and advances the sub-episode machine.
    pub fn step(&mut self, action: &[usize]) -> Result<StepOutcome<R>> {
        if self.state.done {
            return Err(Error::InvalidAction("episode already finished".into()));
        }
        let finished = self.game.apply(&mut self.state.sub, action)?;
        let mut reward = R::zero();
        if finished {
            let payoffs = self.state.sub.payoffs.clone().expect("finished sub-episode");
            match self.state.phase {
                Phase::Equilibrium => {
                    let s = &mut self.state;
                    s.utilities[s.target][s.probe] = payoffs[1 + s.target];
                    s.probe += 1;
                    if s.probe == self.game.action_counts()[s.target] {
                        s.target += 1;
                        s.probe = 0;
                    }
                    if s.target == self.game.n_followers() {
                        s.learner.update_weights(&s.types, &s.utilities)?;
                        s.round += 1;
                        if s.round == self.schedule.equilibrium_subepisodes {
                            s.phase = Phase::Reward;
                            s.reward_index = 0;
                            s.target = 0;
                            self.begin_reward();
                        } else {
                            self.begin_round();
                        }
                    } else {
                        self.start_probe();
                    }
                }
                Phase::Reward => {
                    reward = payoffs[0];
                    self.state.reward_index += 1;
                    if self.state.reward_index == self.schedule.reward_subepisodes {
                        self.state.done = true;
                    } else {
                        self.begin_reward();
                    }
                }
            }
        }
        Ok(StepOutcome {
            observation: self.observe(),
            reward,
            subepisode_done: finished,
            done: self.state.done,
        })
    }

    pub fn hidden_feature_len(&self) -> usize {
        let n = self.game.n_followers();
        let types: usize = self.game.type_counts().iter().sum();
        let actions: usize = self.game.action_counts().iter().sum();
        2 + 3
            + self.state.learner.probability_len()
            + types
            + actions
            + n
            + 2 * self.max_actions
            + self.game.observation_layout().feature_len()
    }

    /// Encoding of the full hidden state for a centralized critic.
    pub fn write_hidden_features(&self, out: &mut Vec<R>) {
        let s = &self.state;
        let game = self.game;
        let one = R::one();
        let zero = R::zero();
        let eq = s.phase == Phase::Equilibrium;
        out.push(if eq { one } else { zero });
        out.push(if eq { zero } else { one });
        let t = R::from_usize_lossy(self.schedule.equilibrium_subepisodes);
        let r = R::from_usize_lossy(self.schedule.reward_subepisodes);
        if eq {
            out.extend([R::from_usize_lossy(s.round) / t, zero, one]);
        } else {
            let j = R::from_usize_lossy(s.reward_index);
            out.extend([one, j / r, (r - j) / r]);
        }
        s.learner.write_probabilities(out);
        for (i, &ty) in s.types.iter().enumerate() {
            one_hot(out, ty, game.type_counts()[i]);
        }
        for (i, &m) in s.messages.iter().enumerate() {
            one_hot(out, m, game.action_counts()[i]);
        }
        let n = game.n_followers();
        if eq {
            one_hot(out, s.target, n);
            one_hot(out, s.probe, self.max_actions);
            for a in 0..self.max_actions {
                let u = s.utilities[s.target].get(a).copied().unwrap_or(zero);
                let filled = a < s.probe;
                out.push(if filled { s.learner.scale(s.target, u).unwrap_or(zero) } else { zero });
            }
        } else {
            out.extend(std::iter::repeat_n(zero, n + 2 * self.max_actions));
        }
        game.observation_layout().write_features(&self.observe(), out);
    }
}

fn one_hot<R: Real>(out: &mut Vec<R>, k: usize, n: usize) {
    for j in 0..n {
        out.push(if j == k { R::one() } else { R::zero() });
    }
}

fn drive<R: Real, A: Actor<R> + ?Sized>(
    env: &mut StackelbergPomdp<'_, R>,
    actor: &mut A,
    trace: &mut EpisodeTrace<R>,
    record_hidden: bool,
    until: impl Fn(&PomdpState<R>) -> bool,
) -> Result<()> {
    while !until(env.state()) {
        let obs = env.observe();
        let mut hidden = Vec::new();
        if record_hidden {
            hidden.reserve(env.hidden_feature_len());
            env.write_hidden_features(&mut hidden);
        }
        let phase = env.state().phase;
        let subepisode = match phase {
            Phase::Equilibrium => env.state().round,
            Phase::Reward => env.state().reward_index,
        };
        let choice = actor.act(&obs)?;
        let outcome = env.step(&choice.action)?;
        trace.steps.push(TraceStep {
            phase,
            subepisode,
            observation: obs,
            action: choice.action,
            reward: outcome.reward,
            sampled: choice.sampled,
            log_prob: choice.log_prob,
            hidden,
        });
    }
    Ok(())
}

/// Runs the remaining equilibrium sub-episodes, appending every policy query to `trace`.
pub fn run_equilibrium_phase<R: Real, A: Actor<R> + ?Sized>(
    env: &mut StackelbergPomdp<'_, R>,
    actor: &mut A,
    trace: &mut EpisodeTrace<R>,
    record_hidden: bool,
) -> Result<()> {
    drive(env, actor, trace, record_hidden, |s| s.phase != Phase::Equilibrium || s.done)
}

/// Runs the reward sub-episodes against the frozen follower strategies.
pub fn run_reward_phase<R: Real, A: Actor<R> + ?Sized>(
    env: &mut StackelbergPomdp<'_, R>,
    actor: &mut A,
    trace: &mut EpisodeTrace<R>,
    record_hidden: bool,
) -> Result<()> {
    if env.state().phase != Phase::Reward {
        return Err(Error::Config("reward phase starts only after equilibration".into()));
    }
    drive(env, actor, trace, record_hidden, |s| s.done)
}

/// One full long episode from a fresh learner.
pub fn run_episode<R: Real, A: Actor<R> + ?Sized>(
    game: &BayesianGame<R>,
    actor: &mut A,
    config: &PomdpConfig<R>,
    seed: u64,
    record_hidden: bool,
) -> Result<(EpisodeTrace<R>, FollowerLearner<R>)> {
    let mut env = StackelbergPomdp::new(game, config, seed)?;
    let mut trace = EpisodeTrace { id: seed, steps: Vec::new() };
    run_equilibrium_phase(&mut env, actor, &mut trace, record_hidden)?;
    run_reward_phase(&mut env, actor, &mut trace, record_hidden)?;
    Ok((trace, env.state.learner))
}
