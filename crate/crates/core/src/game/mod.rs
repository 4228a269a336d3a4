//! Bayesian Stackelberg games and the four concrete settings.
//!
//! Every setting is executed as a small sub-episode machine: the leader observes an
//! [`Observation`], picks an [`Action`], and the machine ends with a payoff vector whose
//! component 0 belongs to the leader and component `1 + i` to follower `i`.

mod allocation;
mod distribution;
mod matrix_design;
mod normal_form;
pub mod presets;
mod spm;

pub use allocation::SimpleAllocation;
pub use distribution::TypeDistribution;
pub use matrix_design::{MatrixDesign, RewardRule};
pub use normal_form::NormalForm;
pub use spm::{reward_from_welfare, Demand, SpmSetting};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// What the leader sees. Slot `j` takes values in `0..radices[j]` of the game's layout.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Observation(pub Vec<u16>);

impl Observation {
    pub fn encode(&self) -> String {
        if self.0.is_empty() {
            return "-".into();
        }
        join(self.0.iter())
    }
}

/// A leader action: one level per action component.
pub type Action = Vec<usize>;

/// A deterministic leader strategy: observation to action.
pub trait LeaderStrategy {
    fn act(&mut self, obs: &Observation) -> Action;
}

impl<F: FnMut(&Observation) -> Action> LeaderStrategy for F {
    fn act(&mut self, obs: &Observation) -> Action {
        self(obs)
    }
}

/// Plays the same action on every observation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedAction(pub Action);

impl LeaderStrategy for FixedAction {
    fn act(&mut self, _obs: &Observation) -> Action {
        self.0.clone()
    }
}

pub(crate) fn join<T: std::fmt::Display>(items: impl Iterator<Item = T>) -> String {
    items.map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Mixed-radix description of the observation space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationLayout {
    pub radices: Vec<usize>,
}

impl ObservationLayout {
    /// Number of observation classes.
    pub fn classes(&self) -> usize {
        self.radices.iter().product()
    }

    pub fn index(&self, obs: &Observation) -> usize {
        obs.0
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&v, &r)| acc * r + v as usize)
    }

    pub fn decode(&self, mut index: usize) -> Observation {
        let mut slots = vec![0u16; self.radices.len()];
        for (slot, &r) in slots.iter_mut().zip(&self.radices).rev() {
            *slot = (index % r) as u16;
            index /= r;
        }
        Observation(slots)
    }

    /// Length of the one-hot encoding (plus one constant feature).
    pub fn feature_len(&self) -> usize {
        1 + self.radices.iter().sum::<usize>()
    }

    pub fn write_features<R: Real>(&self, obs: &Observation, out: &mut Vec<R>) {
        out.push(R::one());
        for (&v, &r) in obs.0.iter().zip(&self.radices) {
            for k in 0..r {
                out.push(if k == v as usize { R::one() } else { R::zero() });
            }
        }
    }
}

/// Sizes of the leader's action components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionLayout {
    pub sizes: Vec<usize>,
}

impl ActionLayout {
    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.sizes
            .iter()
            .map(|s| {
                let o = acc;
                acc += s;
                o
            })
            .collect()
    }
}

/// Leader action space of a one-shot matrix game.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeaderActionSpace {
    Discrete(usize),
    /// One weight level in `0..=levels` per base action, normalized by the game.
    WeightVector { actions: usize, levels: usize },
}

/// Concrete setting behind a [`BayesianGame`].
#[derive(Clone, Debug)]
pub enum Setting<R> {
    NormalForm(NormalForm<R>),
    MatrixDesign(MatrixDesign<R>),
    Allocation(SimpleAllocation),
    MuSpm(SpmSetting<R>),
}

/// Mutable state of one leader sub-episode.
#[derive(Clone, Debug, PartialEq)]
pub struct SubEpisode<R> {
    pub types: Vec<usize>,
    pub actions: Vec<usize>,
    pub steps: usize,
    /// Agents already visited (mechanism settings only).
    pub visited: Vec<bool>,
    /// Owner of each item, `None` while it is still in the residual.
    pub owner: Vec<Option<usize>>,
    pub paid: Vec<R>,
    pub payoffs: Option<Vec<R>>,
}

impl<R: Real> SubEpisode<R> {
    pub fn done(&self) -> bool {
        self.payoffs.is_some()
    }
}

/// A Bayesian Stackelberg game: follower types and actions, a (possibly correlated) type
/// distribution, and a payoff function parameterized by the leader's behaviour.
#[derive(Clone, Debug)]
pub struct BayesianGame<R> {
    pub name: String,
    pub setting: Setting<R>,
    action_counts: Vec<usize>,
    distribution: TypeDistribution<R>,
    follower_ranges: Vec<(R, R)>,
    leader_normalizer: R,
    observation_layout: ObservationLayout,
    action_layout: ActionLayout,
    step_cap: usize,
}

impl<R: Real> BayesianGame<R> {
    pub fn normal_form(matrix: Vec<Vec<(R, R)>>, randomized: bool) -> Result<Self> {
        NormalForm::new(matrix, randomized.then_some(NormalForm::<R>::DEFAULT_LEVELS))?.into_game()
    }

    pub fn matrix_design(
        base: [[(R, R); 2]; 2],
        payments: Vec<R>,
        rule: RewardRule,
    ) -> Result<Self> {
        MatrixDesign::new(base, payments, rule)?.into_game()
    }

    pub fn simple_allocation(items: usize, messages: usize) -> Result<Self> {
        SimpleAllocation::new(items, messages)?.into_game()
    }

    pub fn mu_spm(setting: SpmSetting<R>) -> Result<Self> {
        setting.into_game()
    }

    pub(crate) fn assemble(
        name: &str,
        setting: Setting<R>,
        action_counts: Vec<usize>,
        distribution: TypeDistribution<R>,
        follower_ranges: Vec<(R, R)>,
        leader_normalizer: R,
        observation_layout: ObservationLayout,
        action_layout: ActionLayout,
        step_cap: usize,
    ) -> Self {
        let follower_ranges = follower_ranges
            .into_iter()
            .map(|(lo, hi)| if hi > lo { (lo, hi) } else { (lo, lo + R::one()) })
            .collect();
        Self {
            name: name.to_string(),
            setting,
            action_counts,
            distribution,
            follower_ranges,
            leader_normalizer,
            observation_layout,
            action_layout,
            step_cap,
        }
    }

    pub fn n_followers(&self) -> usize {
        self.action_counts.len()
    }

    pub fn type_counts(&self) -> &[usize] {
        self.distribution.type_counts()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn type_distribution(&self) -> &TypeDistribution<R> {
        &self.distribution
    }

    /// Declared `(min, max)` payoff of each follower, used to scale MW updates.
    pub fn follower_ranges(&self) -> &[(R, R)] {
        &self.follower_ranges
    }

    /// Largest achievable leader payoff; logged rewards are divided by it.
    pub fn leader_normalizer(&self) -> R {
        self.leader_normalizer
    }

    pub fn observation_layout(&self) -> &ObservationLayout {
        &self.observation_layout
    }

    pub fn action_layout(&self) -> &ActionLayout {
        &self.action_layout
    }

    pub fn step_cap(&self) -> usize {
        self.step_cap
    }

    /// Number of leader decisions in one sub-episode is at most this; one for matrix games.
    pub fn is_one_shot(&self) -> bool {
        !matches!(self.setting, Setting::MuSpm(_))
    }

    pub fn start(&self, types: &[usize], actions: &[usize]) -> SubEpisode<R> {
        let (agents, items) = match &self.setting {
            Setting::MuSpm(s) => (s.n_agents(), s.n_items()),
            _ => (0, 0),
        };
        SubEpisode {
            types: types.to_vec(),
            actions: actions.to_vec(),
            steps: 0,
            visited: vec![false; agents],
            owner: vec![None; items],
            paid: vec![R::zero(); agents],
            payoffs: None,
        }
    }

    pub fn observe(&self, sub: &SubEpisode<R>) -> Observation {
        match &self.setting {
            Setting::NormalForm(_) | Setting::MatrixDesign(_) => Observation(Vec::new()),
            Setting::Allocation(_) => Observation(vec![sub.actions[0] as u16]),
            Setting::MuSpm(s) => s.observe(sub),
        }
    }

    /// Writes into `out` which levels of `component` are valid given the observation and
    /// the levels already chosen for earlier components.
    pub fn mask(&self, obs: &Observation, component: usize, prefix: &[usize], out: &mut [bool]) {
        out.fill(true);
        match &self.setting {
            Setting::NormalForm(nf) => nf.mask(component, prefix, out),
            Setting::MuSpm(s) => s.mask(obs, component, out),
            _ => {}
        }
    }

    /// Checks every component of `action` against the masks.
    pub fn validate(&self, obs: &Observation, action: &[usize]) -> Result<()> {
        let sizes = &self.action_layout.sizes;
        if action.len() != sizes.len() {
            return Err(Error::InvalidAction(format!(
                "expected {} components, got {}",
                sizes.len(),
                action.len()
            )));
        }
        let mut mask = Vec::new();
        for (j, (&a, &size)) in action.iter().zip(sizes).enumerate() {
            mask.resize(size, true);
            self.mask(obs, j, &action[..j], &mut mask);
            if a >= size || !mask[a] {
                return Err(Error::InvalidAction(format!("component {j} level {a} not allowed")));
            }
        }
        Ok(())
    }

    /// Applies one leader action. Returns `true` when the sub-episode has ended.
    pub fn apply(&self, sub: &mut SubEpisode<R>, action: &[usize]) -> Result<bool> {
        if sub.done() {
            return Err(Error::InvalidAction("sub-episode already finished".into()));
        }
        sub.steps += 1;
        if sub.steps > self.step_cap {
            return Err(Error::StepCap { cap: self.step_cap });
        }
        let payoffs = match &self.setting {
            Setting::NormalForm(nf) => Some(nf.payoffs(action, sub.actions[0])?),
            Setting::MatrixDesign(md) => Some(md.payoffs(action, &sub.actions)?),
            Setting::Allocation(al) => Some(al.payoffs(action, sub.types[0])?),
            Setting::MuSpm(s) => {
                let obs = s.observe(sub);
                self.validate(&obs, action)?;
                s.apply(sub, action)?
            }
        };
        sub.payoffs = payoffs;
        Ok(sub.done())
    }

    /// Runs a whole sub-episode under `strategy`, returning the payoff vector.
    pub fn play<S: LeaderStrategy + ?Sized>(
        &self,
        strategy: &mut S,
        types: &[usize],
        actions: &[usize],
    ) -> Result<Vec<R>> {
        let mut sub = self.start(types, actions);
        loop {
            let obs = self.observe(&sub);
            let action = strategy.act(&obs);
            if self.apply(&mut sub, &action)? {
                return Ok(sub.payoffs.expect("finished sub-episode has payoffs"));
            }
        }
    }

    /// All valid actions for an observation, in lexicographic order.
    pub fn valid_actions(&self, obs: &Observation) -> Vec<Action> {
        let sizes = &self.action_layout.sizes;
        let mut out = Vec::new();
        let mut prefix = Vec::with_capacity(sizes.len());
        self.extend_valid(obs, &mut prefix, &mut out);
        out
    }

    fn extend_valid(&self, obs: &Observation, prefix: &mut Action, out: &mut Vec<Action>) {
        let j = prefix.len();
        if j == self.action_layout.sizes.len() {
            out.push(prefix.clone());
            return;
        }
        let mut mask = vec![true; self.action_layout.sizes[j]];
        self.mask(obs, j, prefix, &mut mask);
        for (level, ok) in mask.into_iter().enumerate() {
            if ok {
                prefix.push(level);
                self.extend_valid(obs, prefix, out);
                prefix.pop();
            }
        }
    }

    /// Human-readable description of a leader action.
    pub fn describe_action(&self, action: &[usize]) -> String {
        match &self.setting {
            Setting::NormalForm(nf) => nf.describe(action),
            Setting::MatrixDesign(md) => format!("tau={}", md.payment(action[0])),
            Setting::Allocation(_) => format!("item {}", action[0] + 1),
            Setting::MuSpm(s) => s.describe(action),
        }
    }
}
