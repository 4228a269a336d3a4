use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;

use super::FollowerLearner;
use crate::error::{Error, Result};
use crate::game::{BayesianGame, LeaderStrategy};
use crate::scalar::Real;

/// One round of play.
#[derive(Clone, Debug, PartialEq)]
pub struct PlayRecord<R> {
    pub types: Vec<usize>,
    pub actions: Vec<usize>,
    pub payoffs: Vec<R>,
}

/// Cumulative payoffs of one (follower, type) pair, in scaled units.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeTally<R> {
    pub visits: usize,
    pub realized: R,
    pub counterfactual: Vec<R>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlayHistory<R> {
    pub records: Vec<PlayRecord<R>>,
    tallies: Vec<Vec<TypeTally<R>>>,
}

impl<R: Real> PlayHistory<R> {
    pub fn new(type_counts: &[usize], action_counts: &[usize]) -> Self {
        let tallies = type_counts
            .iter()
            .zip(action_counts)
            .map(|(&nt, &na)| {
                vec![
                    TypeTally { visits: 0, realized: R::zero(), counterfactual: vec![R::zero(); na] };
                    nt
                ]
            })
            .collect();
        Self { records: Vec::new(), tallies }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends a round. `counterfactual[i][a]` and `realized[i]` are scaled payoffs.
    pub fn record(&mut self, record: PlayRecord<R>, realized: &[R], counterfactual: &[Vec<R>]) {
        for (i, &t) in record.types.iter().enumerate() {
            let tally = &mut self.tallies[i][t];
            tally.visits += 1;
            tally.realized += realized[i];
            for (c, &p) in tally.counterfactual.iter_mut().zip(&counterfactual[i]) {
                *c += p;
            }
        }
        self.records.push(record);
    }

    pub fn tally(&self, follower: usize, ty: usize) -> &TypeTally<R> {
        &self.tallies[follower][ty]
    }

    /// Row per round: `round  types  actions  payoffs`, tab separated, `;` inside fields.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "round\ttypes\tactions\tpayoffs")?;
        for (k, r) in self.records.iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                k,
                crate::game::join(r.types.iter()),
                crate::game::join(r.actions.iter()),
                crate::game::join(r.payoffs.iter().map(|p| format!("{:.9}", p.f64())))
            )?;
        }
        Ok(())
    }
}

/// Scaled counterfactual payoffs for every follower: others held at `actions`.
pub fn counterfactual_payoffs<R: Real, S: LeaderStrategy + ?Sized>(
    game: &BayesianGame<R>,
    leader: &mut S,
    types: &[usize],
    actions: &[usize],
) -> Result<Vec<Vec<R>>> {
    let mut probe = actions.to_vec();
    let mut out = Vec::with_capacity(actions.len());
    for i in 0..actions.len() {
        let mut row = Vec::with_capacity(game.action_counts()[i]);
        for k in 0..game.action_counts()[i] {
            probe[i] = k;
            row.push(game.play(leader, types, &probe)?[1 + i]);
        }
        probe[i] = actions[i];
        out.push(row);
    }
    Ok(out)
}

/// Iterative no-regret dynamics: types, actions, counterfactual payoffs, MW update.
pub fn run_dynamics<R: Real, S: LeaderStrategy + ?Sized, G: Rng + ?Sized>(
    game: &BayesianGame<R>,
    leader: &mut S,
    rounds: usize,
    learner: &mut FollowerLearner<R>,
    rng: &mut G,
) -> Result<PlayHistory<R>> {
    if rounds == 0 {
        return Err(Error::Config("dynamics need at least one round".into()));
    }
    let mut history = PlayHistory::new(game.type_counts(), game.action_counts());
    for _ in 0..rounds {
        let types = game.type_distribution().sample(rng).to_vec();
        let actions = learner.sample_actions(&types, rng);
        let payoffs = game.play(leader, &types, &actions)?;
        let raw = counterfactual_payoffs(game, leader, &types, &actions)?;
        let scaled: Vec<Vec<R>> = raw
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|&p| learner.scale(i, p)).collect())
            .collect::<Result<_>>()?;
        let realized: Vec<R> = (0..actions.len()).map(|i| scaled[i][actions[i]]).collect();
        learner.update_weights(&types, &raw)?;
        history.record(PlayRecord { types, actions, payoffs }, &realized, &scaled);
    }
    Ok(history)
}

/// A joint strategy: a distribution over action profiles for each type profile.
pub trait JointStrategy<R> {
    /// `None` when the strategy is undefined at `types`.
    fn profile_distribution(&self, types: &[usize]) -> Option<Vec<(Vec<usize>, R)>>;
}

/// Empirical distribution of play, conditioned on the type profile.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmpiricalStrategy {
    counts: BTreeMap<Vec<usize>, BTreeMap<Vec<usize>, usize>>,
}

impl EmpiricalStrategy {
    /// Builds the table from `(type profile, action profile)` observations.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Vec<usize>, Vec<usize>)>) -> Self {
        let mut counts: BTreeMap<Vec<usize>, BTreeMap<Vec<usize>, usize>> = BTreeMap::new();
        for (t, a) in pairs {
            *counts.entry(t).or_default().entry(a).or_default() += 1;
        }
        Self { counts }
    }

    pub fn frequency(&self, types: &[usize], actions: &[usize]) -> f64 {
        self.counts.get(types).map_or(0.0, |m| {
            let total: usize = m.values().sum();
            m.get(actions).map_or(0.0, |&c| c as f64 / total as f64)
        })
    }

    pub fn observed_types(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.counts.keys()
    }
}

impl<R: Real> JointStrategy<R> for EmpiricalStrategy {
    fn profile_distribution(&self, types: &[usize]) -> Option<Vec<(Vec<usize>, R)>> {
        let m = self.counts.get(types)?;
        let total = R::from_usize_lossy(m.values().sum());
        Some(m.iter().map(|(a, &c)| (a.clone(), R::from_usize_lossy(c) / total)).collect())
    }
}

/// Product of the learner's current mixed strategies.
impl<R: Real> JointStrategy<R> for FollowerLearner<R> {
    fn profile_distribution(&self, types: &[usize]) -> Option<Vec<(Vec<usize>, R)>> {
        let mut out = vec![(Vec::new(), R::one())];
        for (i, &t) in types.iter().enumerate() {
            let probs = self.probabilities(i, t);
            let mut next = Vec::with_capacity(out.len() * probs.len());
            for (profile, p) in &out {
                for (a, &q) in probs.iter().enumerate() {
                    let mut ext = profile.clone();
                    ext.push(a);
                    next.push((ext, *p * q));
                }
            }
            out = next;
        }
        Some(out)
    }
}

/// The same action profile for every type profile.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointMass(pub Vec<usize>);

impl<R: Real> JointStrategy<R> for PointMass {
    fn profile_distribution(&self, _types: &[usize]) -> Option<Vec<(Vec<usize>, R)>> {
        Some(vec![(self.0.clone(), R::one())])
    }
}

/// Follower actions as a function of the type profile.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PureStrategy(pub Vec<Vec<usize>>);

impl<R: Real> JointStrategy<R> for PureStrategy {
    fn profile_distribution(&self, types: &[usize]) -> Option<Vec<(Vec<usize>, R)>> {
        let actions = types.iter().enumerate().map(|(i, &t)| self.0[i][t]).collect();
        Some(vec![(actions, R::one())])
    }
}

pub fn empirical_strategy<R: Real>(history: &PlayHistory<R>) -> EmpiricalStrategy {
    EmpiricalStrategy::from_pairs(history.records.iter().map(|r| (r.types.clone(), r.actions.clone())))
}

/// Best fixed action in hindsight minus realized payoff, averaged over the rounds in which
/// `ty` was sampled. `None` if it never was.
pub fn external_regret<R: Real>(history: &PlayHistory<R>, follower: usize, ty: usize) -> Option<R> {
    let tally = history.tally(follower, ty);
    if tally.visits == 0 {
        return None;
    }
    let best = tally.counterfactual.iter().copied().fold(R::neg_infinity(), R::max);
    Some((best - tally.realized) / R::from_usize_lossy(tally.visits))
}

/// Deviation witnessing the largest B-CCE violation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Deviation {
    pub follower: usize,
    pub ty: usize,
    pub action: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BcceReport<R> {
    pub holds: bool,
    pub worst_violation: R,
    pub witness: Option<Deviation>,
}

/// Checks the epsilon-approximate Bayesian CCE conditions in scaled payoff units.
pub fn verify_epsilon_bcce<R: Real, S: LeaderStrategy + ?Sized, J: JointStrategy<R> + ?Sized>(
    game: &BayesianGame<R>,
    leader: &mut S,
    sigma: &J,
    epsilon: R,
) -> Result<BcceReport<R>> {
    let dist = game.type_distribution();
    let n = game.n_followers();
    let ranges = game.follower_ranges();
    let scaled = |i: usize, p: R| (p - ranges[i].0) / (ranges[i].1 - ranges[i].0);
    let mut sigmas = Vec::with_capacity(dist.len());
    for (types, p) in dist.iter() {
        if p <= R::zero() {
            sigmas.push(Vec::new());
            continue;
        }
        let s = sigma.profile_distribution(types).ok_or_else(|| {
            Error::Undefined(format!("joint strategy undefined at type profile {types:?}"))
        })?;
        sigmas.push(s);
    }
    let mut cache: BTreeMap<(usize, Vec<usize>), Vec<R>> = BTreeMap::new();
    let mut payoff = |k: usize, actions: &[usize], leader: &mut S| -> Result<Vec<R>> {
        if let Some(v) = cache.get(&(k, actions.to_vec())) {
            return Ok(v.clone());
        }
        let v = game.play(leader, dist.profile(k), actions)?;
        cache.insert((k, actions.to_vec()), v.clone());
        Ok(v)
    };
    let mut worst = R::neg_infinity();
    let mut witness = None;
    for i in 0..n {
        for t in 0..game.type_counts()[i] {
            let cond = dist.conditional(i, t);
            if cond.is_empty() {
                continue;
            }
            let mut eq = R::zero();
            let mut dev = vec![R::zero(); game.action_counts()[i]];
            for &(k, w) in &cond {
                for (actions, q) in &sigmas[k] {
                    let mass = w * *q;
                    eq += mass * scaled(i, payoff(k, actions, leader)?[1 + i]);
                    let mut alt = actions.clone();
                    for (a, d) in dev.iter_mut().enumerate() {
                        alt[i] = a;
                        *d += mass * scaled(i, payoff(k, &alt, leader)?[1 + i]);
                    }
                }
            }
            for (a, &d) in dev.iter().enumerate() {
                let gain = d - eq;
                if gain > worst {
                    worst = gain;
                    witness = Some(Deviation { follower: i, ty: t, action: a });
                }
            }
        }
    }
    Ok(BcceReport { holds: worst <= epsilon, worst_violation: worst, witness })
}
