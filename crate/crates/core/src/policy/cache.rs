use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LeaderPolicy;
use crate::error::Result;
use crate::game::{Action, BayesianGame, Observation};
use crate::pomdp::{Actor, ActorChoice};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActMode {
    Sample,
    Greedy,
}

/// Per-episode memo: the first action chosen at an observation is replayed on every later
/// visit of that observation.
#[derive(Clone, Debug, Default)]
pub struct ObservationActionCache<R> {
    map: HashMap<Observation, (Action, R)>,
}

impl<R: Real> ObservationActionCache<R> {
    pub fn new() -> Self {
        Self { map: HashMap::new() }
    }

    pub fn get(&self, obs: &Observation) -> Option<&Action> {
        self.map.get(obs).map(|(a, _)| a)
    }

    pub fn clear(&mut self) {
        self.map.clear();
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Cache hit: the stored action. Miss: a fresh sample (or argmax), which is then stored.
pub fn act<R: Real, G: Rng + ?Sized>(
    policy: &LeaderPolicy<R>,
    game: &BayesianGame<R>,
    cache: &mut ObservationActionCache<R>,
    obs: &Observation,
    mode: ActMode,
    rng: &mut G,
) -> ActorChoice<R> {
    if let Some((action, log_prob)) = cache.map.get(obs) {
        return ActorChoice { action: action.clone(), sampled: false, log_prob: *log_prob };
    }
    let (action, log_prob) = match mode {
        ActMode::Sample => policy.sample(game, obs, rng),
        ActMode::Greedy => policy.greedy(game, obs),
    };
    cache.map.insert(obs.clone(), (action.clone(), log_prob));
    ActorChoice { action, sampled: true, log_prob }
}

/// A policy acting through a fresh cache for one episode.
pub struct CachedActor<'a, R> {
    pub policy: &'a LeaderPolicy<R>,
    pub game: &'a BayesianGame<R>,
    pub cache: ObservationActionCache<R>,
    pub mode: ActMode,
    rng: ChaCha8Rng,
}

impl<'a, R: Real> CachedActor<'a, R> {
    pub fn new(policy: &'a LeaderPolicy<R>, game: &'a BayesianGame<R>, mode: ActMode, seed: u64) -> Self {
        Self { policy, game, cache: ObservationActionCache::new(), mode, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl<R: Real> Actor<R> for CachedActor<'_, R> {
    fn act(&mut self, obs: &Observation) -> Result<ActorChoice<R>> {
        Ok(act(self.policy, self.game, &mut self.cache, obs, self.mode, &mut self.rng))
    }
}
