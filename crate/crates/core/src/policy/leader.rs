use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::Mlp;
use crate::game::{Action, ActionLayout, BayesianGame, Observation, ObservationLayout};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Architecture {
    /// One logit per (observation class, action level).
    Tabular,
    /// Feed-forward scorer on the one-hot observation.
    Mlp { hidden: usize },
}

/// Leader policy over multi-component actions. Each component is a masked softmax, sampled
/// in order so later masks may depend on earlier choices.
#[derive(Clone, Debug, PartialEq)]
pub struct LeaderPolicy<R> {
    pub arch: Architecture,
    obs_layout: ObservationLayout,
    action_layout: ActionLayout,
    offsets: Vec<usize>,
    mlp: Option<Mlp>,
    pub params: Vec<R>,
}

struct Forward<R> {
    logits: Vec<R>,
    input: Vec<R>,
    hidden: Vec<R>,
}

fn masked_softmax<R: Real>(logits: &[R], mask: &[bool], out: &mut Vec<R>) {
    out.clear();
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(z, _)| *z)
        .fold(R::neg_infinity(), R::max);
    let mut total = R::zero();
    for (z, &m) in logits.iter().zip(mask) {
        let e = if m { (*z - max).exp() } else { R::zero() };
        total += e;
        out.push(e);
    }
    for p in out.iter_mut() {
        *p /= total;
    }
}

impl<R: Real> LeaderPolicy<R> {
    pub fn new(game: &BayesianGame<R>, arch: Architecture, seed: u64) -> Self {
        let obs_layout = game.observation_layout().clone();
        let action_layout = game.action_layout().clone();
        let offsets = action_layout.offsets();
        let (mlp, params) = match arch {
            Architecture::Tabular => {
                // Tiny symmetric noise so untrained greedy play does not default to index 0.
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7ab1_e5);
                let n = obs_layout.classes() * action_layout.total();
                (None, (0..n).map(|_| R::lit(rng.gen_range(-0.01..0.01))).collect())
            }
            Architecture::Mlp { hidden } => {
                let mlp = Mlp { inputs: obs_layout.feature_len(), hidden, outputs: action_layout.total() };
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_1eade5);
                let params = mlp.init(&mut rng, 0.01);
                (Some(mlp), params)
            }
        };
        Self { arch, obs_layout, action_layout, offsets, mlp, params }
    }

    /// Tabular policy with all logits zero.
    pub fn tabular(game: &BayesianGame<R>) -> Self {
        let mut p = Self::new(game, Architecture::Tabular, 0);
        p.params.fill(R::zero());
        p
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn action_layout(&self) -> &ActionLayout {
        &self.action_layout
    }

    /// Parameter index of logit `level` of `component` at `obs` (tabular only).
    pub fn tabular_index(&self, obs: &Observation, component: usize, level: usize) -> Option<usize> {
        match self.arch {
            Architecture::Tabular => Some(
                self.obs_layout.index(obs) * self.action_layout.total() + self.offsets[component] + level,
            ),
            Architecture::Mlp { .. } => None,
        }
    }

    fn forward(&self, obs: &Observation) -> Forward<R> {
        match &self.mlp {
            None => {
                let total = self.action_layout.total();
                let base = self.obs_layout.index(obs) * total;
                Forward { logits: self.params[base..base + total].to_vec(), input: Vec::new(), hidden: Vec::new() }
            }
            Some(mlp) => {
                let mut input = Vec::with_capacity(mlp.inputs);
                self.obs_layout.write_features(obs, &mut input);
                let mut hidden = Vec::new();
                let mut logits = Vec::new();
                mlp.forward(&self.params, &input, &mut hidden, &mut logits);
                Forward { logits, input, hidden }
            }
        }
    }

    pub fn logits(&self, obs: &Observation) -> Vec<R> {
        self.forward(obs).logits
    }

    /// Walks the components of `action` (or samples / takes argmax when `choose` is set),
    /// returning per-component probabilities.
    fn walk<F: FnMut(usize, &[R]) -> usize>(
        &self,
        game: &BayesianGame<R>,
        obs: &Observation,
        logits: &[R],
        mut pick: F,
    ) -> (Action, Vec<Vec<R>>) {
        let sizes = &self.action_layout.sizes;
        let mut action = Vec::with_capacity(sizes.len());
        let mut dists = Vec::with_capacity(sizes.len());
        let mut mask = Vec::new();
        for (j, &size) in sizes.iter().enumerate() {
            mask.clear();
            mask.resize(size, true);
            game.mask(obs, j, &action, &mut mask);
            let mut probs = Vec::with_capacity(size);
            let off = self.offsets[j];
            masked_softmax(&logits[off..off + size], &mask, &mut probs);
            let a = pick(j, &probs);
            action.push(a);
            dists.push(probs);
        }
        (action, dists)
    }

    /// Per-component probabilities along `action`.
    pub fn component_probabilities(
        &self,
        game: &BayesianGame<R>,
        obs: &Observation,
        action: &[usize],
    ) -> Vec<Vec<R>> {
        let logits = self.logits(obs);
        self.walk(game, obs, &logits, |j, _| action[j]).1
    }

    pub fn sample<G: Rng + ?Sized>(
        &self,
        game: &BayesianGame<R>,
        obs: &Observation,
        rng: &mut G,
    ) -> (Action, R) {
        let logits = self.logits(obs);
        let (action, dists) = self.walk(game, obs, &logits, |_, probs| {
            let mut u = rng.gen::<f64>();
            let mut last = 0;
            for (k, p) in probs.iter().enumerate() {
                if *p > R::zero() {
                    last = k;
                    u -= p.f64();
                    if u < 0.0 {
                        return k;
                    }
                }
            }
            last
        });
        let lp = action.iter().zip(&dists).map(|(&a, d)| d[a].ln()).sum();
        (action, lp)
    }

    /// Highest-probability level per component (lowest index on ties).
    pub fn greedy(&self, game: &BayesianGame<R>, obs: &Observation) -> (Action, R) {
        let logits = self.logits(obs);
        let (action, dists) = self.walk(game, obs, &logits, |_, probs| {
            let mut best = 0;
            for (k, p) in probs.iter().enumerate() {
                if *p > probs[best] {
                    best = k;
                }
            }
            best
        });
        let lp = action.iter().zip(&dists).map(|(&a, d)| d[a].ln()).sum();
        (action, lp)
    }

    pub fn log_prob(&self, game: &BayesianGame<R>, obs: &Observation, action: &[usize]) -> R {
        self.component_probabilities(game, obs, action)
            .iter()
            .zip(action)
            .map(|(d, &a)| d[a].ln())
            .sum()
    }

    pub fn probability(&self, game: &BayesianGame<R>, obs: &Observation, action: &[usize]) -> R {
        self.log_prob(game, obs, action).exp()
    }

    /// Adds `coef_logp * grad log pi(action|obs) + coef_entropy * grad H` into `grad`, where
    /// `H` is the summed entropy of the component distributions along `action`.
    /// Returns `(log pi, H)`.
    pub fn accumulate_gradient(
        &self,
        game: &BayesianGame<R>,
        obs: &Observation,
        action: &[usize],
        coef_logp: R,
        coef_entropy: R,
        grad: &mut [R],
    ) -> (R, R) {
        let fwd = self.forward(obs);
        let (_, dists) = self.walk(game, obs, &fwd.logits, |j, _| action[j]);
        let mut dlogits = vec![R::zero(); fwd.logits.len()];
        let mut logp = R::zero();
        let mut entropy = R::zero();
        for (j, probs) in dists.iter().enumerate() {
            let off = self.offsets[j];
            let h: R = probs.iter().filter(|p| **p > R::zero()).map(|&p| -p * p.ln()).sum();
            logp += probs[action[j]].ln();
            entropy += h;
            for (b, &p) in probs.iter().enumerate() {
                if p <= R::zero() {
                    continue;
                }
                let ind = if b == action[j] { R::one() } else { R::zero() };
                dlogits[off + b] = coef_logp * (ind - p) - coef_entropy * p * (p.ln() + h);
            }
        }
        match &self.mlp {
            None => {
                let base = self.obs_layout.index(obs) * self.action_layout.total();
                for (g, d) in grad[base..base + dlogits.len()].iter_mut().zip(&dlogits) {
                    *g += *d;
                }
            }
            Some(mlp) => mlp.backward(&self.params, &fwd.input, &fwd.hidden, &dlogits, grad),
        }
        (logp, entropy)
    }
}
