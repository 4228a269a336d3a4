use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::stackelberg::enumerate_maps;
use crate::error::{Error, Result};
use crate::game::BayesianGame;
use crate::no_regret::FollowerLearner;
use crate::policy::{
    derive_seed, policy_gradient_estimate, ActMode, CachedActor, CriticInput, CriticNet, LeaderPolicy,
    ScoreAttribution,
};
use crate::pomdp::{run_episode, PomdpConfig, StackelbergPomdp};
use crate::scalar::Real;

/// Default cap on distinct learner states tracked per round.
pub const DEFAULT_BRANCH_CAP: usize = 100_000;

/// Payoff vectors of one leader map for every (type profile, action profile).
struct PayoffTable<R> {
    action_counts: Vec<usize>,
    payoffs: Vec<Vec<Vec<R>>>,
}

impl<R: Real> PayoffTable<R> {
    fn index(&self, actions: &[usize]) -> usize {
        actions.iter().zip(&self.action_counts).fold(0, |acc, (&a, &n)| acc * n + a)
    }

    fn get(&self, profile: usize, actions: &[usize]) -> &[R] {
        &self.payoffs[profile][self.index(actions)]
    }
}

fn action_profiles(counts: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in counts {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |a| {
                    let mut p = p.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    out
}

fn state_key<R: Real>(learner: &FollowerLearner<R>, type_counts: &[usize]) -> Vec<u64> {
    let mut key = Vec::new();
    for (i, &nt) in type_counts.iter().enumerate() {
        for t in 0..nt {
            for p in learner.probabilities(i, t) {
                key.push(((p.f64() * 1e12).round()) as u64);
            }
        }
    }
    key
}

/// Exact expected episode return of a tabular policy in a one-shot game.
///
/// Within an episode the cached policy acts as one observation-to-action map drawn with
/// probability `prod_o pi(map(o) | o)`, so the return is the map-weighted expectation over
/// every type and action draw of the multiplicative-weights dynamics. Learner states with
/// equal strategies (to 1e-12) are merged. Returns raw leader payoff units summed over the
/// reward sub-episodes.
pub fn exact_objective<R: Real>(
    game: &BayesianGame<R>,
    config: &PomdpConfig<R>,
    policy: &LeaderPolicy<R>,
    branch_cap: usize,
) -> Result<R> {
    let maps = enumerate_maps(game, branch_cap)?;
    let dist = game.type_distribution();
    let profiles = action_profiles(game.action_counts());
    let layout = game.observation_layout();
    let mut total = R::zero();
    for mut map in maps {
        let weight: R = (0..layout.classes())
            .map(|k| policy.probability(game, &layout.decode(k), &map.actions[k]))
            .fold(R::one(), |a, b| a * b);
        if weight <= R::zero() {
            continue;
        }
        let mut payoffs = Vec::with_capacity(dist.len());
        for (types, _) in dist.iter() {
            let row = profiles.iter().map(|a| game.play(&mut map, types, a)).collect::<Result<Vec<_>>>()?;
            payoffs.push(row);
        }
        let table = PayoffTable { action_counts: game.action_counts().to_vec(), payoffs };
        total += weight * map_value(game, config, &table, &profiles, branch_cap)?;
    }
    Ok(total)
}

fn action_probability<R: Real>(learner: &FollowerLearner<R>, types: &[usize], actions: &[usize]) -> R {
    actions.iter().enumerate().map(|(i, &a)| learner.probability(i, types[i], a)).fold(R::one(), |p, q| p * q)
}

fn map_value<R: Real>(
    game: &BayesianGame<R>,
    config: &PomdpConfig<R>,
    table: &PayoffTable<R>,
    profiles: &[Vec<usize>],
    branch_cap: usize,
) -> Result<R> {
    let dist = game.type_distribution();
    let n = game.n_followers();
    let mut states = vec![(config.fresh_learner(game)?, R::one())];
    for _ in 0..config.schedule.equilibrium_subepisodes {
        let mut next: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut merged: Vec<(FollowerLearner<R>, R)> = Vec::new();
        for (learner, p_state) in &states {
            for (t_idx, (types, p_t)) in dist.iter().enumerate() {
                for actions in profiles {
                    let p = *p_state * p_t * action_probability(learner, types, actions);
                    if p <= R::zero() {
                        continue;
                    }
                    let mut probe = actions.clone();
                    let counterfactual: Vec<Vec<R>> = (0..n)
                        .map(|i| {
                            (0..game.action_counts()[i])
                                .map(|k| {
                                    probe[i] = k;
                                    let u = table.get(t_idx, &probe)[1 + i];
                                    probe[i] = actions[i];
                                    u
                                })
                                .collect()
                        })
                        .collect();
                    let mut updated = learner.clone();
                    updated.update_weights(types, &counterfactual)?;
                    let key = state_key(&updated, game.type_counts());
                    match next.get(&key) {
                        Some(&j) => merged[j].1 += p,
                        None => {
                            if merged.len() == branch_cap {
                                return Err(Error::SizeCap { cap: branch_cap, what: "learner states".into() });
                            }
                            next.insert(key, merged.len());
                            merged.push((updated, p));
                        }
                    }
                }
            }
        }
        states = merged;
    }
    let mut value = R::zero();
    for (learner, p_state) in &states {
        for (t_idx, (types, p_t)) in dist.iter().enumerate() {
            for actions in profiles {
                value += *p_state * p_t * action_probability(learner, types, actions) * table.get(t_idx, actions)[0];
            }
        }
    }
    Ok(value * R::from_usize_lossy(config.schedule.reward_subepisodes))
}

/// One coordinate of a gradient check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCoordinate<R> {
    pub monte_carlo: R,
    pub finite_difference: R,
    /// Standard error of the Monte-Carlo mean.
    pub standard_error: R,
}

impl<R: Real> GradientCoordinate<R> {
    pub fn relative_error(&self) -> R {
        (self.monte_carlo - self.finite_difference).abs() / self.finite_difference.abs().max(R::lit(1e-12))
    }
}

/// Sizes for [`gradient_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCheckConfig {
    pub traces: usize,
    /// Independent traces the centralized-critic baseline is fit on first.
    pub baseline_traces: usize,
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for GradientCheckConfig {
    fn default() -> Self {
        Self { traces: 10_000, baseline_traces: 2_000, fd_step: 1e-3, seed: 0 }
    }
}

/// Compares the first-visit score-function estimate, with a centralized critic as
/// baseline, against central finite differences of [`exact_objective`].
pub fn gradient_check<R: Real>(
    game: &BayesianGame<R>,
    config: &PomdpConfig<R>,
    policy: &LeaderPolicy<R>,
    check: GradientCheckConfig,
) -> Result<Vec<GradientCoordinate<R>>> {
    let episode = |k: usize, stream: u64| {
        let mut actor = CachedActor::new(policy, game, ActMode::Sample, derive_seed(check.seed, stream, k as u64));
        run_episode(game, &mut actor, config, derive_seed(check.seed, stream + 1, k as u64), true).map(|(t, _)| t)
    };
    let inputs = StackelbergPomdp::new(game, config, 0)?.hidden_feature_len();
    let scale = R::from_usize_lossy(config.schedule.reward_subepisodes);
    let mut critic = CriticNet::new(CriticInput::Centralized, inputs, 32, scale, check.seed);
    let fit: Vec<_> = (0..check.baseline_traces).into_par_iter().map(|k| episode(k, 100)).collect::<Result<_>>()?;
    let (xs, ys): (Vec<Vec<R>>, Vec<R>) = fit
        .iter()
        .flat_map(|t| t.steps.iter().zip(t.reward_to_go()).map(|(s, g)| (s.hidden.clone(), g)))
        .unzip();
    let mut rng = ChaCha8Rng::seed_from_u64(check.seed);
    for _ in 0..20 {
        critic.fit(&xs, &ys, R::lit(3e-3), 1, 256, R::lit(10.0), &mut rng)?;
    }
    drop(fit);
    let per_trace: Vec<Vec<R>> = (0..check.traces)
        .into_par_iter()
        .map(|k| {
            let trace = episode(k, 200)?;
            policy_gradient_estimate(game, policy, &[trace], Some(&critic), ScoreAttribution::FirstVisit, R::one())
        })
        .collect::<Result<_>>()?;
    let n = R::from_usize_lossy(per_trace.len().max(2));
    let h = R::lit(check.fd_step);
    let mut out = Vec::with_capacity(policy.n_params());
    for k in 0..policy.n_params() {
        let mean = per_trace.iter().map(|g| g[k]).sum::<R>() / n;
        let var = per_trace.iter().map(|g| (g[k] - mean) * (g[k] - mean)).sum::<R>() / (n - R::one());
        let mut shifted = policy.clone();
        shifted.params[k] += h;
        let up = exact_objective(game, config, &shifted, DEFAULT_BRANCH_CAP)?;
        shifted.params[k] -= h + h;
        let down = exact_objective(game, config, &shifted, DEFAULT_BRANCH_CAP)?;
        out.push(GradientCoordinate {
            monte_carlo: mean,
            finite_difference: (up - down) / (h + h),
            standard_error: (var / n).sqrt(),
        });
    }
    Ok(out)
}
