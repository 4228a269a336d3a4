use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::net::{clip_norm, Adam};
use super::{CriticNet, LeaderPolicy};
use crate::error::{Error, Result};
use crate::game::{Action, BayesianGame, Observation};
use crate::pomdp::EpisodeTrace;
use crate::scalar::Real;

/// Which trace steps carry a score-function term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreAttribution {
    /// Every step, including actions replayed from the observation-action cache.
    EveryStep,
    /// Only steps where the action was freshly drawn; the exact gradient of the cached
    /// episode objective.
    FirstVisit,
}

impl ScoreAttribution {
    fn includes(self, sampled: bool) -> bool {
        match self {
            ScoreAttribution::EveryStep => true,
            ScoreAttribution::FirstVisit => sampled,
        }
    }
}

/// Score-function gradient with reward-to-go, averaged over the traces. With a critic the
/// reward-to-go is replaced by the advantage `G_t - V(s_t)`.
pub fn policy_gradient_estimate<R: Real>(
    game: &BayesianGame<R>,
    policy: &LeaderPolicy<R>,
    traces: &[EpisodeTrace<R>],
    critic: Option<&CriticNet<R>>,
    attribution: ScoreAttribution,
    reward_scale: R,
) -> Result<Vec<R>> {
    let mut grad = vec![R::zero(); policy.n_params()];
    let layout = game.observation_layout();
    for trace in traces {
        let rtg = trace.reward_to_go();
        for (step, g) in trace.steps.iter().zip(rtg) {
            if !attribution.includes(step.sampled) {
                continue;
            }
            let mut weight = g * reward_scale;
            if let Some(c) = critic {
                weight -= c.value(&c.input.features(step, layout));
            }
            if weight != R::zero() {
                policy.accumulate_gradient(game, &step.observation, &step.action, weight, R::zero(), &mut grad);
            }
        }
    }
    let n = R::from_usize_lossy(traces.len().max(1));
    for g in grad.iter_mut() {
        *g /= n;
    }
    if let Some(k) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("policy gradient coordinate {k} is {}", grad[k])));
    }
    Ok(grad)
}

/// One (observation, action) with the behaviour log-probability and advantage.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySample<R> {
    pub observation: Observation,
    pub action: Action,
    pub old_log_prob: R,
    pub advantage: R,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProximalConfig<R> {
    pub learning_rate: R,
    pub clip_ratio: R,
    pub epochs: usize,
    pub entropy_coef: R,
    pub max_grad_norm: R,
    pub normalize_advantage: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats<R> {
    pub clip_fraction: R,
    pub entropy: R,
    pub mean_abs_advantage: R,
}

struct Group<R> {
    observation: Observation,
    action: Action,
    old_log_prob: R,
    positive: R,
    negative: R,
    count: usize,
}

/// Clipped-surrogate ascent: for `epochs` full-batch Adam steps, maximizes the mean of
/// `min(r A, clip(r, 1-c, 1+c) A) + entropy_coef * H` over the samples.
pub fn proximal_update<R: Real>(
    game: &BayesianGame<R>,
    policy: &mut LeaderPolicy<R>,
    optimizer: &mut Adam<R>,
    samples: &[PolicySample<R>],
    config: &ProximalConfig<R>,
) -> Result<UpdateStats<R>> {
    if samples.is_empty() {
        return Ok(UpdateStats::default());
    }
    let n = R::from_usize_lossy(samples.len());
    let (mean, std) = if config.normalize_advantage {
        let mean = samples.iter().map(|s| s.advantage).sum::<R>() / n;
        let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<R>() / n;
        (mean, var.sqrt() + R::lit(1e-8))
    } else {
        (R::zero(), R::one())
    };
    // Replayed actions repeat the same (observation, action) many times; the surrogate
    // gradient only depends on the per-sign advantage sums of each pair.
    let mut groups: BTreeMap<(Observation, Action), Group<R>> = BTreeMap::new();
    let mut abs_adv = R::zero();
    for s in samples {
        let a = (s.advantage - mean) / std;
        abs_adv += a.abs();
        let g = groups.entry((s.observation.clone(), s.action.clone())).or_insert_with(|| Group {
            observation: s.observation.clone(),
            action: s.action.clone(),
            old_log_prob: s.old_log_prob,
            positive: R::zero(),
            negative: R::zero(),
            count: 0,
        });
        if a > R::zero() {
            g.positive += a;
        } else {
            g.negative += a;
        }
        g.count += 1;
    }
    let upper = R::one() + config.clip_ratio;
    let lower = R::one() - config.clip_ratio;
    let mut grad = vec![R::zero(); policy.n_params()];
    let mut stats = UpdateStats { mean_abs_advantage: abs_adv / n, ..Default::default() };
    for epoch in 0..config.epochs.max(1) {
        grad.fill(R::zero());
        let mut clipped = 0usize;
        let mut entropy = R::zero();
        for g in groups.values() {
            let logp = policy.log_prob(game, &g.observation, &g.action);
            let ratio = (logp - g.old_log_prob).exp();
            let mut coef = R::zero();
            if ratio <= upper {
                coef += g.positive;
            } else {
                clipped += 1;
            }
            if ratio >= lower {
                coef += g.negative;
            } else {
                clipped += 1;
            }
            let count = R::from_usize_lossy(g.count);
            let (_, h) = policy.accumulate_gradient(
                game,
                &g.observation,
                &g.action,
                ratio * coef / n,
                config.entropy_coef * count / n,
                &mut grad,
            );
            entropy += h * count / n;
        }
        if let Some(k) = grad.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("surrogate gradient coordinate {k}")));
        }
        for x in grad.iter_mut() {
            *x = -*x;
        }
        clip_norm(&mut grad, config.max_grad_norm);
        optimizer.step(&mut policy.params, &grad, config.learning_rate);
        if epoch == 0 {
            stats.entropy = entropy;
        }
        stats.clip_fraction = R::from_usize_lossy(clipped) / R::from_usize_lossy(groups.len());
    }
    if policy.params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("policy parameters".into()));
    }
    Ok(stats)
}
