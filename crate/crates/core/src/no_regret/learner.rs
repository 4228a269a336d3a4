use rand::Rng;

use crate::error::{Error, Result};
use crate::game::BayesianGame;
use crate::scalar::Real;

const RENORMALIZE_ABOVE: f64 = 1e30;

/// Multiplicative-weights tables, one row per (follower, type).
#[derive(Clone, Debug, PartialEq)]
pub struct FollowerLearner<R> {
    weights: Vec<Vec<Vec<R>>>,
    epsilon: R,
    /// Per follower `(min, range)` mapping raw payoffs into `[0, 1]`.
    scales: Vec<(R, R)>,
}

impl<R: Real> FollowerLearner<R> {
    /// Fresh learner with every weight equal to 1, scaled by the game's payoff ranges.
    pub fn new(game: &BayesianGame<R>, epsilon: R) -> Result<Self> {
        Self::with_ranges(game.type_counts(), game.action_counts(), game.follower_ranges(), epsilon)
    }

    pub fn with_ranges(
        type_counts: &[usize],
        action_counts: &[usize],
        ranges: &[(R, R)],
        epsilon: R,
    ) -> Result<Self> {
        if !(epsilon > R::zero()) || !epsilon.is_finite() {
            return Err(Error::Config(format!("MW epsilon must be positive, got {epsilon}")));
        }
        if type_counts.len() != action_counts.len() || ranges.len() != action_counts.len() {
            return Err(Error::Config("learner dimensions disagree".into()));
        }
        let mut scales = Vec::with_capacity(ranges.len());
        for &(lo, hi) in ranges {
            let range = hi - lo;
            if !(range > R::zero()) || !range.is_finite() {
                return Err(Error::Config(format!("payoff range [{lo}, {hi}] is not positive")));
            }
            scales.push((lo, range));
        }
        let weights = type_counts
            .iter()
            .zip(action_counts)
            .map(|(&nt, &na)| vec![vec![R::one(); na]; nt])
            .collect();
        Ok(Self { weights, epsilon, scales })
    }

    pub fn epsilon(&self) -> R {
        self.epsilon
    }

    pub fn n_followers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self, follower: usize, ty: usize) -> &[R] {
        &self.weights[follower][ty]
    }

    /// Overwrites one row, e.g. to carry a learner over or to start from a biased strategy.
    pub fn set_weights(&mut self, follower: usize, ty: usize, row: Vec<R>) -> Result<()> {
        if row.len() != self.weights[follower][ty].len() {
            return Err(Error::Config("weight row has the wrong length".into()));
        }
        if row.iter().any(|w| !(*w > R::zero()) || !w.is_finite()) {
            return Err(Error::Config("weights must be finite and positive".into()));
        }
        self.weights[follower][ty] = row;
        Ok(())
    }

    pub fn probabilities(&self, follower: usize, ty: usize) -> Vec<R> {
        let row = &self.weights[follower][ty];
        let total: R = row.iter().copied().sum();
        row.iter().map(|&w| w / total).collect()
    }

    pub fn probability(&self, follower: usize, ty: usize, action: usize) -> R {
        let row = &self.weights[follower][ty];
        row[action] / row.iter().copied().sum()
    }

    /// Draws each follower's action from its weight row for its type.
    pub fn sample_actions<G: Rng + ?Sized>(&self, types: &[usize], rng: &mut G) -> Vec<usize> {
        types
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let row = &self.weights[i][t];
                let total: f64 = row.iter().map(|w| w.f64()).sum();
                let mut u = rng.gen::<f64>() * total;
                for (a, w) in row.iter().enumerate() {
                    u -= w.f64();
                    if u < 0.0 {
                        return a;
                    }
                }
                row.len() - 1
            })
            .collect()
    }

    /// Maps a raw payoff of `follower` into `[0, 1]`.
    pub fn scale(&self, follower: usize, raw: R) -> Result<R> {
        let (lo, range) = self.scales[follower];
        let s = (raw - lo) / range;
        let tol = R::lit(1e-9);
        if !s.is_finite() || s < -tol || s > R::one() + tol {
            return Err(Error::Config(format!(
                "payoff {raw} of follower {follower} scales to {s}, outside [0, 1]; payoff scale too small"
            )));
        }
        Ok(s.max(R::zero()).min(R::one()))
    }

    /// Multiplies every weight in each sampled type's row by `(1 + eps)^scaled_payoff`.
    /// `counterfactual[i][a]` is follower `i`'s raw payoff for `a` with the others fixed.
    pub fn update_weights(&mut self, types: &[usize], counterfactual: &[Vec<R>]) -> Result<()> {
        let base = R::one() + self.epsilon;
        let mut scaled = Vec::new();
        for (i, &t) in types.iter().enumerate() {
            scaled.clear();
            for &p in &counterfactual[i] {
                scaled.push(self.scale(i, p)?);
            }
            let row = &mut self.weights[i][t];
            if scaled.len() != row.len() {
                return Err(Error::Config("counterfactual vector has the wrong length".into()));
            }
            for (w, s) in row.iter_mut().zip(&scaled) {
                *w *= base.powf(*s);
            }
            if row.iter().any(|w| w.f64() > RENORMALIZE_ABOVE) {
                let total: R = row.iter().copied().sum();
                let factor = R::from_usize_lossy(row.len()) / total;
                for w in row.iter_mut() {
                    *w = (*w * factor).max(R::min_positive_value());
                }
            }
            debug_assert!(row.iter().all(|w| *w > R::zero() && w.is_finite()));
        }
        Ok(())
    }

    /// Appends every row's probabilities, follower-major.
    pub fn write_probabilities(&self, out: &mut Vec<R>) {
        for (i, rows) in self.weights.iter().enumerate() {
            for t in 0..rows.len() {
                out.extend(self.probabilities(i, t));
            }
        }
    }

    pub fn probability_len(&self) -> usize {
        self.weights.iter().flatten().map(Vec::len).sum()
    }
}
