use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{clip_norm, Adam, Mlp};
use crate::error::{Error, Result};
use crate::game::ObservationLayout;
use crate::pomdp::TraceStep;
use crate::scalar::Real;

/// What the critic is allowed to see.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticInput {
    /// Full hidden state: follower strategies, types, phase, probe bookkeeping.
    Centralized,
    /// Only the leader's observation.
    ObservationOnly,
}

impl CriticInput {
    /// Input vector for one trace step.
    pub fn features<R: Real>(self, step: &TraceStep<R>, layout: &ObservationLayout) -> Vec<R> {
        match self {
            CriticInput::Centralized => step.hidden.clone(),
            CriticInput::ObservationOnly => {
                let mut out = Vec::with_capacity(layout.feature_len());
                layout.write_features(&step.observation, &mut out);
                out
            }
        }
    }
}

/// State-value network `V(s)`, trained by regression on reward-to-go.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticNet<R> {
    pub input: CriticInput,
    pub mlp: Mlp,
    pub params: Vec<R>,
    pub optimizer: Adam<R>,
    /// Targets are divided by this before regression.
    pub value_scale: R,
}

impl<R: Real> CriticNet<R> {
    pub fn new(input: CriticInput, inputs: usize, hidden: usize, value_scale: R, seed: u64) -> Self {
        let mlp = Mlp { inputs, hidden, outputs: 1 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc217_1c);
        let params = mlp.init(&mut rng, 1.0);
        let optimizer = Adam::new(params.len());
        Self { input, mlp, params, optimizer, value_scale }
    }

    pub fn value(&self, x: &[R]) -> R {
        let mut h = Vec::with_capacity(self.mlp.hidden);
        let mut out = Vec::with_capacity(1);
        self.mlp.forward(&self.params, x, &mut h, &mut out);
        out[0] * self.value_scale
    }

    /// Mean squared error against `targets`, in target units.
    pub fn loss(&self, inputs: &[Vec<R>], targets: &[R]) -> R {
        let n = R::from_usize_lossy(inputs.len().max(1));
        inputs
            .iter()
            .zip(targets)
            .map(|(x, &y)| {
                let e = self.value(x) - y;
                e * e
            })
            .sum::<R>()
            / n
    }

    /// Minibatch Adam regression toward `targets`. Returns the mean squared error seen
    /// during the passes, in target units.
    pub fn fit<G: Rng + ?Sized>(
        &mut self,
        inputs: &[Vec<R>],
        targets: &[R],
        learning_rate: R,
        epochs: usize,
        minibatch: usize,
        max_grad_norm: R,
        rng: &mut G,
    ) -> Result<R> {
        let n = inputs.len();
        if n == 0 {
            return Ok(R::zero());
        }
        let mut order: Vec<usize> = (0..n).collect();
        let mut grad = vec![R::zero(); self.params.len()];
        let mut hidden = Vec::with_capacity(self.mlp.hidden);
        let mut out = Vec::with_capacity(1);
        let mut total = R::zero();
        let mut count = 0usize;
        for _ in 0..epochs.max(1) {
            order.shuffle(rng);
            for chunk in order.chunks(minibatch.max(1)) {
                grad.fill(R::zero());
                let m = R::from_usize_lossy(chunk.len());
                for &k in chunk {
                    self.mlp.forward(&self.params, &inputs[k], &mut hidden, &mut out);
                    let target = targets[k] / self.value_scale;
                    let e = out[0] - target;
                    total += e * e * self.value_scale * self.value_scale;
                    count += 1;
                    let d = [R::lit(2.0) * e / m];
                    self.mlp.backward(&self.params, &inputs[k], &hidden, &d, &mut grad);
                }
                clip_norm(&mut grad, max_grad_norm);
                self.optimizer.step(&mut self.params, &grad, learning_rate);
            }
        }
        let loss = total / R::from_usize_lossy(count);
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("critic loss {loss}")));
        }
        Ok(loss)
    }
}
