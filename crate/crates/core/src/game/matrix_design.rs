use super::{ActionLayout, BayesianGame, ObservationLayout, Setting, TypeDistribution};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// When the designer is rewarded, as a predicate on the followers' joint action.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RewardRule {
    ActionsDiffer,
    ActionsEqual,
    Profile(Vec<usize>),
}

impl RewardRule {
    pub fn holds(&self, actions: &[usize]) -> bool {
        match self {
            RewardRule::ActionsDiffer => actions.windows(2).any(|w| w[0] != w[1]),
            RewardRule::ActionsEqual => actions.windows(2).all(|w| w[0] == w[1]),
            RewardRule::Profile(p) => p.as_slice() == actions,
        }
    }
}

/// Two followers play a 2x2 game; the leader adds a payment `tau` to the row player's
/// (A, A) payoff and to the column player's (B, B) payoff.
#[derive(Clone, Debug)]
pub struct MatrixDesign<R> {
    base: [[(R, R); 2]; 2],
    payments: Vec<R>,
    rule: RewardRule,
}

impl<R: Real> MatrixDesign<R> {
    pub fn new(base: [[(R, R); 2]; 2], payments: Vec<R>, rule: RewardRule) -> Result<Self> {
        if payments.is_empty() {
            return Err(Error::InvalidGame("empty payment set".into()));
        }
        if payments.iter().any(|p| *p < R::zero() || !p.is_finite()) {
            return Err(Error::InvalidGame("payments must be finite and nonnegative".into()));
        }
        if base.iter().flatten().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidGame("non-finite payoff".into()));
        }
        Ok(Self { base, payments, rule })
    }

    /// The base matrix of the payment-design experiment: (3,3) (6,4) / (4,6) (2,2).
    pub fn standard_base() -> [[(R, R); 2]; 2] {
        let c = |a: f64, b: f64| (R::lit(a), R::lit(b));
        [[c(3.0, 3.0), c(6.0, 4.0)], [c(4.0, 6.0), c(2.0, 2.0)]]
    }

    pub fn payments(&self) -> &[R] {
        &self.payments
    }

    pub fn payment(&self, index: usize) -> R {
        self.payments[index]
    }

    /// Follower payoffs `(row, column)` under payment `tau`.
    pub fn follower_payoffs(&self, tau: R, row: usize, col: usize) -> (R, R) {
        let (mut a, mut b) = self.base[row][col];
        if row == 0 && col == 0 {
            a += tau;
        }
        if row == 1 && col == 1 {
            b += tau;
        }
        (a, b)
    }

    pub(super) fn payoffs(&self, action: &[usize], actions: &[usize]) -> Result<Vec<R>> {
        let &idx = action.first().ok_or_else(|| Error::InvalidAction("empty".into()))?;
        let tau = *self
            .payments
            .get(idx)
            .ok_or_else(|| Error::InvalidAction(format!("payment index {idx} out of range")))?;
        let (a, b) = self.follower_payoffs(tau, actions[0], actions[1]);
        let leader = if self.rule.holds(actions) { R::one() } else { R::zero() };
        Ok(vec![leader, a, b])
    }

    pub fn into_game(self) -> Result<BayesianGame<R>> {
        let tmax = self.payments.iter().copied().fold(R::zero(), R::max);
        let tmin = self.payments.iter().copied().fold(R::infinity(), R::min);
        let mut ranges = [(R::infinity(), R::neg_infinity()); 2];
        for row in 0..2 {
            for col in 0..2 {
                for tau in [tmin, tmax] {
                    let (a, b) = self.follower_payoffs(tau, row, col);
                    ranges[0] = (ranges[0].0.min(a), ranges[0].1.max(a));
                    ranges[1] = (ranges[1].0.min(b), ranges[1].1.max(b));
                }
            }
        }
        let n = self.payments.len();
        Ok(BayesianGame::assemble(
            "matrix_design",
            Setting::MatrixDesign(self),
            vec![2, 2],
            TypeDistribution::trivial(2),
            ranges.to_vec(),
            R::one(),
            ObservationLayout { radices: Vec::new() },
            ActionLayout { sizes: vec![n] },
            1,
        ))
    }
}
