use super::{ActionLayout, BayesianGame, ObservationLayout, Setting, TypeDistribution};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One follower wants one of `items` items and sends one of `messages` messages; the
/// leader allocates an item per received message.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimpleAllocation {
    pub items: usize,
    pub messages: usize,
}

impl SimpleAllocation {
    pub fn new(items: usize, messages: usize) -> Result<Self> {
        if items == 0 || messages == 0 {
            return Err(Error::InvalidGame("allocation needs at least one item and message".into()));
        }
        Ok(Self { items, messages })
    }

    pub(super) fn payoffs<R: Real>(&self, action: &[usize], wanted: usize) -> Result<Vec<R>> {
        let &item = action.first().ok_or_else(|| Error::InvalidAction("empty".into()))?;
        if item >= self.items {
            return Err(Error::InvalidAction(format!("item {item} out of range")));
        }
        let v = if item == wanted { R::one() } else { R::zero() };
        Ok(vec![v, v])
    }

    pub fn into_game<R: Real>(self) -> Result<BayesianGame<R>> {
        Ok(BayesianGame::assemble(
            "allocation",
            Setting::Allocation(self),
            vec![self.messages],
            TypeDistribution::uniform(self.items)?,
            vec![(R::zero(), R::one())],
            R::one(),
            ObservationLayout { radices: vec![self.messages] },
            ActionLayout { sizes: vec![self.items] },
            1,
        ))
    }
}
