use super::{ActionLayout, BayesianGame, LeaderActionSpace, ObservationLayout, Setting, TypeDistribution};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Leader picks a row (or a mixture over rows); one follower picks a column.
#[derive(Clone, Debug)]
pub struct NormalForm<R> {
    cells: Vec<Vec<(R, R)>>,
    space: LeaderActionSpace,
}

impl<R: Real> NormalForm<R> {
    pub const DEFAULT_LEVELS: usize = 6;

    /// `weight_levels = Some(g)` makes the leader choose a weight in `0..=g` per row.
    pub fn new(cells: Vec<Vec<(R, R)>>, weight_levels: Option<usize>) -> Result<Self> {
        let k = cells.len();
        if k == 0 || cells.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidGame("payoff matrix must be square and nonempty".into()));
        }
        if cells.iter().flatten().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidGame("non-finite payoff".into()));
        }
        let space = match weight_levels {
            None => LeaderActionSpace::Discrete(k),
            Some(0) => return Err(Error::InvalidGame("weight levels must be positive".into())),
            Some(levels) => LeaderActionSpace::WeightVector { actions: k, levels },
        };
        Ok(Self { cells, space })
    }

    pub fn size(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> (R, R) {
        self.cells[row][col]
    }

    pub fn space(&self) -> LeaderActionSpace {
        self.space
    }

    /// Probability of each row under a leader action.
    pub fn mixture(&self, action: &[usize]) -> Result<Vec<R>> {
        match self.space {
            LeaderActionSpace::Discrete(k) => {
                let row = *action.first().ok_or_else(|| Error::InvalidAction("empty".into()))?;
                if row >= k {
                    return Err(Error::InvalidAction(format!("row {row} out of range")));
                }
                let mut x = vec![R::zero(); k];
                x[row] = R::one();
                Ok(x)
            }
            LeaderActionSpace::WeightVector { actions, levels } => {
                if action.len() != actions || action.iter().any(|&w| w > levels) {
                    return Err(Error::InvalidAction(format!("bad weight vector {action:?}")));
                }
                let weights: Vec<R> = action.iter().map(|&w| R::from_usize_lossy(w)).collect();
                normalize_weights(&weights)
            }
        }
    }

    /// Expected payoffs when the leader plays the mixture `x` and the follower plays `col`.
    pub fn mixed_payoffs(&self, x: &[R], col: usize) -> Vec<R> {
        let mut out = vec![R::zero(), R::zero()];
        for (row, &p) in x.iter().enumerate() {
            let (l, f) = self.cells[row][col];
            out[0] += p * l;
            out[1] += p * f;
        }
        out
    }

    pub(super) fn payoffs(&self, action: &[usize], col: usize) -> Result<Vec<R>> {
        Ok(self.mixed_payoffs(&self.mixture(action)?, col))
    }

    pub(super) fn mask(&self, component: usize, prefix: &[usize], out: &mut [bool]) {
        if let LeaderActionSpace::WeightVector { actions, .. } = self.space {
            if component + 1 == actions && prefix.iter().all(|&w| w == 0) {
                out[0] = false;
            }
        }
    }

    pub(super) fn describe(&self, action: &[usize]) -> String {
        match self.space {
            LeaderActionSpace::Discrete(_) => format!("row {}", row_name(action[0])),
            LeaderActionSpace::WeightVector { .. } => match self.mixture(action) {
                Ok(x) => format!(
                    "weights {} -> ({})",
                    super::join(action.iter()),
                    x.iter().map(|p| format!("{:.3}", p.f64())).collect::<Vec<_>>().join(", ")
                ),
                Err(e) => e.to_string(),
            },
        }
    }

    pub fn into_game(self) -> Result<BayesianGame<R>> {
        let k = self.size();
        let leader_max = self.cells.iter().flatten().map(|c| c.0).fold(R::neg_infinity(), R::max);
        let fmin = self.cells.iter().flatten().map(|c| c.1).fold(R::infinity(), R::min);
        let fmax = self.cells.iter().flatten().map(|c| c.1).fold(R::neg_infinity(), R::max);
        let sizes = match self.space {
            LeaderActionSpace::Discrete(k) => vec![k],
            LeaderActionSpace::WeightVector { actions, levels } => vec![levels + 1; actions],
        };
        let normalizer = if leader_max > R::zero() { leader_max } else { R::one() };
        Ok(BayesianGame::assemble(
            "normal_form",
            Setting::NormalForm(self),
            vec![k],
            TypeDistribution::trivial(1),
            vec![(fmin, fmax)],
            normalizer,
            ObservationLayout { radices: Vec::new() },
            ActionLayout { sizes },
            1,
        ))
    }
}

/// Normalizes nonnegative weights into a distribution; rejects the all-zero vector.
pub fn normalize_weights<R: Real>(weights: &[R]) -> Result<Vec<R>> {
    if weights.iter().any(|w| *w < R::zero() || !w.is_finite()) {
        return Err(Error::InvalidAction("weights must be finite and nonnegative".into()));
    }
    let total: R = weights.iter().copied().sum();
    if total <= R::zero() {
        return Err(Error::InvalidAction("all-zero weight vector".into()));
    }
    Ok(weights.iter().map(|&w| w / total).collect())
}

pub(crate) fn row_name(i: usize) -> String {
    if i < 26 {
        char::from(b'A' + i as u8).to_string()
    } else {
        i.to_string()
    }
}
