use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Explicit joint probability table over follower type profiles.
#[derive(Clone, Debug)]
pub struct TypeDistribution<R> {
    type_counts: Vec<usize>,
    profiles: Vec<Vec<usize>>,
    probs: Vec<R>,
    cumulative: Vec<f64>,
}

impl<R: Real> TypeDistribution<R> {
    /// Builds a table from `(profile, probability)` entries. Profiles must be distinct.
    pub fn new(type_counts: Vec<usize>, entries: Vec<(Vec<usize>, R)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidGame("empty type distribution".into()));
        }
        let mut total = 0.0;
        let mut profiles = Vec::with_capacity(entries.len());
        let mut probs = Vec::with_capacity(entries.len());
        for (profile, p) in entries {
            if profile.len() != type_counts.len()
                || profile.iter().zip(&type_counts).any(|(t, n)| t >= n)
            {
                return Err(Error::InvalidGame(format!("type profile {profile:?} out of range")));
            }
            if !(p.f64() >= 0.0) || !p.is_finite() {
                return Err(Error::InvalidGame(format!("bad probability {p}")));
            }
            if profiles.contains(&profile) {
                return Err(Error::InvalidGame(format!("duplicate type profile {profile:?}")));
            }
            total += p.f64();
            profiles.push(profile);
            probs.push(p);
        }
        if (total - 1.0).abs() > 1e-12 * (1.0 + probs.len() as f64) {
            return Err(Error::InvalidGame(format!("type probabilities sum to {total}")));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p.f64();
                acc
            })
            .collect();
        Ok(Self { type_counts, profiles, probs, cumulative })
    }

    /// Product of independent per-follower marginals.
    pub fn independent(marginals: &[Vec<R>]) -> Result<Self> {
        let type_counts: Vec<usize> = marginals.iter().map(Vec::len).collect();
        let mut entries = vec![(Vec::new(), R::one())];
        for marginal in marginals {
            let mut next = Vec::new();
            for (profile, p) in &entries {
                for (t, q) in marginal.iter().enumerate() {
                    let mut extended = profile.clone();
                    extended.push(t);
                    next.push((extended, *p * *q));
                }
            }
            entries = next;
        }
        Self::new(type_counts, entries)
    }

    pub fn uniform(n_types: usize) -> Result<Self> {
        let p = R::one() / R::from_usize_lossy(n_types);
        Self::independent(&[vec![p; n_types]])
    }

    /// Every follower has a single dummy type.
    pub fn trivial(n_followers: usize) -> Self {
        Self::new(vec![1; n_followers], vec![(vec![0; n_followers], R::one())])
            .expect("trivial distribution is valid")
    }

    pub fn type_counts(&self) -> &[usize] {
        &self.type_counts
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn profile(&self, idx: usize) -> &[usize] {
        &self.profiles[idx]
    }

    pub fn prob(&self, idx: usize) -> R {
        self.probs[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], R)> + '_ {
        self.profiles.iter().map(Vec::as_slice).zip(self.probs.iter().copied())
    }

    pub fn index_of(&self, profile: &[usize]) -> Option<usize> {
        self.profiles.iter().position(|p| p == profile)
    }

    pub fn sample_index<G: Rng + ?Sized>(&self, rng: &mut G) -> usize {
        let u: f64 = rng.gen::<f64>() * self.cumulative[self.cumulative.len() - 1];
        self.cumulative.iter().position(|&c| u < c).unwrap_or(self.profiles.len() - 1)
    }

    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> &[usize] {
        let idx = self.sample_index(rng);
        &self.profiles[idx]
    }

    /// Marginal probability of follower `i` having type `t`.
    pub fn marginal(&self, i: usize, t: usize) -> R {
        self.iter().filter(|(p, _)| p[i] == t).map(|(_, q)| q).sum()
    }

    /// Profiles consistent with follower `i` having type `t`, with conditional probabilities.
    pub fn conditional(&self, i: usize, t: usize) -> Vec<(usize, R)> {
        let total = self.marginal(i, t);
        if total <= R::zero() {
            return Vec::new();
        }
        (0..self.len())
            .filter(|&k| self.profiles[k][i] == t && self.probs[k] > R::zero())
            .map(|k| (k, self.probs[k] / total))
            .collect()
    }
}
