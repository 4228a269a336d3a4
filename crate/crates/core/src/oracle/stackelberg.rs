use crate::error::{Error, Result};
use crate::game::{Action, BayesianGame, Observation, ObservationLayout};
use crate::scalar::Real;
use crate::LeaderStrategy;

/// Tolerance for payoff ties in best-response and dominance checks.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Upper bound on enumerated (leader strategy, follower profile) pairs.
pub const DEFAULT_SIZE_CAP: usize = 1_000_000;

/// Deterministic leader strategy for one-shot games: one action per observation class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationMap {
    pub layout: ObservationLayout,
    pub actions: Vec<Action>,
}

impl ObservationMap {
    pub fn constant(layout: ObservationLayout, action: Action) -> Self {
        let n = layout.classes();
        Self { layout, actions: vec![action; n] }
    }

    pub fn action(&self, obs: &Observation) -> &Action {
        &self.actions[self.layout.index(obs)]
    }
}

impl LeaderStrategy for ObservationMap {
    fn act(&mut self, obs: &Observation) -> Action {
        self.action(obs).clone()
    }
}

/// Every deterministic observation-to-action map of a one-shot game, in lexicographic
/// order of the per-class valid actions.
pub fn enumerate_maps<R: Real>(game: &BayesianGame<R>, cap: usize) -> Result<Vec<ObservationMap>> {
    if !game.is_one_shot() {
        return Err(Error::InvalidGame(format!("{} is not a one-shot game", game.name)));
    }
    let layout = game.observation_layout().clone();
    let per_class: Vec<Vec<Action>> =
        (0..layout.classes()).map(|k| game.valid_actions(&layout.decode(k))).collect();
    let total = per_class.iter().try_fold(1usize, |acc, v| acc.checked_mul(v.len()));
    match total {
        Some(n) if n <= cap => {}
        _ => return Err(Error::SizeCap { cap, what: "leader strategies".into() }),
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; per_class.len()];
    loop {
        out.push(ObservationMap {
            layout: layout.clone(),
            actions: idx.iter().zip(&per_class).map(|(&i, v)| v[i].clone()).collect(),
        });
        let mut k = per_class.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < per_class[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// How the leader commits.
#[derive(Clone, Debug, PartialEq)]
pub enum Commitment<R> {
    Pure(ObservationMap),
    /// Probability per row of a normal-form game.
    Mixed(Vec<R>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StackelbergSolution<R> {
    pub leader_strategy: Commitment<R>,
    /// Action per follower and type.
    pub follower_response: Vec<Vec<usize>>,
    pub leader_value: R,
    pub follower_values: Vec<R>,
    /// Human-readable leader strategy.
    pub description: String,
    /// Candidate pairs evaluated.
    pub enumerated: usize,
}

/// All pure follower profiles: one type-to-action map per follower.
struct ProfileSpace {
    per_follower: Vec<Vec<Vec<usize>>>,
}

impl ProfileSpace {
    fn new(type_counts: &[usize], action_counts: &[usize]) -> Self {
        let per_follower = type_counts
            .iter()
            .zip(action_counts)
            .map(|(&types, &actions)| {
                let mut maps = vec![Vec::new()];
                for _ in 0..types {
                    maps = maps
                        .into_iter()
                        .flat_map(|m: Vec<usize>| {
                            (0..actions).map(move |a| {
                                let mut m = m.clone();
                                m.push(a);
                                m
                            })
                        })
                        .collect();
                }
                maps
            })
            .collect();
        Self { per_follower }
    }

    fn len(&self) -> usize {
        self.per_follower.iter().map(Vec::len).product()
    }

    fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.per_follower.len()];
        for i in (0..out.len()).rev() {
            let n = self.per_follower[i].len();
            out[i] = index % n;
            index /= n;
        }
        out
    }

    fn encode(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.per_follower).fold(0, |acc, (&d, m)| acc * m.len() + d)
    }
}

/// Expected payoffs `[leader, followers...]` of every follower profile against `map`.
fn profile_values<R: Real>(
    game: &BayesianGame<R>,
    map: &ObservationMap,
    space: &ProfileSpace,
) -> Result<Vec<Vec<R>>> {
    let n = game.n_followers();
    let dist = game.type_distribution();
    let mut strategy = map.clone();
    (0..space.len())
        .map(|p| {
            let digits = space.decode(p);
            let mut total = vec![R::zero(); n + 1];
            for (types, prob) in dist.iter() {
                let actions: Vec<usize> =
                    (0..n).map(|i| space.per_follower[i][digits[i]][types[i]]).collect();
                let payoffs = game.play(&mut strategy, types, &actions)?;
                for (t, v) in total.iter_mut().zip(payoffs) {
                    *t += prob * v;
                }
            }
            Ok(total)
        })
        .collect()
}

/// Profiles in which every follower plays a weakly dominant strategy.
fn dominant_profiles<R: Real>(space: &ProfileSpace, values: &[Vec<R>]) -> Vec<usize> {
    let n = space.per_follower.len();
    let tol = R::lit(TIE_TOLERANCE);
    let mut dominant: Vec<Vec<bool>> = space.per_follower.iter().map(|m| vec![true; m.len()]).collect();
    for p in 0..space.len() {
        let digits = space.decode(p);
        for i in 0..n {
            // Best payoff of follower i against the others' part of profile p.
            let mut alt = digits.clone();
            let mut best = R::neg_infinity();
            for s in 0..space.per_follower[i].len() {
                alt[i] = s;
                best = best.max(values[space.encode(&alt)][1 + i]);
            }
            if values[p][1 + i] < best - tol {
                dominant[i][digits[i]] = false;
            }
        }
    }
    (0..space.len())
        .filter(|&p| space.decode(p).iter().enumerate().all(|(i, &d)| dominant[i][d]))
        .collect()
}

/// Leader-optimal deterministic commitment when followers play weakly dominant strategies
/// (a best response for a single follower), breaking follower ties in the leader's favour.
/// Leader strategies admitting no dominant-strategy profile are skipped.
pub fn solve_deterministic_stackelberg<R: Real>(
    game: &BayesianGame<R>,
    cap: usize,
) -> Result<StackelbergSolution<R>> {
    let maps = enumerate_maps(game, cap)?;
    let space = ProfileSpace::new(game.type_counts(), game.action_counts());
    let pairs = maps.len().checked_mul(space.len()).filter(|&n| n <= cap);
    let enumerated = pairs.ok_or_else(|| Error::SizeCap { cap, what: "strategy pairs".into() })?;
    let tol = R::lit(TIE_TOLERANCE);
    let mut best: Option<(StackelbergSolution<R>, R)> = None;
    for map in maps {
        let values = profile_values(game, &map, &space)?;
        let Some(p) = dominant_profiles(&space, &values)
            .into_iter()
            .reduce(|a, b| if values[b][0] > values[a][0] + tol { b } else { a })
        else {
            continue;
        };
        let v = values[p][0];
        if best.as_ref().is_none_or(|(_, b)| v > *b + tol) {
            let digits = space.decode(p);
            let description =
                map.actions.iter().map(|a| game.describe_action(a)).collect::<Vec<_>>().join("; ");
            let solution = StackelbergSolution {
                follower_response: (0..digits.len()).map(|i| space.per_follower[i][digits[i]].clone()).collect(),
                leader_value: v,
                follower_values: values[p][1..].to_vec(),
                leader_strategy: Commitment::Pure(map),
                description,
                enumerated,
            };
            best = Some((solution, v));
        }
    }
    best.map(|(s, _)| s)
        .ok_or_else(|| Error::Undefined("no leader strategy admits a dominant-strategy response".into()))
}

/// Best leader mixture on the simplex lattice `{k * resolution}` against a best-responding
/// single follower; follower ties are broken against the leader.
pub fn solve_randomized_stackelberg<R: Real>(
    matrix: &[Vec<(R, R)>],
    resolution: f64,
    cap: usize,
) -> Result<StackelbergSolution<R>> {
    let rows = matrix.len();
    let cols = matrix.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || matrix.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidGame("payoff matrix must be rectangular and nonempty".into()));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::Config(format!("grid resolution {resolution} outside (0, 1]")));
    }
    let steps = (1.0 / resolution).round() as usize;
    if ((steps as f64) * resolution - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("grid resolution {resolution} does not divide 1")));
    }
    let points = binomial(steps + rows - 1, rows - 1);
    if points.is_none_or(|n| n > cap) {
        return Err(Error::SizeCap { cap, what: "grid points".into() });
    }
    let tol = R::lit(TIE_TOLERANCE);
    let denom = R::from_usize_lossy(steps);
    let mut counts = vec![0usize; rows];
    counts[rows - 1] = steps;
    let mut best: Option<(Vec<R>, usize, R, R)> = None;
    let mut enumerated = 0;
    loop {
        enumerated += 1;
        let x: Vec<R> = counts.iter().map(|&c| R::from_usize_lossy(c) / denom).collect();
        let mixed = |col: usize| -> (R, R) {
            (0..rows).fold((R::zero(), R::zero()), |(l, f), r| {
                (l + x[r] * matrix[r][col].0, f + x[r] * matrix[r][col].1)
            })
        };
        let follower_best = (0..cols).map(|c| mixed(c).1).fold(R::neg_infinity(), R::max);
        let (col, value) = (0..cols)
            .filter(|&c| mixed(c).1 >= follower_best - tol)
            .map(|c| (c, mixed(c).0))
            .reduce(|a, b| if b.1 < a.1 - tol { b } else { a })
            .expect("at least one column");
        if best.as_ref().is_none_or(|b| value > b.2 + tol) {
            let follower = mixed(col).1;
            best = Some((x, col, value, follower));
        }
        if !next_composition(&mut counts) {
            break;
        }
    }
    let (x, col, value, follower) = best.expect("grid is nonempty");
    let description = format!(
        "mixture ({})",
        x.iter().map(|p| format!("{:.3}", p.f64())).collect::<Vec<_>>().join(", ")
    );
    Ok(StackelbergSolution {
        leader_strategy: Commitment::Mixed(x),
        follower_response: vec![vec![col]],
        leader_value: value,
        follower_values: vec![follower],
        description,
        enumerated,
    })
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    (0..k).try_fold(1usize, |acc, i| acc.checked_mul(n - i).map(|v| v / (i + 1)))
}

/// Advances `counts` to the next composition of the same total, first coordinate slowest.
/// Starts from `[0, ..., 0, n]`; returns false after `[n, 0, ..., 0]`.
fn next_composition(counts: &mut [usize]) -> bool {
    let k = counts.len();
    if k < 2 {
        return false;
    }
    // Find the rightmost position j < k-1 that can take one unit from the tail.
    let tail: usize = counts[k - 1];
    if tail > 0 {
        counts[k - 2] += 1;
        counts[k - 1] -= 1;
        return true;
    }
    let mut j = k - 2;
    loop {
        if counts[j] > 0 {
            if j == 0 {
                return false;
            }
            let moved = counts[j];
            counts[j] = 0;
            counts[j - 1] += 1;
            counts[k - 1] = moved - 1;
            return true;
        }
        if j == 0 {
            return false;
        }
        j -= 1;
    }
}
