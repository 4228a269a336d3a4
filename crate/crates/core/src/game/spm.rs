use super::{ActionLayout, BayesianGame, Observation, ObservationLayout, Setting, SubEpisode, TypeDistribution};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// How a visited buyer chooses among the offered items.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Demand {
    /// Buys every offered item priced strictly below its value.
    Additive,
    /// Buys the single item with the largest strictly positive utility (lowest index on ties).
    UnitDemand,
}

/// Designer reward from welfare: the negated welfare loss, zero exactly at the optimum.
pub fn reward_from_welfare<R: Real>(realized: R, optimal: R) -> R {
    -(optimal - realized)
}

/// A sequential price mechanism preceded by one message per agent.
#[derive(Clone, Debug)]
pub struct SpmSetting<R> {
    n_agents: usize,
    n_items: usize,
    messages: usize,
    price_grid: Vec<R>,
    /// Per agent: support of item-value vectors with probabilities.
    valuations: Vec<Vec<(Vec<R>, R)>>,
    demand: Demand,
    optimal: Vec<R>,
}

impl<R: Real> SpmSetting<R> {
    pub fn new(
        messages: usize,
        price_grid: Vec<R>,
        valuations: Vec<Vec<(Vec<R>, R)>>,
        demand: Demand,
    ) -> Result<Self> {
        let n_agents = valuations.len();
        if n_agents == 0 {
            return Err(Error::InvalidGame("no agents".into()));
        }
        if messages < 2 {
            return Err(Error::InvalidGame("message space needs at least two messages".into()));
        }
        if price_grid.is_empty() || price_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGame("price grid must be nonempty and increasing".into()));
        }
        if price_grid.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGame("non-finite price".into()));
        }
        let n_items = valuations[0].first().map_or(0, |(v, _)| v.len());
        if n_items == 0 {
            return Err(Error::InvalidGame("valuations must cover at least one item".into()));
        }
        for (i, support) in valuations.iter().enumerate() {
            if support.is_empty() {
                return Err(Error::InvalidGame(format!("agent {i} has an empty valuation support")));
            }
            for (v, p) in support {
                if v.len() != n_items {
                    return Err(Error::InvalidGame(format!(
                        "agent {i} valuation has {} items, expected {n_items}",
                        v.len()
                    )));
                }
                if v.iter().any(|x| !x.is_finite() || *x < R::zero()) || *p < R::zero() {
                    return Err(Error::InvalidGame(format!("agent {i} has an invalid valuation")));
                }
            }
        }
        let mut setting = Self {
            n_agents,
            n_items,
            messages,
            price_grid,
            valuations,
            demand,
            optimal: Vec::new(),
        };
        let dist = setting.distribution()?;
        setting.optimal = vec![R::zero(); setting.profile_count()];
        for (profile, _) in dist.iter() {
            let idx = setting.profile_index(profile);
            setting.optimal[idx] = setting.first_best(profile);
        }
        Ok(setting)
    }

    /// Prices 0.0, 0.1, ..., 3.0.
    pub fn default_price_grid() -> Vec<R> {
        (0..=30).map(|i| R::lit(i as f64 / 10.0)).collect()
    }

    /// Two agents, one item: agent 1 values it 1/2 or 1/(2 eps) with probabilities
    /// 1 - eps and eps; agent 2 values it 0 or 1 with equal probability.
    pub fn agrawal(eps: f64) -> Result<Self> {
        let one = |v: f64, p: f64| (vec![R::lit(v)], R::lit(p));
        Self::new(
            2,
            Self::default_price_grid(),
            vec![
                vec![one(0.5, 1.0 - eps), one(0.5 / eps, eps)],
                vec![one(0.0, 0.5), one(1.0, 0.5)],
            ],
            Demand::UnitDemand,
        )
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn messages(&self) -> usize {
        self.messages
    }

    pub fn price_grid(&self) -> &[R] {
        &self.price_grid
    }

    /// Grid index of a price, matched within 1e-9.
    pub fn price_index(&self, price: f64) -> Option<usize> {
        self.price_grid.iter().position(|p| (p.f64() - price).abs() < 1e-9)
    }

    pub fn demand(&self) -> Demand {
        self.demand
    }

    pub fn type_count(&self, agent: usize) -> usize {
        self.valuations[agent].len()
    }

    pub fn value(&self, agent: usize, ty: usize, item: usize) -> R {
        self.valuations[agent][ty].0[item]
    }

    pub fn distribution(&self) -> Result<TypeDistribution<R>> {
        let marginals: Vec<Vec<R>> =
            self.valuations.iter().map(|s| s.iter().map(|(_, p)| *p).collect()).collect();
        TypeDistribution::independent(&marginals)
    }

    fn profile_count(&self) -> usize {
        self.valuations.iter().map(Vec::len).product()
    }

    fn profile_index(&self, types: &[usize]) -> usize {
        types.iter().zip(&self.valuations).fold(0, |acc, (&t, s)| acc * s.len() + t)
    }

    /// Items bought by `agent` of type `ty` facing `offers` (`None` = not on offer).
    pub fn buyer_choice(&self, agent: usize, ty: usize, offers: &[Option<R>]) -> Vec<usize> {
        let utility = |j: usize| offers[j].map(|p| self.value(agent, ty, j) - p);
        match self.demand {
            Demand::Additive => {
                (0..self.n_items).filter(|&j| utility(j).is_some_and(|u| u > R::zero())).collect()
            }
            Demand::UnitDemand => {
                let mut best: Option<(usize, R)> = None;
                for j in 0..self.n_items {
                    if let Some(u) = utility(j) {
                        if u > R::zero() && best.is_none_or(|(_, b)| u > b) {
                            best = Some((j, u));
                        }
                    }
                }
                best.map(|(j, _)| vec![j]).unwrap_or_default()
            }
        }
    }

    /// Welfare of an allocation given the agents' types.
    pub fn welfare(&self, owner: &[Option<usize>], types: &[usize]) -> R {
        owner
            .iter()
            .enumerate()
            .filter_map(|(j, o)| o.map(|i| self.value(i, types[i], j)))
            .sum()
    }

    /// Largest welfare over all feasible allocations.
    pub fn first_best(&self, types: &[usize]) -> R {
        let mut owner = vec![None; self.n_items];
        let mut best = R::zero();
        self.search_allocations(0, &mut owner, types, &mut best);
        best
    }

    fn search_allocations(
        &self,
        item: usize,
        owner: &mut Vec<Option<usize>>,
        types: &[usize],
        best: &mut R,
    ) {
        if item == self.n_items {
            *best = best.max(self.welfare(owner, types));
            return;
        }
        for choice in std::iter::once(None).chain((0..self.n_agents).map(Some)) {
            if let (Some(i), Demand::UnitDemand) = (choice, self.demand) {
                if owner[..item].contains(&Some(i)) {
                    continue;
                }
            }
            owner[item] = choice;
            self.search_allocations(item + 1, owner, types, best);
        }
        owner[item] = None;
    }

    pub fn optimal_welfare(&self, types: &[usize]) -> R {
        self.optimal[self.profile_index(types)]
    }

    pub(super) fn observe(&self, sub: &SubEpisode<R>) -> Observation {
        let mut slots = Vec::with_capacity(2 * self.n_agents + self.n_items);
        slots.extend(sub.actions.iter().map(|&m| m as u16));
        slots.extend(sub.visited.iter().map(|&v| v as u16));
        slots.extend(sub.owner.iter().map(|o| o.map_or(0, |i| i as u16 + 1)));
        Observation(slots)
    }

    pub(super) fn mask(&self, obs: &Observation, component: usize, out: &mut [bool]) {
        let n = self.n_agents;
        if component == 0 {
            for (i, ok) in out.iter_mut().enumerate() {
                *ok = obs.0.get(n + i).is_none_or(|&v| v == 0);
            }
        } else if obs.0.get(2 * n + component - 1).is_some_and(|&o| o != 0) {
            out.fill(false);
            out[0] = true;
        }
    }

    pub(super) fn apply(&self, sub: &mut SubEpisode<R>, action: &[usize]) -> Result<Option<Vec<R>>> {
        let agent = action[0];
        if sub.visited[agent] {
            return Err(Error::InvalidAction(format!("agent {agent} already visited")));
        }
        let offers: Vec<Option<R>> = (0..self.n_items)
            .map(|j| sub.owner[j].is_none().then(|| self.price_grid[action[1 + j]]))
            .collect();
        sub.visited[agent] = true;
        let ty = sub.types[agent];
        for j in self.buyer_choice(agent, ty, &offers) {
            sub.owner[j] = Some(agent);
            sub.paid[agent] += offers[j].expect("bought items were offered");
        }
        let finished =
            sub.owner.iter().all(Option::is_some) || sub.visited.iter().all(|&v| v);
        if !finished {
            return Ok(None);
        }
        let realized = self.welfare(&sub.owner, &sub.types);
        let mut payoffs = vec![reward_from_welfare(realized, self.optimal_welfare(&sub.types))];
        for i in 0..self.n_agents {
            let bundle: R = (0..self.n_items)
                .filter(|&j| sub.owner[j] == Some(i))
                .map(|j| self.value(i, sub.types[i], j))
                .sum();
            payoffs.push(bundle - sub.paid[i]);
        }
        Ok(Some(payoffs))
    }

    pub(super) fn describe(&self, action: &[usize]) -> String {
        let prices: Vec<String> =
            action[1..].iter().map(|&p| format!("{:.1}", self.price_grid[p].f64())).collect();
        format!("visit agent {} at prices [{}]", action[0] + 1, prices.join(", "))
    }

    pub fn into_game(self) -> Result<BayesianGame<R>> {
        let dist = self.distribution()?;
        let ranges = (0..self.n_agents)
            .map(|i| {
                let top = self.valuations[i]
                    .iter()
                    .map(|(v, _)| match self.demand {
                        Demand::Additive => v.iter().copied().sum(),
                        Demand::UnitDemand => v.iter().copied().fold(R::zero(), R::max),
                    })
                    .fold(R::zero(), R::max);
                (R::zero(), if top > R::zero() { top } else { R::one() })
            })
            .collect();
        let n = self.n_agents;
        let mut radices = vec![self.messages; n];
        radices.extend(vec![2; n]);
        radices.extend(vec![n + 1; self.n_items]);
        let mut sizes = vec![n];
        sizes.extend(vec![self.price_grid.len(); self.n_items]);
        let cap = n + 2;
        let messages = self.messages;
        Ok(BayesianGame::assemble(
            "mu_spm",
            Setting::MuSpm(self),
            vec![messages; n],
            dist,
            ranges,
            R::one(),
            ObservationLayout { radices },
            ActionLayout { sizes },
            cap,
        ))
    }
}
