use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::game::SpmSetting;
use crate::scalar::Real;

/// Most type profiles the exhaustive search handles (one bit per profile).
pub const MAX_PROFILES: usize = 64;
/// Default cap on distinct candidate mechanisms and messaging profiles.
pub const DEFAULT_TREE_CAP: usize = 200_000;

/// A deterministic sequential price mechanism: offer `prices` (`None` for sold items) to
/// `agent`, then continue according to which items they bought.
#[derive(Clone, Debug, PartialEq)]
pub enum SpmTree<R> {
    Stop,
    Offer { agent: usize, prices: Vec<Option<R>>, next: Vec<(Vec<usize>, SpmTree<R>)> },
}

impl<R: Real> SpmTree<R> {
    /// First agent visited and the prices offered, if any.
    pub fn root(&self) -> Option<(usize, &[Option<R>])> {
        match self {
            SpmTree::Stop => None,
            SpmTree::Offer { agent, prices, .. } => Some((*agent, prices)),
        }
    }
}

impl<R: Real> fmt::Display for SpmTree<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpmTree::Stop => write!(f, "stop"),
            SpmTree::Offer { agent, prices, next } => {
                let p: Vec<String> = prices
                    .iter()
                    .map(|p| p.map_or("-".to_string(), |v| format!("{:.1}", v.f64())))
                    .collect();
                write!(f, "offer agent {} prices [{}]", agent + 1, p.join(", "))?;
                let cont: Vec<String> = next
                    .iter()
                    .filter(|(_, t)| *t != SpmTree::Stop)
                    .map(|(bought, t)| {
                        let b: Vec<String> = bought.iter().map(|j| (j + 1).to_string()).collect();
                        format!("bought {{{}}} -> {t}", b.join(","))
                    })
                    .collect();
                if !cont.is_empty() {
                    write!(f, " then ({})", cont.join("; "))?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpmSolution<R> {
    pub expected_welfare: R,
    pub first_best: R,
    /// Per agent, the message sent by each type (`None` without messaging).
    pub messaging: Option<Vec<Vec<usize>>>,
    /// Mechanism per message profile; a single entry with an empty profile without messaging.
    pub branches: Vec<(Vec<usize>, SpmTree<R>)>,
    pub enumerated: usize,
}

impl<R: Real> SpmSolution<R> {
    pub fn welfare_loss(&self) -> R {
        self.first_best - self.expected_welfare
    }

    /// Best achievable designer reward in the welfare-loss units of the game.
    pub fn reward(&self) -> R {
        R::zero() - self.welfare_loss()
    }

    pub fn describe(&self) -> String {
        let mut lines = Vec::new();
        if let Some(m) = &self.messaging {
            for (i, row) in m.iter().enumerate() {
                let r: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                lines.push(format!("agent {} messages by type: [{}]", i + 1, r.join(", ")));
            }
        }
        for (msgs, tree) in &self.branches {
            if msgs.is_empty() {
                lines.push(tree.to_string());
            } else {
                let m: Vec<String> = msgs.iter().map(|x| x.to_string()).collect();
                lines.push(format!("messages ({}): {tree}", m.join(",")));
            }
        }
        lines.join("\n")
    }
}

struct Profiles<R> {
    types: Vec<Vec<usize>>,
    probs: Vec<R>,
}

fn profiles<R: Real>(setting: &SpmSetting<R>) -> Result<Profiles<R>> {
    let dist = setting.distribution()?;
    if dist.len() > MAX_PROFILES {
        return Err(Error::SizeCap { cap: MAX_PROFILES, what: "type profiles".into() });
    }
    let (types, probs) = dist.iter().map(|(t, p)| (t.to_vec(), p)).unzip();
    Ok(Profiles { types, probs })
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Node {
    visited: u32,
    owner: Vec<Option<usize>>,
}

impl Node {
    fn root<R: Real>(setting: &SpmSetting<R>) -> Self {
        Self { visited: 0, owner: vec![None; setting.n_items()] }
    }

    fn terminal(&self, agents: usize) -> bool {
        self.owner.iter().all(Option::is_some) || self.visited.count_ones() as usize == agents
    }
}

/// Offers at `node`: every unvisited agent with every price combination over unsold items,
/// lowest agent first, then lexicographic price indices.
fn offers<R: Real>(setting: &SpmSetting<R>, node: &Node) -> Vec<(usize, Vec<Option<R>>)> {
    let grid = setting.price_grid();
    let open: Vec<usize> = (0..setting.n_items()).filter(|&j| node.owner[j].is_none()).collect();
    let mut combos: Vec<Vec<Option<R>>> = vec![vec![None; setting.n_items()]];
    for &j in &open {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                grid.iter().map(move |&p| {
                    let mut c = c.clone();
                    c[j] = Some(p);
                    c
                })
            })
            .collect();
    }
    let mut out = Vec::new();
    for agent in 0..setting.n_agents() {
        if node.visited & (1 << agent) == 0 {
            out.extend(combos.iter().map(|c| (agent, c.clone())));
        }
    }
    out
}

/// Splits the profile set `members` by the buyer's response; children in order of first
/// appearance.
fn split<R: Real>(
    setting: &SpmSetting<R>,
    profs: &Profiles<R>,
    members: u64,
    node: &Node,
    agent: usize,
    prices: &[Option<R>],
) -> Vec<(Vec<usize>, u64, Node, R)> {
    let mut out: Vec<(Vec<usize>, u64, Node, R)> = Vec::new();
    for k in bits(members) {
        let bought = setting.buyer_choice(agent, profs.types[k][agent], prices);
        if let Some(entry) = out.iter_mut().find(|e| e.0 == bought) {
            entry.1 |= 1 << k;
            continue;
        }
        let mut next = node.clone();
        next.visited |= 1 << agent;
        let mut paid = R::zero();
        for &j in &bought {
            next.owner[j] = Some(agent);
            paid += prices[j].expect("bought items were offered");
        }
        out.push((bought, 1 << k, next, paid));
    }
    out
}

fn bits(mut x: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        (x != 0).then(|| {
            let k = x.trailing_zeros() as usize;
            x &= x - 1;
            k
        })
    })
}

fn full_set(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

struct Planner<'a, R> {
    setting: &'a SpmSetting<R>,
    profs: &'a Profiles<R>,
    memo: HashMap<(u64, Node), (R, Option<(usize, Vec<Option<R>>)>)>,
}

impl<R: Real> Planner<'_, R> {
    /// Largest probability-weighted welfare reachable from `node` for the profiles in
    /// `members`, which the designer cannot tell apart.
    fn value(&mut self, members: u64, node: &Node) -> R {
        if let Some((v, _)) = self.memo.get(&(members, node.clone())) {
            return *v;
        }
        let tol = R::lit(1e-12);
        let result = if node.terminal(self.setting.n_agents()) {
            let v = bits(members)
                .map(|k| self.profs.probs[k] * self.setting.welfare(&node.owner, &self.profs.types[k]))
                .sum();
            (v, None)
        } else {
            let mut best: (R, Option<(usize, Vec<Option<R>>)>) = (R::neg_infinity(), None);
            for (agent, prices) in offers(self.setting, node) {
                let v = split(self.setting, self.profs, members, node, agent, &prices)
                    .into_iter()
                    .map(|(_, m, next, _)| self.value(m, &next))
                    .sum::<R>();
                if v > best.0 + tol {
                    best = (v, Some((agent, prices)));
                }
            }
            best
        };
        let v = result.0;
        self.memo.insert((members, node.clone()), result);
        v
    }

    fn tree(&mut self, members: u64, node: &Node) -> SpmTree<R> {
        self.value(members, node);
        let Some((agent, prices)) = self.memo[&(members, node.clone())].1.clone() else {
            return SpmTree::Stop;
        };
        let next = split(self.setting, self.profs, members, node, agent, &prices)
            .into_iter()
            .map(|(bought, m, child, _)| (bought, self.tree(m, &child)))
            .collect();
        SpmTree::Offer { agent, prices, next }
    }
}

fn first_best<R: Real>(setting: &SpmSetting<R>, profs: &Profiles<R>) -> R {
    profs.types.iter().zip(&profs.probs).map(|(t, &p)| p * setting.first_best(t)).sum()
}

/// Welfare-optimal sequential price mechanism over the setting's price grid. Without
/// messages the designer observes only purchases. With messages every agent first sends
/// one message; the search covers all pure messaging profiles and keeps only mechanism and
/// messaging pairs where messaging is a Bayes-Nash equilibrium.
pub fn solve_spm_exhaustive<R: Real>(
    setting: &SpmSetting<R>,
    with_messages: bool,
    cap: usize,
) -> Result<SpmSolution<R>> {
    if setting.n_agents() > 31 {
        return Err(Error::SizeCap { cap: 31, what: "agents".into() });
    }
    let profs = profiles(setting)?;
    let fb = first_best(setting, &profs);
    if !with_messages {
        let mut planner = Planner { setting, profs: &profs, memo: HashMap::new() };
        let root = Node::root(setting);
        let all = full_set(profs.types.len());
        let welfare = planner.value(all, &root);
        let tree = planner.tree(all, &root);
        return Ok(SpmSolution {
            expected_welfare: welfare,
            first_best: fb,
            messaging: None,
            branches: vec![(Vec::new(), tree)],
            enumerated: planner.memo.len(),
        });
    }
    messaging_search(setting, &profs, fb, cap)
}

/// Outcome of a mechanism on every type profile: welfare and each agent's utility.
#[derive(Clone)]
struct Candidate<R> {
    welfare: Vec<R>,
    utility: Vec<Vec<R>>,
    tree: SpmTree<R>,
}

fn outcome_key<R: Real>(c: &Candidate<R>) -> Vec<u64> {
    c.welfare
        .iter()
        .chain(c.utility.iter().flatten())
        .map(|x| (x.f64() + 0.0).to_bits())
        .collect()
}

/// Every mechanism from `node` for the profiles in `members`, deduplicated by outcome.
fn enumerate_trees<R: Real>(
    setting: &SpmSetting<R>,
    profs: &Profiles<R>,
    members: u64,
    node: &Node,
    paid: &[R],
    cap: usize,
) -> Result<Vec<Candidate<R>>> {
    let n_prof = profs.types.len();
    let agents = setting.n_agents();
    if node.terminal(agents) {
        let mut c = Candidate {
            welfare: vec![R::zero(); n_prof],
            utility: vec![vec![R::zero(); n_prof]; agents],
            tree: SpmTree::Stop,
        };
        for k in bits(members) {
            let t = &profs.types[k];
            c.welfare[k] = setting.welfare(&node.owner, t);
            for i in 0..agents {
                let bundle: R = (0..setting.n_items())
                    .filter(|&j| node.owner[j] == Some(i))
                    .map(|j| setting.value(i, t[i], j))
                    .sum();
                c.utility[i][k] = bundle - paid[i];
            }
        }
        return Ok(vec![c]);
    }
    let mut seen: HashMap<Vec<u64>, ()> = HashMap::new();
    let mut out = Vec::new();
    for (agent, prices) in offers(setting, node) {
        let children = split(setting, profs, members, node, agent, &prices);
        let mut partial: Vec<Candidate<R>> = vec![Candidate {
            welfare: vec![R::zero(); n_prof],
            utility: vec![vec![R::zero(); n_prof]; agents],
            tree: SpmTree::Offer { agent, prices: prices.clone(), next: Vec::new() },
        }];
        for (bought, m, child, cost) in children {
            let mut child_paid = paid.to_vec();
            child_paid[agent] += cost;
            let subs = enumerate_trees(setting, profs, m, &child, &child_paid, cap)?;
            if partial.len().saturating_mul(subs.len()) > cap {
                return Err(Error::SizeCap { cap, what: "candidate mechanisms".into() });
            }
            let mut combined = Vec::with_capacity(partial.len() * subs.len());
            for p in &partial {
                for s in &subs {
                    let mut c = p.clone();
                    for k in bits(m) {
                        c.welfare[k] = s.welfare[k];
                        for i in 0..agents {
                            c.utility[i][k] = s.utility[i][k];
                        }
                    }
                    if let SpmTree::Offer { next, .. } = &mut c.tree {
                        next.push((bought.clone(), s.tree.clone()));
                    }
                    combined.push(c);
                }
            }
            partial = combined;
        }
        for c in partial {
            if seen.insert(outcome_key(&c), ()).is_none() {
                out.push(c);
                if out.len() > cap {
                    return Err(Error::SizeCap { cap, what: "candidate mechanisms".into() });
                }
            }
        }
    }
    Ok(out)
}

/// Digits of `index` in the mixed radix `radices`, most significant first.
fn mixed_radix(mut index: usize, radices: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radices.len()];
    for k in (0..radices.len()).rev() {
        out[k] = index % radices[k];
        index /= radices[k];
    }
    out
}

/// Incentive constraint: agent `agent` of type `ty` must not gain by sending `message`.
struct Constraint<R> {
    /// (profile, truthful branch, deviation branch, probability)
    terms: Vec<(usize, usize, usize, R)>,
    agent: usize,
}

struct Search<'a, R> {
    candidates: &'a [Candidate<R>],
    order: Vec<usize>,
    options: Vec<Vec<usize>>,
    scores: Vec<Vec<R>>,
    constraints: Vec<Vec<Constraint<R>>>,
    suffix_bound: Vec<R>,
    chosen: Vec<usize>,
    best: Option<(R, Vec<usize>)>,
}

impl<R: Real> Search<'_, R> {
    fn run(&mut self, depth: usize, score: R) {
        let tol = R::lit(1e-12);
        if let Some((b, _)) = &self.best {
            if score + self.suffix_bound[depth] <= *b + tol {
                return;
            }
        }
        if depth == self.order.len() {
            self.best = Some((score, self.chosen.clone()));
            return;
        }
        let branch = self.order[depth];
        for pos in 0..self.options[depth].len() {
            let c = self.options[depth][pos];
            self.chosen[branch] = c;
            if self.constraints[depth].iter().all(|con| self.satisfied(con)) {
                self.run(depth + 1, score + self.scores[depth][pos]);
            }
        }
    }

    fn satisfied(&self, con: &Constraint<R>) -> bool {
        let gain: R = con
            .terms
            .iter()
            .map(|&(k, truthful, deviation, p)| {
                let u = &self.candidates;
                p * (u[self.chosen[deviation]].utility[con.agent][k] - u[self.chosen[truthful]].utility[con.agent][k])
            })
            .sum();
        gain <= R::lit(1e-9)
    }
}

/// Drops candidates weakly dominated for one branch: no better welfare, no better utility
/// for profiles routed here truthfully, and no worse utility for deviators routed here.
fn pareto_filter<R: Real>(
    candidates: &[Candidate<R>],
    ids: Vec<usize>,
    score: &dyn Fn(usize) -> R,
    high: &[(usize, usize)],
    low: &[(usize, usize)],
) -> Vec<usize> {
    let tol = R::lit(1e-12);
    let mut keyed: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut unique = Vec::new();
    for c in ids {
        let key: Vec<u64> = std::iter::once(score(c))
            .chain(high.iter().chain(low).map(|&(i, k)| candidates[c].utility[i][k]))
            .map(|x| (x.f64() + 0.0).to_bits())
            .collect();
        if keyed.insert(key, c).is_none() {
            unique.push(c);
        }
    }
    let dominates = |a: usize, b: usize| {
        score(a) >= score(b) - tol
            && high.iter().all(|&(i, k)| candidates[a].utility[i][k] >= candidates[b].utility[i][k] - tol)
            && low.iter().all(|&(i, k)| candidates[a].utility[i][k] <= candidates[b].utility[i][k] + tol)
    };
    let mut kept: Vec<usize> = Vec::new();
    for &c in &unique {
        if kept.iter().any(|&k| dominates(k, c)) {
            continue;
        }
        kept.retain(|&k| !dominates(c, k));
        kept.push(c);
    }
    kept
}

fn messaging_search<R: Real>(
    setting: &SpmSetting<R>,
    profs: &Profiles<R>,
    fb: R,
    cap: usize,
) -> Result<SpmSolution<R>> {
    let agents = setting.n_agents();
    let m = setting.messages();
    let n_prof = profs.types.len();
    let root = Node::root(setting);
    let candidates =
        enumerate_trees(setting, profs, full_set(n_prof), &root, &vec![R::zero(); agents], cap)?;
    let branch_radices = vec![m; agents];
    let n_branches: usize = branch_radices.iter().product();
    let strategy_counts: Vec<usize> = (0..agents).map(|i| m.pow(setting.type_count(i) as u32)).collect();
    let n_profiles = strategy_counts.iter().try_fold(1usize, |a, &b| a.checked_mul(b));
    let n_profiles = n_profiles.filter(|&n| n <= cap).ok_or(Error::SizeCap { cap, what: "messaging profiles".into() })?;
    let branch_of = |msgs: &[usize]| msgs.iter().fold(0, |acc, &x| acc * m + x);
    let mut best: Option<(R, Vec<Vec<usize>>, Vec<usize>)> = None;
    for s in 0..n_profiles {
        let digits = mixed_radix(s, &strategy_counts);
        let sigma: Vec<Vec<usize>> = (0..agents)
            .map(|i| mixed_radix(digits[i], &vec![m; setting.type_count(i)]))
            .collect();
        let route = |k: usize, deviator: Option<(usize, usize)>| -> usize {
            let msgs: Vec<usize> = (0..agents)
                .map(|i| match deviator {
                    Some((d, msg)) if d == i => msg,
                    _ => sigma[i][profs.types[k][i]],
                })
                .collect();
            branch_of(&msgs)
        };
        // Per branch: on-path profiles and (agent, profile) pairs arriving by deviation.
        let mut on_path = vec![Vec::new(); n_branches];
        let mut deviators = vec![Vec::new(); n_branches];
        for k in 0..n_prof {
            if profs.probs[k] <= R::zero() {
                continue;
            }
            on_path[route(k, None)].push(k);
            for i in 0..agents {
                for msg in 0..m {
                    if msg != sigma[i][profs.types[k][i]] {
                        deviators[route(k, Some((i, msg)))].push((i, k));
                    }
                }
            }
        }
        let mut constraints_flat = Vec::new();
        for i in 0..agents {
            for ty in 0..setting.type_count(i) {
                for msg in 0..m {
                    if msg == sigma[i][ty] {
                        continue;
                    }
                    let terms: Vec<(usize, usize, usize, R)> = (0..n_prof)
                        .filter(|&k| profs.types[k][i] == ty && profs.probs[k] > R::zero())
                        .map(|k| (k, route(k, None), route(k, Some((i, msg))), profs.probs[k]))
                        .collect();
                    if !terms.is_empty() {
                        constraints_flat.push(Constraint { terms, agent: i });
                    }
                }
            }
        }
        let relevant: Vec<usize> =
            (0..n_branches).filter(|&b| !on_path[b].is_empty() || !deviators[b].is_empty()).collect();
        let mass = |b: usize| on_path[b].iter().map(|&k| profs.probs[k]).sum::<R>();
        let mut order = relevant.clone();
        order.sort_by(|&a, &b| mass(b).partial_cmp(&mass(a)).unwrap_or(std::cmp::Ordering::Equal));
        let mut options = Vec::new();
        let mut scores = Vec::new();
        for &b in &order {
            let score = |c: usize| on_path[b].iter().map(|&k| profs.probs[k] * candidates[c].welfare[k]).sum::<R>();
            let high: Vec<(usize, usize)> =
                on_path[b].iter().flat_map(|&k| (0..agents).map(move |i| (i, k))).collect();
            let mut kept = pareto_filter(&candidates, (0..candidates.len()).collect(), &score, &high, &deviators[b]);
            kept.sort_by(|&x, &y| score(y).partial_cmp(&score(x)).unwrap_or(std::cmp::Ordering::Equal));
            scores.push(kept.iter().map(|&c| score(c)).collect::<Vec<R>>());
            options.push(kept);
        }
        let position: HashMap<usize, usize> = order.iter().enumerate().map(|(d, &b)| (b, d)).collect();
        let mut constraints: Vec<Vec<Constraint<R>>> = (0..order.len()).map(|_| Vec::new()).collect();
        for con in constraints_flat {
            let depth = con.terms.iter().flat_map(|t| [position[&t.1], position[&t.2]]).max().unwrap_or(0);
            constraints[depth].push(con);
        }
        let mut suffix_bound = vec![R::zero(); order.len() + 1];
        for d in (0..order.len()).rev() {
            suffix_bound[d] = suffix_bound[d + 1] + scores[d].first().copied().unwrap_or(R::zero());
        }
        let mut search = Search {
            candidates: &candidates,
            order,
            options,
            scores,
            constraints,
            suffix_bound,
            chosen: vec![0; n_branches],
            best: None,
        };
        if let Some((incumbent, _, _)) = &best {
            search.best = Some((*incumbent, Vec::new()));
        }
        search.run(0, R::zero());
        if let Some((value, chosen)) = search.best {
            if !chosen.is_empty() && best.as_ref().is_none_or(|b| value > b.0 + R::lit(1e-12)) {
                best = Some((value, sigma, chosen));
            }
        }
    }
    let (welfare, sigma, chosen) =
        best.ok_or_else(|| Error::Undefined("no messaging profile is an equilibrium".into()))?;
    let branches = (0..n_branches)
        .map(|b| (mixed_radix(b, &branch_radices), candidates[chosen[b]].tree.clone()))
        .collect();
    Ok(SpmSolution {
        expected_welfare: welfare,
        first_best: fb,
        messaging: Some(sigma),
        branches,
        enumerated: candidates.len() * n_profiles,
    })
}
