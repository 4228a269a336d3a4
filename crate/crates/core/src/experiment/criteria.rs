use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SettingConfig};
use super::run::{run_experiment, run_log_name, Bundle, LOG_FILE};
use super::targets::MIXTURE_RESOLUTION;
use crate::error::Result;
use crate::game::{presets, FixedAction};
use crate::no_regret::{empirical_strategy, run_dynamics, verify_epsilon_bcce, FollowerLearner};
use crate::oracle::{gradient_check, solve_deterministic_stackelberg, solve_randomized_stackelberg, DEFAULT_SIZE_CAP};
use crate::oracle::{GradientCheckConfig, ObservationMap};
use crate::policy::{EvalRow, LeaderPolicy, TrainingMode};
use crate::pomdp::{EpisodeSchedule, PomdpConfig};
use crate::Game;

/// Pass/fail result for one acceptance criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    fn new(criterion: u8, name: &str, passed: bool, detail: String) -> Self {
        Self { criterion, name: name.into(), passed, detail }
    }

    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {}: {}",
            self.criterion,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// Reward counted as having reached the optimum in matrix design.
pub const DESIGN_REACHED: f64 = 0.95;
/// Evaluations that must all be reached for the reward to count as sustained.
pub const DESIGN_SUSTAIN: usize = 3;
/// An evaluation below this after first reaching the optimum is a drop.
pub const DESIGN_DROP: f64 = 0.9;

/// Last evaluation at or before `horizon`.
fn at_horizon<'a>(rows: &[&'a EvalRow], horizon: u64) -> Option<&'a EvalRow> {
    rows.iter().rev().find(|r| r.step <= horizon).copied()
}

fn required(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction - 1e-9).ceil() as usize
}

fn seeds(bundle: &Bundle) -> &[u64] {
    &bundle.summary.config.seeds
}

/// Counts runs of `mode` whose rows satisfy `ok`.
fn count(bundle: &Bundle, mode: TrainingMode, ok: impl Fn(&[&EvalRow]) -> bool) -> usize {
    seeds(bundle).iter().filter(|&&s| ok(&bundle.run_rows(mode, s))).count()
}

fn has_mode(bundle: &Bundle, mode: TrainingMode) -> bool {
    bundle.summary.config.modes.contains(&mode)
}

fn greedy_is(row: &EvalRow, action: &str) -> bool {
    row.greedy.split("; ").all(|entry| entry.split_once('=').is_some_and(|(_, a)| a == action))
}

/// Payment chosen at the single matrix-design observation.
fn greedy_payment(row: &EvalRow) -> Option<f64> {
    row.greedy.split_once("tau=").and_then(|(_, t)| t.parse().ok())
}

/// Training criteria that apply to the bundle's setting.
pub fn verify_bundle(bundle: &Bundle) -> Vec<Verdict> {
    let c = TrainingMode::CentralizedCritic;
    let p = TrainingMode::Plain;
    let n = seeds(bundle).len();
    let mut out = Vec::new();
    match &bundle.summary.config.setting {
        SettingConfig::Maintain => {
            let need = required(n, 0.9);
            let hits = count(bundle, c, |rows| at_horizon(rows, 100_000).is_some_and(|r| greedy_is(r, "row A")));
            out.push(Verdict::new(
                1,
                "maintain deterministic converges to row A",
                has_mode(bundle, c) && hits >= need,
                format!("{hits}/{n} centralized seeds greedy row A at 100k steps (need {need})"),
            ));
        }
        SettingConfig::MaintainRandomized { .. } => {
            let need = required(n, 0.8);
            let hits = count(bundle, c, |rows| at_horizon(rows, 200_000).is_some_and(|r| r.eval_reward >= 26.5 / 30.0));
            let oracle = bundle.summary.oracle.as_ref().map(|o| o.value * 30.0);
            let oracle_ok = oracle.is_some_and(|v| v >= 27.49);
            out.push(Verdict::new(
                2,
                "maintain randomized reaches 26.5 and grid oracle reaches 27.49",
                has_mode(bundle, c) && hits >= need && oracle_ok,
                format!(
                    "{hits}/{n} seeds >= 0.883 at 200k (need {need}); oracle value {} at resolution {MIXTURE_RESOLUTION}",
                    oracle.map_or("unavailable".into(), |v| format!("{v:.4}"))
                ),
            ));
        }
        SettingConfig::Escape => {
            let modes = &bundle.summary.config.modes;
            let per_mode: Vec<(TrainingMode, usize)> = modes
                .iter()
                .map(|&m| {
                    let hits = count(bundle, m, |rows| {
                        at_horizon(rows, 50_000).is_some_and(|r| greedy_is(r, "row C") && r.eval_reward >= 0.99)
                    });
                    (m, hits)
                })
                .collect();
            let both = has_mode(bundle, c) && has_mode(bundle, p);
            out.push(Verdict::new(
                3,
                "escape reaches row C in both modes",
                both && per_mode.iter().all(|&(_, h)| h == n),
                per_mode.iter().map(|(m, h)| format!("{}: {h}/{n} at 50k", m.label())).collect::<Vec<_>>().join(", "),
            ));
        }
        SettingConfig::MatrixDesign { .. } => out.push(design_verdict(bundle)),
        SettingConfig::Allocation { items, messages } => {
            let target = (*messages).min(*items) as f64 / *items as f64;
            let need = required(n, 0.8);
            let hits = count(bundle, c, |rows| {
                at_horizon(rows, 300_000).is_some_and(|r| (r.eval_reward - target).abs() <= 0.05)
            });
            out.push(Verdict::new(
                5,
                &format!("allocation k={items} m={messages} plateaus at {target:.3}"),
                has_mode(bundle, c) && hits >= need,
                format!("{hits}/{n} seeds within 0.05 at 300k (need {need})"),
            ));
        }
        SettingConfig::MuSpm { .. } => {
            let bound = bundle.summary.oracle.as_ref().and_then(|o| o.no_message_bound);
            let (above, near) = match bound {
                Some(b) => (
                    count(bundle, c, |rows| at_horizon(rows, 500_000).is_some_and(|r| r.eval_reward > b)),
                    count(bundle, c, |rows| at_horizon(rows, 500_000).is_some_and(|r| r.eval_reward >= -0.05)),
                ),
                None => (0, 0),
            };
            let (need_above, need_near) = (required(n, 0.6), required(n, 0.4));
            out.push(Verdict::new(
                6,
                "mechanism with messages beats the no-message bound",
                has_mode(bundle, c) && bound.is_some() && above >= need_above && near >= need_near,
                format!(
                    "{above}/{n} above bound {} (need {need_above}), {near}/{n} within 0.05 of first best (need {need_near}) at 500k",
                    bound.map_or("unavailable".into(), |b| format!("{b:.4}"))
                ),
            ));
        }
    }
    out
}

fn design_verdict(bundle: &Bundle) -> Verdict {
    let c = TrainingMode::CentralizedCritic;
    let p = TrainingMode::Plain;
    let n = seeds(bundle).len();
    let need = required(n, 0.8);
    let sustained = |rows: &[&EvalRow]| {
        let within: Vec<&EvalRow> = rows.iter().filter(|r| r.step <= 300_000).copied().collect();
        within.len() >= DESIGN_SUSTAIN
            && within[within.len() - DESIGN_SUSTAIN..].iter().all(|r| r.eval_reward >= DESIGN_REACHED)
    };
    let reward_hits = count(bundle, c, sustained);
    let tau_hits = count(bundle, c, |rows| {
        sustained(rows) && at_horizon(rows, 300_000).and_then(greedy_payment).is_some_and(|t| t >= 4.0)
    });
    let drops = |rows: &[&EvalRow]| {
        let Some(first) = rows.iter().position(|r| r.eval_reward >= DESIGN_REACHED) else { return 0 };
        let mut below = false;
        let mut n = 0;
        for r in &rows[first..] {
            if r.eval_reward < DESIGN_DROP && !below {
                n += 1;
            }
            below = r.eval_reward < DESIGN_DROP;
        }
        n
    };
    let oscillating = count(bundle, p, |rows| drops(rows) >= 3);
    let losses: Vec<f64> = seeds(bundle)
        .iter()
        .filter_map(|&s| at_horizon(&bundle.run_rows(c, s), 100_000).map(|r| r.value_loss))
        .collect();
    let mean_loss = losses.iter().sum::<f64>() / losses.len().max(1) as f64;
    let majority = n / 2 + 1;
    let passed = has_mode(bundle, c)
        && has_mode(bundle, p)
        && tau_hits >= need
        && oscillating >= majority
        && !losses.is_empty()
        && mean_loss < 0.2;
    Verdict::new(
        4,
        "matrix design: centralized sustains reward 1 with tau >= 4, plain oscillates, critic loss < 0.2",
        passed,
        format!(
            "centralized {reward_hits}/{n} sustain >= {DESIGN_REACHED}, {tau_hits}/{n} also greedy tau >= 4 (need {need}); \
             plain {oscillating}/{n} with >= 3 drops below {DESIGN_DROP} (need {majority}); \
             mean centralized value loss at 100k {mean_loss:.4} (need < 0.2)"
        ),
    )
}

/// Matrix settings with three fixed leader strategies each, as (name, game, strategies).
fn convergence_cases() -> Result<Vec<(String, Game, Vec<Vec<usize>>)>> {
    let settings = [
        (SettingConfig::Maintain, vec![vec![0], vec![1], vec![2]]),
        (SettingConfig::Escape, vec![vec![0], vec![1], vec![2]]),
        (SettingConfig::MaintainRandomized { weight_levels: 6 }, vec![vec![1, 0, 0], vec![1, 1, 0], vec![2, 5, 0]]),
        (SettingConfig::parse("matrix_design")?, vec![vec![0], vec![4], vec![10]]),
    ];
    settings.into_iter().map(|(s, strategies)| Ok((s.id(), s.game()?, strategies))).collect()
}

/// Worst scaled B-CCE violation of the empirical play of `rounds` MW rounds.
fn bcce_violation(game: &Game, action: &[usize], epsilon: f64, rounds: usize, seed: u64) -> Result<(bool, f64)> {
    let mut leader = FixedAction(action.to_vec());
    let mut learner = FollowerLearner::new(game, epsilon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let history = run_dynamics(game, &mut leader, rounds, &mut learner, &mut rng)?;
    let report = verify_epsilon_bcce(game, &mut leader, &empirical_strategy(&history), 0.1)?;
    Ok((report.holds, report.worst_violation))
}

/// Empirical MW play forms a 0.1-approximate coarse correlated equilibrium after 1000
/// rounds, and the violation does not grow with the horizon.
pub fn equilibrium_convergence() -> Result<Verdict> {
    let seeds = 20u64;
    let mut failures = Vec::new();
    let mut worst_growth = f64::NEG_INFINITY;
    let mut cases = 0;
    for (name, game, strategies) in convergence_cases()? {
        let eps = SettingConfig::parse(&name).map_or(Ok(0.1), |s| s.default_mw_epsilon())?;
        for action in strategies {
            cases += 1;
            let mut held = 0;
            let (mut short, mut long) = (0.0, 0.0);
            for seed in 0..seeds {
                let (holds, _) = bcce_violation(&game, &action, eps, 1000, seed)?;
                held += holds as u64;
                short += bcce_violation(&game, &action, eps, 100, seed)?.1 / seeds as f64;
                long += bcce_violation(&game, &action, eps, 1600, seed)?.1 / seeds as f64;
            }
            worst_growth = worst_growth.max(long - short);
            if held < seeds || long > short + 0.02 {
                failures.push(format!("{name} {action:?}: {held}/{seeds} hold, mean violation {short:.4} -> {long:.4}"));
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{cases} strategies x {seeds} seeds hold at T=1000; worst growth 100->1600 {worst_growth:.4}")
    } else {
        failures.join("; ")
    };
    Ok(Verdict::new(7, "no-regret play converges to a 0.1-approximate coarse correlated equilibrium", failures.is_empty(), detail))
}

/// Two items, two messages, one equilibrium round and 100 reward sub-episodes, starting
/// from a follower that mostly reports its type.
pub fn gradient_toy() -> Result<(Game, PomdpConfig<f64>, LeaderPolicy<f64>)> {
    let game = Game::simple_allocation(2, 2)?;
    let mut learner = FollowerLearner::new(&game, 0.1)?;
    for t in 0..2 {
        learner.set_weights(0, t, (0..2).map(|a| if a == t { 20.0 } else { 1.0 }).collect())?;
    }
    let mut config = PomdpConfig::new(EpisodeSchedule::new(1, 100)?, 0.1);
    config.initial_learner = Some(learner);
    let mut policy = LeaderPolicy::tabular(&game);
    policy.params.copy_from_slice(&[0.3, -0.2, -0.4, 0.5]);
    Ok((game, config, policy))
}

/// Monte-Carlo policy gradient against finite differences of the exact objective.
pub fn gradient_correctness() -> Result<Verdict> {
    let (game, config, policy) = gradient_toy()?;
    let coords = gradient_check(&game, &config, &policy, GradientCheckConfig::default())?;
    let worst = coords.iter().map(|c| c.relative_error()).fold(0.0, f64::max);
    let detail = coords
        .iter()
        .map(|c| format!("{:.4} vs {:.4}", c.monte_carlo, c.finite_difference))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Verdict::new(
        8,
        "policy gradient matches finite differences within 2%",
        worst < 0.02,
        format!("worst relative error {worst:.4}; {detail}"),
    ))
}

/// Exact values of the deterministic oracle on the three matrix games.
pub fn oracle_consistency() -> Result<Verdict> {
    let row = |s: &crate::oracle::StackelbergSolution<f64>| match &s.leader_strategy {
        crate::oracle::Commitment::Pure(ObservationMap { actions, .. }) => actions[0][0],
        crate::oracle::Commitment::Mixed(_) => usize::MAX,
    };
    let maintain = solve_deterministic_stackelberg(&SettingConfig::Maintain.game()?, DEFAULT_SIZE_CAP)?;
    let escape = solve_deterministic_stackelberg(&SettingConfig::Escape.game()?, DEFAULT_SIZE_CAP)?;
    let design_setting = SettingConfig::parse("matrix_design")?;
    let design = solve_deterministic_stackelberg(&design_setting.game()?, DEFAULT_SIZE_CAP)?;
    let payments = match &design_setting {
        SettingConfig::MatrixDesign { payments } => payments.clone(),
        _ => unreachable!(),
    };
    let ok = maintain.leader_value == 20.0
        && row(&maintain) == 0
        && escape.leader_value == 30.0
        && row(&escape) == 2
        && design.leader_value == 1.0
        && payments[row(&design)] >= 4.0;
    let randomized = solve_randomized_stackelberg(&presets::maintain::<f64>(), MIXTURE_RESOLUTION, DEFAULT_SIZE_CAP)?;
    Ok(Verdict::new(
        9,
        "oracle reproduces the matrix-game optima",
        ok,
        format!(
            "maintain {} ({}), escape {} ({}), design {} ({}); randomized maintain {:.2}",
            maintain.leader_value,
            maintain.description,
            escape.leader_value,
            escape.description,
            design.leader_value,
            design.description,
            randomized.leader_value
        ),
    ))
}

/// Runs `config` twice under `scratch` and compares every training log byte for byte.
pub fn determinism(config: &ExperimentConfig, scratch: &Path) -> Result<Verdict> {
    let quiet = |_: &str| {};
    let a = run_experiment(config, &scratch.join("first"), &quiet)?;
    let b = run_experiment(config, &scratch.join("second"), &quiet)?;
    let mut files = vec![LOG_FILE.to_string()];
    for &m in &config.modes {
        for &s in &config.seeds {
            files.push(format!("logs/{}", run_log_name(m, s)));
        }
    }
    let mut differing = Vec::new();
    for f in &files {
        if std::fs::read(a.dir.join(f))? != std::fs::read(b.dir.join(f))? {
            differing.push(f.clone());
        }
    }
    Ok(Verdict::new(
        10,
        "re-runs produce byte-identical training logs",
        differing.is_empty() && a.all_completed() && b.all_completed(),
        if differing.is_empty() {
            format!("{} log files identical ({} rows)", files.len(), a.rows.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    ))
}

pub fn write_verdicts(dir: &Path, verdicts: &[Verdict]) -> Result<std::path::PathBuf> {
    let path = dir.join("verdict.json");
    std::fs::write(&path, serde_json::to_string_pretty(verdicts)?)?;
    Ok(path)
}
