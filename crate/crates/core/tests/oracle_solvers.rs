use stackpomdp::game::{presets, MatrixDesign, RewardRule, SpmSetting};
use stackpomdp::no_regret::FollowerLearner;
use stackpomdp::oracle::{
    enumerate_maps, exact_objective, gradient_check, solve_deterministic_stackelberg,
    solve_randomized_stackelberg, solve_spm_exhaustive, Commitment, GradientCheckConfig, SpmTree,
    DEFAULT_BRANCH_CAP, DEFAULT_SIZE_CAP, DEFAULT_TREE_CAP,
};
use stackpomdp::policy::LeaderPolicy;
use stackpomdp::pomdp::{EpisodeSchedule, PomdpConfig};
use stackpomdp::Game;

fn pure_row(c: &Commitment<f64>) -> usize {
    match c {
        Commitment::Pure(m) => m.actions[0][0],
        Commitment::Mixed(_) => panic!("expected a pure commitment"),
    }
}

fn design_game() -> Game {
    let payments = (0..=10).map(f64::from).collect();
    Game::matrix_design(MatrixDesign::standard_base(), payments, RewardRule::ActionsDiffer).unwrap()
}

#[test]
fn maintain_deterministic_optimum_is_row_a() {
    let g = Game::normal_form(presets::maintain(), false).unwrap();
    let s = solve_deterministic_stackelberg(&g, DEFAULT_SIZE_CAP).unwrap();
    assert_eq!(s.leader_value, 20.0);
    assert_eq!(pure_row(&s.leader_strategy), 0);
    assert_eq!(s.follower_response, vec![vec![0]]);
}

#[test]
fn escape_optimum_is_row_c() {
    let g = Game::normal_form(presets::escape(), false).unwrap();
    let s = solve_deterministic_stackelberg(&g, DEFAULT_SIZE_CAP).unwrap();
    assert_eq!(s.leader_value, 30.0);
    assert_eq!(pure_row(&s.leader_strategy), 2);
    assert_eq!(s.follower_response, vec![vec![2]]);
}

#[test]
fn matrix_design_needs_payment_at_least_four() {
    let g = design_game();
    let s = solve_deterministic_stackelberg(&g, DEFAULT_SIZE_CAP).unwrap();
    assert_eq!(s.leader_value, 1.0);
    let tau = pure_row(&s.leader_strategy);
    assert!(tau >= 4, "optimal payment index {tau}");
    // Every payment at least 4 is optimal; below 4 no dominant profile reaches reward 1.
    for tau in 0..=10 {
        let single = Game::matrix_design(
            MatrixDesign::standard_base(),
            vec![tau as f64],
            RewardRule::ActionsDiffer,
        )
        .unwrap();
        let v = solve_deterministic_stackelberg(&single, DEFAULT_SIZE_CAP).map(|s| s.leader_value);
        if tau >= 4 {
            assert_eq!(v.unwrap(), 1.0, "tau {tau}");
        } else {
            assert!(v.map_or(true, |v| v < 1.0), "tau {tau}");
        }
    }
}

#[test]
fn allocation_value_is_messages_over_items() {
    for m in 1..=3 {
        let g = Game::simple_allocation(3, m).unwrap();
        let s = solve_deterministic_stackelberg(&g, DEFAULT_SIZE_CAP).unwrap();
        assert!((s.leader_value - m as f64 / 3.0).abs() < 1e-12, "m={m}: {}", s.leader_value);
    }
}

#[test]
fn enumerate_maps_counts_and_cap() {
    let g = Game::simple_allocation(3, 2).unwrap();
    assert_eq!(enumerate_maps(&g, 100).unwrap().len(), 9);
    assert!(enumerate_maps(&g, 8).is_err());
    let spm = Game::mu_spm(SpmSetting::agrawal(0.2).unwrap()).unwrap();
    assert!(enumerate_maps(&spm, 100).is_err());
}

#[test]
fn randomized_maintain_on_hundredth_grid() {
    let s = solve_randomized_stackelberg(&presets::maintain::<f64>(), 0.01, DEFAULT_SIZE_CAP).unwrap();
    assert!((s.leader_value - 27.4).abs() < 1e-9, "{}", s.leader_value);
    let Commitment::Mixed(x) = &s.leader_strategy else { panic!("mixture expected") };
    assert!((x[0] - 0.26).abs() < 1e-12 && (x[1] - 0.74).abs() < 1e-12 && x[2] == 0.0, "{x:?}");
    assert_eq!(s.follower_response, vec![vec![0]]);
    // A finer lattice approaches the 27.5 supremum from below.
    let fine = solve_randomized_stackelberg(&presets::maintain::<f64>(), 0.001, 10_000_000).unwrap();
    assert!(fine.leader_value >= 27.49 - 1e-9 && fine.leader_value < 27.5, "{}", fine.leader_value);
}

#[test]
fn randomized_single_row_and_escape() {
    let one = vec![vec![(4.0, 1.0), (7.0, 2.0)]];
    let s = solve_randomized_stackelberg(&one, 0.1, DEFAULT_SIZE_CAP).unwrap();
    assert_eq!(s.leader_value, 7.0);
    assert_eq!(s.enumerated, 1);
    for r in [0.5, 0.1, 0.01] {
        let s = solve_randomized_stackelberg(&presets::escape::<f64>(), r, DEFAULT_SIZE_CAP).unwrap();
        assert_eq!(s.leader_value, 30.0);
    }
}

#[test]
fn randomized_never_below_deterministic() {
    for m in [presets::maintain::<f64>(), presets::escape::<f64>()] {
        let det = solve_deterministic_stackelberg(&Game::normal_form(m.clone(), false).unwrap(), DEFAULT_SIZE_CAP)
            .unwrap();
        for r in [0.5, 0.25, 0.1, 0.01] {
            let rnd = solve_randomized_stackelberg(&m, r, DEFAULT_SIZE_CAP).unwrap();
            assert!(rnd.leader_value >= det.leader_value - 1e-9);
        }
    }
}

#[test]
fn randomized_rejects_bad_resolution() {
    let m = presets::maintain::<f64>();
    assert!(solve_randomized_stackelberg(&m, 0.0, DEFAULT_SIZE_CAP).is_err());
    assert!(solve_randomized_stackelberg(&m, 0.3, DEFAULT_SIZE_CAP).is_err());
    assert!(solve_randomized_stackelberg(&m, 0.0001, 1000).is_err());
}

#[test]
fn spm_without_messages_visits_agent_two_first() {
    let setting = SpmSetting::<f64>::agrawal(0.2).unwrap();
    let s = solve_spm_exhaustive(&setting, false, DEFAULT_TREE_CAP).unwrap();
    // Types (0.5,0) (0.5,1) (2.5,0) (2.5,1) with probabilities 0.4 0.4 0.1 0.1.
    assert!((s.first_best - (0.4 * 0.5 + 0.4 * 1.0 + 0.1 * 2.5 + 0.1 * 2.5)).abs() < 1e-12);
    let (agent, prices) = s.branches[0].1.root().unwrap();
    assert_eq!(agent, 1);
    assert_eq!(prices, &[Some(0.0)]);
    // Agent 2 takes the item whenever it values it; otherwise agent 1 buys.
    assert!((s.expected_welfare - 0.95).abs() < 1e-12, "{}", s.expected_welfare);
    assert!((s.reward() + 0.15).abs() < 1e-12);
    assert!(s.messaging.is_none());
}

#[test]
fn spm_with_messages_reaches_first_best() {
    let setting = SpmSetting::<f64>::agrawal(0.2).unwrap();
    let with = solve_spm_exhaustive(&setting, true, DEFAULT_TREE_CAP).unwrap();
    let without = solve_spm_exhaustive(&setting, false, DEFAULT_TREE_CAP).unwrap();
    assert!((with.expected_welfare - with.first_best).abs() < 1e-12, "{}", with.describe());
    assert!(with.expected_welfare >= without.expected_welfare - 1e-12);
    assert_eq!(with.messaging.as_ref().unwrap().len(), 2);
    assert_eq!(with.branches.len(), 4);
}

#[test]
fn spm_tree_reports_stop_for_single_item_sold() {
    let setting = SpmSetting::<f64>::agrawal(0.2).unwrap();
    let s = solve_spm_exhaustive(&setting, false, DEFAULT_TREE_CAP).unwrap();
    let SpmTree::Offer { next, .. } = &s.branches[0].1 else { panic!("expected an offer") };
    let bought = next.iter().find(|(b, _)| !b.is_empty()).unwrap();
    assert_eq!(bought.1, SpmTree::Stop);
    assert!(s.describe().starts_with("offer agent 2 prices [0.0]"), "{}", s.describe());
}

#[test]
fn spm_with_messages_dominates_without_on_random_settings() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    for _ in 0..6 {
        let grid: Vec<f64> = (0..=6).map(|i| i as f64 * 0.25).collect();
        let mut agent = || {
            let p: f64 = rng.gen_range(0.1..0.9);
            vec![
                (vec![(rng.gen_range(0..6) as f64) * 0.25], p),
                (vec![(rng.gen_range(0..6) as f64) * 0.25], 1.0 - p),
            ]
        };
        let valuations = vec![agent(), agent()];
        let setting = SpmSetting::new(2, grid, valuations, stackpomdp::game::Demand::UnitDemand).unwrap();
        let with = solve_spm_exhaustive(&setting, true, DEFAULT_TREE_CAP).unwrap();
        let without = solve_spm_exhaustive(&setting, false, DEFAULT_TREE_CAP).unwrap();
        assert!(with.expected_welfare >= without.expected_welfare - 1e-12);
        assert!(with.expected_welfare <= with.first_best + 1e-12);
    }
}

#[test]
fn spm_tree_cap_is_enforced() {
    let setting = SpmSetting::<f64>::agrawal(0.2).unwrap();
    assert!(solve_spm_exhaustive(&setting, true, 50).is_err());
}

fn bayes(t: usize, r: usize) -> PomdpConfig<f64> {
    PomdpConfig::new(EpisodeSchedule::new(t, r).unwrap(), 0.1)
}

#[test]
fn objective_of_zero_game_is_zero() {
    let g = Game::normal_form(vec![vec![(0.0, 0.0); 2]; 2], false).unwrap();
    let mut policy = LeaderPolicy::tabular(&g);
    policy.params[0] = 1.3;
    // Constant follower payoffs need a declared range; the game supplies one.
    let j = exact_objective(&g, &bayes(3, 4), &policy, DEFAULT_BRANCH_CAP).unwrap();
    assert_eq!(j, 0.0);
}

#[test]
fn objective_of_forced_allocation_is_one_per_reward_round() {
    let g = Game::simple_allocation(1, 1).unwrap();
    let policy = LeaderPolicy::tabular(&g);
    let j = exact_objective(&g, &bayes(4, 5), &policy, DEFAULT_BRANCH_CAP).unwrap();
    assert!((j - 5.0).abs() < 1e-12, "{j}");
}

fn truthful_policy(g: &Game, logit: f64) -> LeaderPolicy<f64> {
    let mut policy = LeaderPolicy::tabular(g);
    let layout = g.observation_layout();
    for k in 0..layout.classes() {
        let obs = layout.decode(k);
        let idx = policy.tabular_index(&obs, 0, obs.0[0] as usize).unwrap();
        policy.params[idx] = logit;
    }
    policy
}

fn truthful_learner(g: &Game, weight: f64) -> FollowerLearner<f64> {
    let mut learner = FollowerLearner::new(g, 0.1).unwrap();
    let (types, actions) = (g.type_counts()[0], g.action_counts()[0]);
    for t in 0..types {
        let row = (0..actions).map(|a| if a == t { weight } else { 1.0 }).collect();
        learner.set_weights(0, t, row).unwrap();
    }
    learner
}

#[test]
fn objective_of_truthful_allocation_with_frozen_followers_is_one() {
    let g = Game::simple_allocation(3, 3).unwrap();
    let mut cfg = bayes(1, 1);
    cfg.initial_learner = Some(truthful_learner(&g, 1e15));
    let j = exact_objective(&g, &cfg, &truthful_policy(&g, 40.0), DEFAULT_BRANCH_CAP).unwrap();
    assert!((j - 1.0).abs() < 1e-9, "{j}");
}

#[test]
fn objective_matches_sampled_episodes() {
    use stackpomdp::policy::{ActMode, CachedActor};
    use stackpomdp::pomdp::run_episode;
    let g = Game::simple_allocation(2, 2).unwrap();
    let cfg = bayes(3, 2);
    let mut policy = LeaderPolicy::tabular(&g);
    for (k, v) in [0.4, -0.1, 0.2, 0.6].into_iter().enumerate() {
        policy.params[k] = v;
    }
    let j = exact_objective(&g, &cfg, &policy, DEFAULT_BRANCH_CAP).unwrap();
    let n = 20_000;
    let returns: Vec<f64> = (0..n)
        .map(|s| {
            let mut actor = CachedActor::new(&policy, &g, ActMode::Sample, s + 77);
            run_episode(&g, &mut actor, &cfg, s, false).unwrap().0.total_reward()
        })
        .collect();
    let mean = returns.iter().sum::<f64>() / n as f64;
    let se = (returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n * (n - 1)) as f64).sqrt();
    assert!((mean - j).abs() < 4.0 * se, "exact {j}, sampled {mean} +- {se}");
}

#[test]
fn objective_branch_cap_is_enforced() {
    let g = Game::simple_allocation(3, 3).unwrap();
    assert!(exact_objective(&g, &bayes(6, 1), &LeaderPolicy::tabular(&g), 27).is_err());
}

/// Tabular allocation toy: two items, two messages, one equilibrium round.
pub fn gradient_toy() -> (Game, PomdpConfig<f64>, LeaderPolicy<f64>) {
    let g = Game::simple_allocation(2, 2).unwrap();
    let mut cfg = bayes(1, 100);
    cfg.initial_learner = Some(truthful_learner(&g, 20.0));
    let mut policy = LeaderPolicy::tabular(&g);
    for (k, v) in [0.3, -0.2, -0.4, 0.5].into_iter().enumerate() {
        policy.params[k] = v;
    }
    (g, cfg, policy)
}

#[test]
fn gradient_estimate_matches_finite_differences() {
    let (g, cfg, policy) = gradient_toy();
    let coords = gradient_check(&g, &cfg, &policy, GradientCheckConfig::default()).unwrap();
    for (k, c) in coords.iter().enumerate() {
        eprintln!(
            "coordinate {k}: mc {:.5} fd {:.5} se {:.5} rel {:.4}",
            c.monte_carlo,
            c.finite_difference,
            c.standard_error,
            c.relative_error()
        );
    }
    for (k, c) in coords.iter().enumerate() {
        assert!(c.relative_error() < 0.02, "coordinate {k}: {c:?}");
    }
}
