use proptest::prelude::*;
use stackpomdp::game::{MatrixDesign, RewardRule, SpmSetting};
use stackpomdp::no_regret::{verify_epsilon_bcce, EmpiricalStrategy, FollowerLearner};
use stackpomdp::pomdp::{
    run_episode, run_equilibrium_phase, run_reward_phase, EpisodeSchedule, EpisodeTrace, Phase, PomdpConfig,
    StackelbergPomdp, StrategyActor,
};
use stackpomdp::{Action, FixedAction, Game, LeaderStrategy, Observation};

fn config(t: usize, r: usize, eps: f64) -> PomdpConfig<f64> {
    PomdpConfig::new(EpisodeSchedule::new(t, r).unwrap(), eps)
}

fn decode(o: &Observation) -> Action {
    vec![o.0[0] as usize]
}

#[test]
fn allocation_round_issues_three_queries() {
    let g = Game::simple_allocation(3, 3).unwrap();
    let (trace, _) =
        run_episode(&g, &mut StrategyActor(decode), &config(1, 1, 0.1), 0, false).unwrap();
    assert_eq!(trace.len(), 4);
    assert!(trace.steps[..3].iter().all(|s| s.phase == Phase::Equilibrium));
    let probes: Vec<u16> = trace.steps[..3].iter().map(|s| s.observation.0[0]).collect();
    assert_eq!(probes, vec![0, 1, 2]);
    assert_eq!(trace.steps[3].phase, Phase::Reward);
}

fn mu_spm() -> Game {
    Game::mu_spm(SpmSetting::agrawal(0.2).unwrap()).unwrap()
}

/// Visits the lowest unvisited agent at price 1.0.
fn visit_in_order(o: &Observation) -> Action {
    let agent = if o.0[2] == 0 { 0 } else { 1 };
    vec![agent, 10]
}

#[test]
fn spm_round_issues_four_rollouts() {
    let g = mu_spm();
    let mut env = StackelbergPomdp::new(&g, &config(2, 1, 0.1), 1).unwrap();
    let mut rollouts = 0;
    while env.state().round == 0 {
        let a = visit_in_order(&env.observe());
        if env.step(&a).unwrap().subepisode_done {
            rollouts += 1;
        }
    }
    assert_eq!(rollouts, 4);
}

#[test]
fn truthful_decoding_teaches_distinct_messages() {
    let g = Game::simple_allocation(3, 3).unwrap();
    let (_, learner) =
        run_episode(&g, &mut StrategyActor(decode), &config(1000, 1, 0.1), 2, false).unwrap();
    for t in 0..3 {
        assert!(learner.probability(0, t, t) > 0.95, "type {t}");
    }
}

fn design() -> Game {
    MatrixDesign::new(
        MatrixDesign::standard_base(),
        (0..=10).map(f64::from).collect(),
        RewardRule::ActionsDiffer,
    )
    .unwrap()
    .into_game()
    .unwrap()
}

#[test]
fn dominant_play_earns_reward_every_subepisode() {
    let g = design();
    let mut cfg = config(1, 50, 0.1);
    let mut l = FollowerLearner::new(&g, 0.1).unwrap();
    l.set_weights(0, 0, vec![1e15, 1.0]).unwrap();
    l.set_weights(1, 0, vec![1.0, 1e15]).unwrap();
    cfg.initial_learner = Some(l);
    let (trace, _) = run_episode(&g, &mut StrategyActor(FixedAction(vec![4])), &cfg, 3, false).unwrap();
    let rewards = trace.reward_subepisode_rewards();
    assert_eq!(rewards.len(), 50);
    assert!(rewards.iter().all(|&r| r == 1.0));
}

#[test]
fn single_message_allocation_averages_a_third() {
    let g = Game::simple_allocation(3, 1).unwrap();
    let (trace, _) =
        run_episode(&g, &mut StrategyActor(FixedAction(vec![1])), &config(1, 4000, 0.1), 4, false)
            .unwrap();
    let mean = trace.total_reward() / 4000.0;
    assert!((mean - 1.0 / 3.0).abs() < 0.05, "{mean}");
}

#[test]
fn zero_payoff_game_earns_nothing() {
    let g = Game::normal_form(vec![vec![(0.0, 0.0); 3]; 3], false).unwrap();
    let (trace, _) =
        run_episode(&g, &mut StrategyActor(FixedAction(vec![2])), &config(10, 10, 0.1), 5, false)
            .unwrap();
    assert_eq!(trace.total_reward(), 0.0);
}

#[test]
fn spm_steps_through_the_env() {
    let g = mu_spm();
    let mut env = StackelbergPomdp::new(&g, &config(1, 1, 0.1), 0).unwrap();
    let types = env.state().types.clone();
    let out = env.step(&[0, 10]).unwrap();
    if types[0] == 1 {
        assert!(out.subepisode_done);
    } else {
        assert!(!out.subepisode_done);
        assert_eq!(out.observation.0[2..4], [1, 0]);
        assert!(env.step(&[0, 10]).is_err(), "agent 1 already visited");
    }
}

#[test]
fn shortest_episode() {
    let g = Game::simple_allocation(1, 1).unwrap();
    let (trace, _) =
        run_episode(&g, &mut StrategyActor(FixedAction(vec![0])), &config(1, 1, 0.1), 6, false)
            .unwrap();
    assert_eq!(trace.len(), 2);
    assert_eq!(trace.total_reward(), 1.0);
}

#[test]
fn episodes_are_deterministic() {
    let g = mu_spm();
    let run = |seed| {
        let (t, _) = run_episode(&g, &mut StrategyActor(visit_in_order), &config(20, 5, 0.1), seed, true)
            .unwrap();
        t
    };
    assert_eq!(run(7), run(7));
    assert_ne!(run(7), run(8));
}

#[test]
fn trace_export_rows() {
    let g = Game::simple_allocation(2, 2).unwrap();
    let (trace, _) =
        run_episode(&g, &mut StrategyActor(decode), &config(1, 1, 0.1), 0, false).unwrap();
    let mut buf = Vec::new();
    trace.write_tsv(&mut buf, true).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "episode\tphase\tsubepisode\tobservation\taction\treward");
    assert!(lines[1].starts_with("0\tequilibrium\t0\t0\t0\t"));
    assert!(lines[3].starts_with("0\treward\t0\t"));
}

#[test]
fn hidden_features_have_declared_length() {
    for g in [mu_spm(), design(), Game::simple_allocation(3, 2).unwrap()] {
        let (trace, _) = run_episode(
            &g,
            &mut StrategyActor(|o: &Observation| g.valid_actions(o)[0].clone()),
            &config(3, 2, 0.1),
            0,
            true,
        )
        .unwrap();
        let env = StackelbergPomdp::new(&g, &config(3, 2, 0.1), 0).unwrap();
        assert!(trace.steps.iter().all(|s| s.hidden.len() == env.hidden_feature_len()));
    }
}

fn random_spm_actor(seed: u64) -> impl FnMut(&Observation) -> Action {
    let g = mu_spm();
    let mut state = seed;
    move |o: &Observation| {
        let valid = g.valid_actions(o);
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        valid[(state >> 33) as usize % valid.len()].clone()
    }
}

fn check_sparsity(trace: &EpisodeTrace<f64>) {
    let n = trace.steps.len();
    for (k, s) in trace.steps.iter().enumerate() {
        if s.reward != 0.0 {
            assert_eq!(s.phase, Phase::Reward);
            let next_is_new = k + 1 == n || trace.steps[k + 1].subepisode != s.subepisode;
            assert!(next_is_new, "reward before the terminal step");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rewards_only_at_reward_terminals(seed in 0u64..1000) {
        let g = mu_spm();
        let (trace, _) = run_episode(&g, &mut StrategyActor(random_spm_actor(seed)), &config(5, 5, 0.3), seed, false).unwrap();
        check_sparsity(&trace);
        let d = design();
        let (trace, _) = run_episode(&d, &mut StrategyActor(FixedAction(vec![(seed % 11) as usize])), &config(5, 5, 0.3), seed, false).unwrap();
        check_sparsity(&trace);
    }

    #[test]
    fn spm_conservation_and_public_observations(seed in 0u64..1000) {
        let g = mu_spm();
        let mut env = StackelbergPomdp::new(&g, &config(4, 4, 0.2), seed).unwrap();
        let mut actor = random_spm_actor(seed);
        while !env.state().done {
            let s = env.state();
            let allocated = s.sub.owner.iter().filter(|o| o.is_some()).count();
            let residual = s.sub.owner.iter().filter(|o| o.is_none()).count();
            prop_assert_eq!(allocated + residual, 1);
            let obs = env.observe();
            let mut public: Vec<u16> = s.sub.actions.iter().map(|&m| m as u16).collect();
            public.extend(s.sub.visited.iter().map(|&v| v as u16));
            public.extend(s.sub.owner.iter().map(|o| o.map_or(0, |i| i as u16 + 1)));
            prop_assert_eq!(&obs.0, &public);
            let a = actor(&obs);
            let before = env.state().sub.visited.clone();
            let out = env.step(&a).unwrap();
            if !out.subepisode_done {
                let after = &env.state().sub.visited;
                prop_assert!(!before[a[0]] && after[a[0]]);
            }
        }
    }
}

/// Empirical play of the equilibrium phase under a fixed leader strategy.
fn phase_empirical(g: &Game, leader: &[usize], t: usize, seed: u64) -> EmpiricalStrategy {
    let mut env = StackelbergPomdp::new(g, &config(t, 1, 0.5), seed).unwrap();
    let mut pairs = Vec::new();
    let mut last_round = usize::MAX;
    let mut actor = FixedAction(leader.to_vec());
    while env.state().phase == Phase::Equilibrium {
        let s = env.state();
        if s.round != last_round {
            pairs.push((s.types.clone(), s.messages.clone()));
            last_round = s.round;
        }
        let a = actor.act(&env.observe());
        env.step(&a).unwrap();
    }
    EmpiricalStrategy::from_pairs(pairs)
}

#[test]
fn bcce_violation_shrinks_with_horizon() {
    let g = design();
    for leader in [vec![0], vec![4]] {
        let mut avg = [0.0; 3];
        for (k, t) in [100, 400, 1600].into_iter().enumerate() {
            for seed in 0..20 {
                let e = phase_empirical(&g, &leader, t, seed);
                let rep = verify_epsilon_bcce(&g, &mut FixedAction(leader.clone()), &e, 0.1).unwrap();
                avg[k] += rep.worst_violation / 20.0;
            }
        }
        assert!(avg[1] <= avg[0] + 0.02 && avg[2] <= avg[1] + 0.02, "{leader:?}: {avg:?}");
    }
}

#[test]
fn phases_run_separately() {
    let g = Game::simple_allocation(2, 2).unwrap();
    let mut env = StackelbergPomdp::new(&g, &config(3, 2, 0.1), 0).unwrap();
    let mut actor = StrategyActor(decode);
    let mut trace = EpisodeTrace::default();
    assert!(run_reward_phase(&mut env, &mut actor, &mut trace, false).is_err());
    run_equilibrium_phase(&mut env, &mut actor, &mut trace, false).unwrap();
    assert_eq!(trace.len(), 6);
    assert_eq!(env.state().phase, Phase::Reward);
    let frozen = env.state().learner.clone();
    run_reward_phase(&mut env, &mut actor, &mut trace, false).unwrap();
    assert_eq!(trace.len(), 8);
    assert_eq!(env.state().learner, frozen);
    assert!(env.state().done);
}
