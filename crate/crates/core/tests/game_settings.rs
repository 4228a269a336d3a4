use proptest::prelude::*;
use stackpomdp::game::{BayesianGame, Demand, MatrixDesign, NormalForm, RewardRule, SpmSetting};
use stackpomdp::game::reward_from_welfare;
use stackpomdp::{FixedAction, Game};

fn maintain() -> Vec<Vec<(f64, f64)>> {
    vec![
        vec![(20.0, 15.0), (0.0, 0.0), (0.0, 0.0)],
        vec![(30.0, 0.0), (10.0, 5.0), (0.0, 0.0)],
        vec![(0.0, 0.0), (0.0, 0.0), (5.0, 10.0)],
    ]
}

fn payoffs(game: &Game, action: Vec<usize>, types: &[usize], actions: &[usize]) -> Vec<f64> {
    game.play(&mut FixedAction(action), types, actions).unwrap()
}

#[test]
fn maintain_row_a_col_a() {
    let g = Game::normal_form(maintain(), false).unwrap();
    assert_eq!(payoffs(&g, vec![0], &[0], &[0]), vec![20.0, 15.0]);
    assert_eq!(g.leader_normalizer(), 30.0);
}

#[test]
fn maintain_quarter_mixture_pays_27_5() {
    let nf = NormalForm::new(maintain(), Some(4)).unwrap();
    let x = nf.mixture(&[1, 3, 0]).unwrap();
    assert_eq!(x, vec![0.25, 0.75, 0.0]);
    let p = nf.mixed_payoffs(&x, 0);
    assert!((p[0] - 27.5).abs() < 1e-12);
    let g = nf.into_game().unwrap();
    assert!((payoffs(&g, vec![1, 3, 0], &[0], &[0])[0] - 27.5).abs() < 1e-12);
}

#[test]
fn single_cell_game() {
    let g = Game::normal_form(vec![vec![(4.5, 4.5)]], false).unwrap();
    assert_eq!(payoffs(&g, vec![0], &[0], &[0]), vec![4.5, 4.5]);
}

#[test]
fn normal_form_rejects_bad_matrices() {
    assert!(Game::normal_form(vec![], false).is_err());
    assert!(Game::normal_form(vec![vec![(f64::NAN, 0.0)]], false).is_err());
    assert!(Game::normal_form(vec![vec![(0.0, 0.0), (1.0, 1.0)]], false).is_err());
}

#[test]
fn all_zero_weights_are_rejected() {
    let g = Game::normal_form(maintain(), true).unwrap();
    let mut s = FixedAction(vec![0, 0, 0]);
    assert!(g.play(&mut s, &[0], &[0]).is_err());
    assert!(g.validate(&Default::default(), &[0, 0, 0]).is_err());
    assert!(g.validate(&Default::default(), &[0, 0, 1]).is_ok());
    assert!(!g.valid_actions(&Default::default()).contains(&vec![0, 0, 0]));
}

fn design() -> Game {
    let payments = (0..=10).map(f64::from).collect();
    MatrixDesign::new(MatrixDesign::standard_base(), payments, RewardRule::ActionsDiffer)
        .unwrap()
        .into_game()
        .unwrap()
}

#[test]
fn matrix_design_examples() {
    let g = design();
    assert_eq!(payoffs(&g, vec![4], &[0, 0], &[0, 1]), vec![1.0, 6.0, 4.0]);
    assert_eq!(payoffs(&g, vec![0], &[0, 0], &[0, 0]), vec![0.0, 3.0, 3.0]);
    assert_eq!(payoffs(&g, vec![10], &[0, 0], &[1, 0])[0], 1.0);
    assert_eq!(payoffs(&g, vec![4], &[0, 0], &[0, 0]), vec![0.0, 7.0, 3.0]);
    assert_eq!(payoffs(&g, vec![4], &[0, 0], &[1, 1]), vec![0.0, 2.0, 6.0]);
    assert!(MatrixDesign::new(MatrixDesign::standard_base(), vec![-1.0], RewardRule::ActionsDiffer)
        .is_err());
}

#[test]
fn allocation_examples() {
    let g = Game::simple_allocation(3, 3).unwrap();
    assert_eq!(payoffs(&g, vec![1], &[1], &[0]), vec![1.0, 1.0]);
    assert_eq!(payoffs(&g, vec![2], &[1], &[0]), vec![0.0, 0.0]);
    let g1 = Game::simple_allocation(3, 1).unwrap();
    let expected: f64 = (0..3)
        .map(|item| {
            g1.type_distribution()
                .iter()
                .map(|(t, p)| p * payoffs(&g1, vec![item], t, &[0])[0])
                .sum::<f64>()
        })
        .sum::<f64>()
        / 3.0;
    assert!((expected - 1.0 / 3.0).abs() < 1e-12);
}

fn agrawal() -> SpmSetting<f64> {
    SpmSetting::agrawal(0.2).unwrap()
}

#[test]
fn agrawal_setting_shape() {
    let s = agrawal();
    assert_eq!((s.n_agents(), s.n_items(), s.messages()), (2, 1, 2));
    assert_eq!(s.value(0, 1, 0), 2.5);
    let g = Game::mu_spm(s).unwrap();
    let d = g.type_distribution();
    let p = |t: &[usize]| d.prob(d.index_of(t).unwrap());
    assert!((p(&[0, 0]) - 0.4).abs() < 1e-12);
    assert!((p(&[1, 1]) - 0.1).abs() < 1e-12);
    assert_eq!(agrawal().price_index(1.0), Some(10));
}

#[test]
fn buyer_decisions() {
    let s = agrawal();
    assert_eq!(s.buyer_choice(0, 1, &[Some(1.0)]), vec![0]);
    assert!(s.buyer_choice(0, 0, &[Some(1.0)]).is_empty());
    assert!(s.buyer_choice(1, 0, &[Some(0.0)]).is_empty());
    assert!(s.buyer_choice(0, 0, &[Some(0.5)]).is_empty());
}

#[test]
fn spm_visit_high_agent_buys() {
    let g = Game::mu_spm(agrawal()).unwrap();
    let mut sub = g.start(&[1, 0], &[0, 0]);
    assert!(g.apply(&mut sub, &[0, 10]).unwrap());
    let p = sub.payoffs.unwrap();
    assert!((p[1] - 1.5).abs() < 1e-12);
    assert!(p[0].abs() < 1e-12);
}

#[test]
fn spm_low_agent_declines_then_other_agent() {
    let g = Game::mu_spm(agrawal()).unwrap();
    let mut sub = g.start(&[0, 1], &[0, 0]);
    assert!(!g.apply(&mut sub, &[0, 10]).unwrap());
    assert_eq!(sub.owner, vec![None]);
    assert!(g.apply(&mut sub, &[0, 0]).is_err(), "revisiting agent 1");
    let mut sub = g.start(&[0, 1], &[0, 0]);
    g.apply(&mut sub, &[0, 10]).unwrap();
    assert!(g.apply(&mut sub, &[1, 0]).unwrap());
    let p = sub.payoffs.unwrap();
    assert_eq!(p, vec![0.0, 0.0, 1.0]);
}

#[test]
fn spm_zero_value_agent_declines_price_zero() {
    let g = Game::mu_spm(agrawal()).unwrap();
    let mut sub = g.start(&[0, 0], &[0, 0]);
    assert!(!g.apply(&mut sub, &[1, 0]).unwrap());
    assert!(g.apply(&mut sub, &[0, 0]).unwrap());
    let p = sub.payoffs.unwrap();
    assert!((p[1] - 0.5).abs() < 1e-12);
    assert_eq!(p[0], 0.0);
}

#[test]
fn welfare_reward_sign() {
    assert_eq!(reward_from_welfare(1.1, 1.1), 0.0);
    assert!((reward_from_welfare(0.5f64, 1.1) + 0.6).abs() < 1e-12);
}

#[test]
fn first_best_of_agrawal() {
    let s = agrawal();
    let g = Game::mu_spm(s.clone()).unwrap();
    let fb: f64 = g.type_distribution().iter().map(|(t, p)| p * s.optimal_welfare(t)).sum();
    let by_hand = 0.4 * 0.5 + 0.4 * 1.0 + 0.1 * 2.5 + 0.1 * 2.5;
    assert!((fb - by_hand).abs() < 1e-12);
    assert!((fb - 1.1).abs() < 1e-12);
}

#[test]
fn spm_validation() {
    let one = |v: f64, p: f64| (vec![v], p);
    assert!(SpmSetting::new(1, SpmSetting::default_price_grid(), vec![vec![one(1.0, 1.0)]], Demand::UnitDemand).is_err());
    assert!(SpmSetting::new(2, vec![0.0, 0.0], vec![vec![one(1.0, 1.0)]], Demand::UnitDemand).is_err());
    assert!(SpmSetting::new(
        2,
        SpmSetting::default_price_grid(),
        vec![vec![one(1.0, 1.0)], vec![(vec![1.0, 2.0], 1.0)]],
        Demand::UnitDemand
    )
    .is_err());
}

#[test]
fn unit_demand_two_items() {
    let s = SpmSetting::<f64>::new(
        2,
        SpmSetting::default_price_grid(),
        vec![vec![(vec![1.0, 2.0], 1.0)], vec![(vec![2.0, 0.5], 1.0)]],
        Demand::UnitDemand,
    )
    .unwrap();
    assert_eq!(s.buyer_choice(0, 0, &[Some(0.0), Some(0.5)]), vec![1]);
    assert!((s.optimal_welfare(&[0, 0]) - 4.0).abs() < 1e-12);
    let g = Game::mu_spm(s).unwrap();
    let mut sub = g.start(&[0, 0], &[0, 0]);
    assert!(!g.apply(&mut sub, &[0, 0, 5]).unwrap());
    assert_eq!(sub.owner, vec![None, Some(0)]);
    assert!(g.apply(&mut sub.clone(), &[1, 0, 3]).is_err(), "priced an allocated item");
    assert!(g.apply(&mut sub, &[1, 10, 0]).unwrap());
    assert_eq!(sub.payoffs.unwrap(), vec![0.0, 1.5, 1.0]);
}

proptest! {
    #[test]
    fn weight_scaling_is_invariant(w in proptest::collection::vec(0usize..=3, 3), c in 0usize..3) {
        prop_assume!(w.iter().any(|&x| x > 0));
        let nf = NormalForm::new(maintain(), Some(6)).unwrap();
        let doubled: Vec<usize> = w.iter().map(|x| 2 * x).collect();
        let a = nf.mixed_payoffs(&nf.mixture(&w).unwrap(), c);
        let b = nf.mixed_payoffs(&nf.mixture(&doubled).unwrap(), c);
        prop_assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }

    #[test]
    fn design_reward_iff_actions_differ(tau in 0usize..=10, a in 0usize..2, b in 0usize..2) {
        let g = design();
        let p = payoffs(&g, vec![tau], &[0, 0], &[a, b]);
        prop_assert_eq!(p[0], if a != b { 1.0 } else { 0.0 });
    }

    #[test]
    fn allocation_follower_payoff_sums_to_one(k in 1usize..6, t in 0usize..6) {
        prop_assume!(t < k);
        let g = Game::simple_allocation(k, 2).unwrap();
        let total: f64 = (0..k).map(|item| payoffs(&g, vec![item], &[t], &[0])[1]).sum();
        prop_assert_eq!(total, 1.0);
    }

    #[test]
    fn declining_everything_is_worth_zero(t1 in 0usize..2, t2 in 0usize..2) {
        let g: BayesianGame<f64> = Game::mu_spm(agrawal()).unwrap();
        let mut sub = g.start(&[t1, t2], &[0, 0]);
        g.apply(&mut sub, &[0, 30]).unwrap();
        g.apply(&mut sub, &[1, 30]).unwrap();
        let p = sub.payoffs.unwrap();
        prop_assert_eq!(p[1], 0.0);
        prop_assert_eq!(p[2], 0.0);
    }

    #[test]
    fn accepted_bundle_utility(t1 in 0usize..2, price in 0usize..31) {
        let s = agrawal();
        let g = Game::mu_spm(s.clone()).unwrap();
        let mut sub = g.start(&[t1, 0], &[0, 0]);
        g.apply(&mut sub, &[0, price]).unwrap();
        if sub.owner[0] == Some(0) {
            let p = sub.payoffs.clone().unwrap();
            prop_assert!((p[1] - (s.value(0, t1, 0) - s.price_grid()[price])).abs() < 1e-12);
        }
    }
}
