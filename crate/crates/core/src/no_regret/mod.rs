//! Multiplicative-weights no-regret dynamics and equilibrium checks.

mod dynamics;
mod learner;

pub use dynamics::{
    counterfactual_payoffs, empirical_strategy, external_regret, run_dynamics, verify_epsilon_bcce,
    BcceReport, Deviation, EmpiricalStrategy, JointStrategy, PlayHistory, PlayRecord, PointMass,
    PureStrategy, TypeTally,
};
pub use learner::FollowerLearner;
