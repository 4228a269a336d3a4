//! Stackelberg POMDP: learning leader strategies against no-regret followers.

pub mod error;
pub mod experiment;
pub mod game;
pub mod no_regret;
pub mod oracle;
pub mod policy;
pub mod pomdp;
pub mod scalar;

pub use error::{Error, Result};
pub use game::{Action, FixedAction, LeaderStrategy, Observation};
pub use scalar::Real;

pub type Game = game::BayesianGame<f64>;
pub type Learner = no_regret::FollowerLearner<f64>;
pub type History = no_regret::PlayHistory<f64>;
