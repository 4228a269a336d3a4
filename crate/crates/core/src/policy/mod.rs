//! Leader policies, the observation-action cache, and the actor-critic trainer.

mod cache;
pub mod checkpoint;
mod critic;
mod gradient;
mod leader;
mod net;
mod trainer;

pub use cache::{act, ActMode, CachedActor, ObservationActionCache};
pub use critic::{CriticInput, CriticNet};
pub use gradient::{
    policy_gradient_estimate, proximal_update, PolicySample, ProximalConfig, ScoreAttribution,
    UpdateStats,
};
pub use leader::{Architecture, LeaderPolicy};
pub use net::{clip_norm, Adam, Mlp};
pub use trainer::{derive_seed, evaluate, greedy_summary, EvalRow, TrainConfig, Trainer, TrainingMode};
