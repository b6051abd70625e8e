//! Hybrid actor-critic learner for the surface configuration: a
//! deterministic-policy agent picks which elements are on, a max-entropy
//! agent sets gains, energy split and phases. Networks are small MLPs with
//! hand-written backpropagation.

mod checkpoint;
pub mod ddpg;
mod mds;
pub mod nn;
pub mod sac;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use ddpg::{ddpg_targets, DdpgNets, QFunction};
pub use mds::{AgentGrads, AgentHyper, AgentOptimizers, Batch, BatchNoise, MdsAgent, UpdateStats, NETWORK_NAMES};
pub use nn::{Activation, ApproximatorParams, Architecture, Optimizer, OptimizerKind};
pub use sac::{policy_mean, policy_sample, sac_targets, PolicySample, SacNets};
pub use train::{evaluate_policy, mds_train, EpisodeRecord, EvalResult, TrainLog, TrainOptions};
pub(crate) use train::{begin_episode, check_dims, EpisodeTracker};

use thiserror::Error;

use crate::env::EnvError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("{0}")]
    Usage(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}
