//! Surface configuration as an episodic MDP: state encoding, hybrid action
//! decoding, the penalised energy-efficiency reward and a replay buffer.

mod action;
mod replay;
mod reward;
mod sim;
mod state;

pub use action::{decode_action, ActionDecoder, HybridAction};
pub use replay::{ReplayBuffer, Transition};
pub use reward::{compute_reward, penalised_violations, REWARD_EXEMPT};
pub use sim::{default_operating_point, ConvexStage, EnvConfig, StarRisEnv, StepInfo, TaskSpec};
pub use state::{encode_state, EnvState, FieldSpec, StateLayout, CLIP, EH_REF_W, POWER_REF_W, SINR_REF, STATE_LAYOUT_VERSION};

use thiserror::Error;

use crate::channel::ChannelError;
use crate::model::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("step called before reset")]
    NotReset,
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}
