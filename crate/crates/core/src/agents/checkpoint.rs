//! Versioned JSON container for all nine networks plus hyperparameters.
//! Files wrap the checkpoint with its SHA-256 digest, verified on load.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

use super::mds::{AgentHyper, MdsAgent, NETWORK_NAMES};
use super::nn::ApproximatorParams;
use super::train::hex;
use super::AgentError;
use crate::env::TaskSpec;

pub const CHECKPOINT_FORMAT: &str = "starris-mds-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub state_dim: usize,
    pub m: usize,
    pub hyper: AgentHyper,
    pub noise_std: f64,
    pub episodes_trained: usize,
    pub networks: BTreeMap<String, ApproximatorParams>,
    /// Task manifest of a meta-trained checkpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tasks: Option<Vec<TaskSpec>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    sha256: String,
    checkpoint: Checkpoint,
}

impl Checkpoint {
    pub fn from_agent(agent: &MdsAgent, episodes_trained: usize) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            state_dim: agent.state_dim,
            m: agent.m,
            hyper: agent.hyper.clone(),
            noise_std: agent.noise_std,
            episodes_trained,
            networks: agent.networks().iter().map(|(n, p)| (n.to_string(), (*p).clone())).collect(),
            tasks: None,
        }
    }

    pub fn with_tasks(mut self, tasks: Vec<TaskSpec>) -> Self {
        self.tasks = Some(tasks);
        self
    }

    /// Rebuilds an agent with exactly these parameters. Optimiser moments
    /// start fresh; the sampling stream is reseeded from the hyperparameters.
    pub fn to_agent(&self) -> Result<MdsAgent, AgentError> {
        self.validate()?;
        let mut agent = MdsAgent::new(self.state_dim, self.m, self.hyper.clone())?;
        for (name, params) in &self.networks {
            let slot = agent.network_mut(name).expect("validated name");
            if slot.arch != params.arch || slot.len() != params.len() {
                return Err(AgentError::Checkpoint(format!("network {name} does not match the agent shape")));
            }
            *slot = params.clone();
        }
        agent.noise_std = self.noise_std;
        Ok(agent)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(AgentError::Checkpoint(format!("unknown format {:?}", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(AgentError::Checkpoint(format!("unsupported version {}", self.version)));
        }
        for name in NETWORK_NAMES {
            let p = self.networks.get(name).ok_or_else(|| AgentError::Checkpoint(format!("missing network {name}")))?;
            if p.len() != p.arch.param_count() {
                return Err(AgentError::Checkpoint(format!("network {name} has the wrong parameter count")));
            }
        }
        if self.networks.len() != NETWORK_NAMES.len() {
            return Err(AgentError::Checkpoint("unexpected extra networks".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialises")
    }

    pub fn digest(&self) -> String {
        hex(&Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        let file = CheckpointFile { sha256: self.digest(), checkpoint: self.clone() };
        let text = serde_json::to_string(&file).expect("checkpoint serialises");
        std::fs::write(path, text).map_err(|e| AgentError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AgentError::Io(format!("{}: {e}", path.display())))?;
        let file: CheckpointFile =
            serde_json::from_str(&text).map_err(|e| AgentError::Checkpoint(format!("{}: {e}", path.display())))?;
        let cp = file.checkpoint;
        if cp.digest() != file.sha256 {
            return Err(AgentError::Checkpoint(format!("{}: digest mismatch", path.display())));
        }
        cp.validate()?;
        Ok(cp)
    }
}
