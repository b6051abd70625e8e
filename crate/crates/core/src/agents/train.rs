use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

use super::checkpoint::Checkpoint;
use super::mds::{MdsAgent, UpdateStats};
use super::AgentError;
use crate::convex::{ConicBackend, ConvexSettings};
use crate::env::{ConvexStage, EnvState, ReplayBuffer, StarRisEnv, StepInfo, TaskSpec, Transition};
use crate::model::StarRisConfig;

/// One line of the training log. Contains no wall-clock data, so fixed
/// seeds reproduce the log bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub task_id: u64,
    pub mean_reward: f64,
    pub best_reward: f64,
    pub mean_ee: f64,
    pub best_ee: f64,
    /// EE of the configuration carried into the next episode.
    pub carried_ee: f64,
    pub mean_violations: f64,
    /// Fraction of steps with at least one violated constraint.
    pub violation_rate: f64,
    /// "solved", "reused" or "fallback".
    pub convex_status: String,
    pub convex_iterations: usize,
    /// The convex stage failed and the episode ran on a reused or default
    /// operating point.
    pub infeasible: bool,
    pub updates: usize,
    pub mean_critic_loss: Option<f64>,
    pub noise_std: f64,
    /// Splitting ratios of the episode's operating point, reflection side
    /// first.
    pub rho: Vec<f64>,
    pub carried_surface: Option<StarRisConfig>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpisodeRecord>,
}

impl TrainLog {
    pub fn to_jsonl(&self) -> String {
        self.records.iter().map(|r| serde_json::to_string(r).expect("record serialises") + "\n").collect()
    }

    pub fn from_jsonl(s: &str) -> Result<Self, serde_json::Error> {
        let records = s.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect::<Result<_, _>>()?;
        Ok(Self { records })
    }

    pub fn digest(&self) -> String {
        hex(&Sha256::digest(self.to_jsonl().as_bytes()))
    }

    pub fn mean_reward(&self, range: std::ops::Range<usize>) -> f64 {
        let r = &self.records[range];
        r.iter().map(|e| e.mean_reward).sum::<f64>() / r.len() as f64
    }

    pub fn mean_ee(&self, range: std::ops::Range<usize>) -> f64 {
        let r = &self.records[range];
        r.iter().map(|e| e.mean_ee).sum::<f64>() / r.len() as f64
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub episodes: usize,
    pub convex: ConvexSettings,
    /// Write a checkpoint every this many episodes into `snapshot_dir`.
    pub snapshot_every: Option<usize>,
    pub snapshot_dir: Option<PathBuf>,
}

impl TrainOptions {
    pub fn new(episodes: usize) -> Self {
        Self { episodes, convex: ConvexSettings::default(), snapshot_every: None, snapshot_dir: None }
    }
}

/// Resets onto the episode's channels, installs the carried surface and
/// runs the convex stage for it.
pub(crate) fn begin_episode(
    env: &mut StarRisEnv,
    task: &TaskSpec,
    episode: usize,
    carried: Option<&StarRisConfig>,
    settings: &ConvexSettings,
    backend: &dyn ConicBackend,
) -> Result<(EnvState, ConvexStage), AgentError> {
    env.reset(&task.for_episode(episode as u64))?;
    if let Some(ris) = carried {
        env.set_surface(ris.clone())?;
    }
    let stage = env.solve_operating_point(settings, backend)?;
    Ok((env.state()?.clone(), stage))
}

/// Per-episode bookkeeping; the best-reward configuration is carried forward.
pub(crate) struct EpisodeTracker {
    steps: usize,
    reward_sum: f64,
    ee_sum: f64,
    violation_sum: usize,
    violating_steps: usize,
    rho: Vec<f64>,
    best: Option<(f64, f64, StarRisConfig)>,
    updates: usize,
    critic_loss_sum: f64,
}

impl EpisodeTracker {
    /// Starts tracking an episode whose operating point is installed in `env`.
    pub(crate) fn start(env: &StarRisEnv) -> Result<Self, AgentError> {
        let (_, ps) = env.operating_point()?;
        Ok(Self {
            steps: 0,
            reward_sum: 0.0,
            ee_sum: 0.0,
            violation_sum: 0,
            violating_steps: 0,
            rho: ps.rho_r.iter().chain(&ps.rho_t).copied().collect(),
            best: None,
            updates: 0,
            critic_loss_sum: 0.0,
        })
    }

    pub(crate) fn observe(&mut self, reward: f64, info: &StepInfo) {
        self.steps += 1;
        self.reward_sum += reward;
        self.ee_sum += info.metrics.ee;
        self.violation_sum += info.violations;
        self.violating_steps += usize::from(info.violations > 0);
        if self.best.as_ref().is_none_or(|b| reward > b.0) {
            self.best = Some((reward, info.metrics.ee, info.surface.clone()));
        }
    }

    pub(crate) fn observe_update(&mut self, stats: &UpdateStats) {
        self.updates += 1;
        self.critic_loss_sum += stats.critic_loss;
    }

    pub(crate) fn finish(
        self,
        episode: usize,
        task_id: u64,
        stage: &ConvexStage,
        noise_std: f64,
    ) -> (EpisodeRecord, Option<StarRisConfig>) {
        let n = self.steps.max(1) as f64;
        let (status, iterations) = match stage {
            ConvexStage::Solved { iterations, .. } => ("solved", *iterations),
            ConvexStage::Reused { .. } => ("reused", 0),
            ConvexStage::Fallback { .. } => ("fallback", 0),
        };
        let (best_reward, best_ee, surface) = match self.best {
            Some((r, e, s)) => (r, e, Some(s)),
            None => (0.0, 0.0, None),
        };
        let record = EpisodeRecord {
            episode,
            task_id,
            mean_reward: self.reward_sum / n,
            best_reward,
            mean_ee: self.ee_sum / n,
            best_ee,
            carried_ee: best_ee,
            mean_violations: self.violation_sum as f64 / n,
            violation_rate: self.violating_steps as f64 / n,
            convex_status: status.into(),
            convex_iterations: iterations,
            infeasible: !stage.solved(),
            updates: self.updates,
            mean_critic_loss: (self.updates > 0).then(|| self.critic_loss_sum / self.updates as f64),
            noise_std,
            rho: self.rho,
            carried_surface: surface.clone(),
        };
        (record, surface)
    }
}

/// Runs one episode of interaction from `state`, storing every transition
/// in `buffer` and calling `learn` after each step.
pub(crate) fn rollout(
    env: &mut StarRisEnv,
    agent: &mut MdsAgent,
    buffer: &mut ReplayBuffer,
    mut state: EnvState,
    tracker: &mut EpisodeTracker,
    mut learn: impl FnMut(&mut MdsAgent, &ReplayBuffer) -> Result<Option<UpdateStats>, AgentError>,
) -> Result<(), AgentError> {
    for _ in 0..env.config().episode_len {
        let action = agent.select_action(&state.obs, true)?;
        let (next, reward, info) = env.step(&action)?;
        tracker.observe(reward, &info);
        buffer.push(Transition { state: state.obs, action, reward, next_state: next.obs.clone() });
        if let Some(stats) = learn(agent, buffer)? {
            tracker.observe_update(&stats);
        }
        state = next;
        if info.done {
            break;
        }
    }
    Ok(())
}

pub(crate) fn write_snapshot(opts: &TrainOptions, agent: &MdsAgent, episode: usize) -> Result<(), AgentError> {
    if let (Some(every), Some(dir)) = (opts.snapshot_every, &opts.snapshot_dir) {
        if every > 0 && (episode + 1) % every == 0 {
            std::fs::create_dir_all(dir).map_err(|e| AgentError::Io(e.to_string()))?;
            Checkpoint::from_agent(agent, episode + 1).save(&dir.join(format!("checkpoint_e{:05}.json", episode + 1)))?;
        }
    }
    Ok(())
}

/// Single-task training: per episode, the convex stage for the carried
/// surface, then T environment steps with an update after each once the
/// buffer holds a batch.
pub fn mds_train(
    env: &mut StarRisEnv,
    backend: &dyn ConicBackend,
    mut agent: MdsAgent,
    task: &TaskSpec,
    opts: &TrainOptions,
) -> Result<(TrainLog, MdsAgent), AgentError> {
    check_dims(env, &agent)?;
    let mut buffer = ReplayBuffer::new(agent.hyper.buffer_capacity);
    let mut log = TrainLog::default();
    let mut carried: Option<StarRisConfig> = None;
    for e in 0..opts.episodes {
        let (state, stage) = begin_episode(env, task, e, carried.as_ref(), &opts.convex, backend)?;
        let mut tracker = EpisodeTracker::start(env)?;
        rollout(env, &mut agent, &mut buffer, state, &mut tracker, |agent, buffer| {
            if buffer.len() < agent.hyper.batch_size {
                return Ok(None);
            }
            let batch = agent.sample_batch(buffer);
            agent.update(&batch).map(Some)
        })?;
        let (record, best) = tracker.finish(e, task.task_id, &stage, agent.noise_std);
        log.records.push(record);
        carried = best.or(carried);
        agent.decay_noise();
        write_snapshot(opts, &agent, e)?;
    }
    Ok((log, agent))
}

pub(crate) fn check_dims(env: &StarRisEnv, agent: &MdsAgent) -> Result<(), AgentError> {
    if env.state_dim() != agent.state_dim || env.action_m() != agent.m {
        return Err(AgentError::Usage(format!(
            "agent sized for ({}, {}) but environment has ({}, {})",
            agent.state_dim,
            agent.m,
            env.state_dim(),
            env.action_m()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mean_reward: f64,
    pub mean_ee: f64,
    /// Highest EE among steps that satisfied every constraint.
    pub best_feasible_ee: Option<f64>,
    pub best_feasible_surface_index: Option<usize>,
}

/// Greedy evaluation: one episode without exploration or learning.
pub fn evaluate_policy(
    env: &mut StarRisEnv,
    backend: &dyn ConicBackend,
    agent: &mut MdsAgent,
    task: &TaskSpec,
    episode: usize,
    carried: Option<&StarRisConfig>,
    settings: &ConvexSettings,
) -> Result<EvalResult, AgentError> {
    check_dims(env, agent)?;
    let (mut state, _) = begin_episode(env, task, episode, carried, settings, backend)?;
    let t = env.config().episode_len;
    let (mut r_sum, mut ee_sum) = (0.0, 0.0);
    let mut best: Option<(f64, usize)> = None;
    for k in 0..t {
        let a = agent.select_action(&state.obs, false)?;
        let (next, r, info) = env.step(&a)?;
        r_sum += r;
        ee_sum += info.metrics.ee;
        if info.report.feasible() && best.is_none_or(|b| info.metrics.ee > b.0) {
            best = Some((info.metrics.ee, k));
        }
        state = next;
    }
    let n = t.max(1) as f64;
    Ok(EvalResult {
        mean_reward: r_sum / n,
        mean_ee: ee_sum / n,
        best_feasible_ee: best.map(|b| b.0),
        best_feasible_surface_index: best.map(|b| b.1),
    })
}
