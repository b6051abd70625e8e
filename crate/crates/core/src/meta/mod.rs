//! First-order meta-training of the hybrid learner across user placements,
//! and adaptation of a meta-trained checkpoint to a new placement.
//!
//! Every time step, each task contributes one rollout step to its own
//! buffer. An adapted copy of the global networks takes `inner_steps` SGD
//! steps on a support batch. Its gradient on a disjoint validation batch
//! is then summed over tasks and applied to the globals.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{
    begin_episode, check_dims, mds_train, AgentError, AgentGrads, Batch, BatchNoise, Checkpoint,
    EpisodeTracker, MdsAgent, TrainLog, TrainOptions, UpdateStats,
};
use crate::convex::{ConicBackend, ConvexSettings};
use crate::env::{EnvError, EnvState, ReplayBuffer, StarRisEnv, TaskSpec, Transition};
use crate::model::StarRisConfig;

/// Draws `z_count` tasks with distinct placement seeds.
pub fn sample_tasks(z_count: usize, rng: &mut impl Rng) -> Result<Vec<TaskSpec>, AgentError> {
    if z_count == 0 {
        return Err(AgentError::Usage("at least one task is required".into()));
    }
    let mut tasks: Vec<TaskSpec> = Vec::with_capacity(z_count);
    while tasks.len() < z_count {
        let placement: u64 = rng.random();
        let channel: u64 = rng.random();
        if tasks.iter().all(|t| t.placement_seed != placement) {
            tasks.push(TaskSpec::new(tasks.len() as u64, placement, channel));
        }
    }
    Ok(tasks)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaHyper {
    pub inner_steps: usize,
    /// Inner SGD rates relative to the configured outer rates.
    pub inner_lr_ratio: f64,
}

impl Default for MetaHyper {
    fn default() -> Self {
        Self { inner_steps: 1, inner_lr_ratio: 0.1 }
    }
}

/// A batch together with the policy noise used to evaluate it.
#[derive(Clone)]
pub struct NoisyBatch {
    pub batch: Batch,
    pub noise: BatchNoise,
}

impl NoisyBatch {
    pub fn draw(agent: &mut MdsAgent, transitions: &[&Transition]) -> Self {
        let batch = Batch::from_transitions(transitions);
        let noise = agent.draw_noise(batch.len());
        Self { batch, noise }
    }
}

/// Adapted copy of `global` after `steps` SGD steps on the support batch.
/// The global agent is not touched.
pub fn inner_update(global: &MdsAgent, support: &NoisyBatch, steps: usize, lr_ratio: f64) -> Result<MdsAgent, AgentError> {
    let mut adapted = global.clone();
    for _ in 0..steps {
        let (g, _) = adapted.gradients(&support.batch, &support.noise)?;
        adapted.sgd_step(&g, lr_ratio);
    }
    Ok(adapted)
}

/// Sums each adapted copy's gradient on its validation batch (first-order
/// approximation) and applies it to the globals with the outer optimisers.
pub fn outer_update(
    global: &mut MdsAgent,
    adapted: &[MdsAgent],
    validation: &[NoisyBatch],
) -> Result<Vec<UpdateStats>, AgentError> {
    assert_eq!(adapted.len(), validation.len(), "one validation batch per task");
    let mut total: Option<AgentGrads> = None;
    let mut stats = Vec::with_capacity(adapted.len());
    for (a, v) in adapted.iter().zip(validation) {
        let (g, s) = a.gradients(&v.batch, &v.noise)?;
        stats.push(s);
        match total.as_mut() {
            Some(t) => t.add_assign(&g),
            None => total = Some(g),
        }
    }
    if let Some(t) = total {
        global.apply(&t);
    }
    Ok(stats)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaOptions {
    pub episodes: usize,
    pub convex: ConvexSettings,
    pub meta: MetaHyper,
}

impl MetaOptions {
    pub fn new(episodes: usize) -> Self {
        Self { episodes, convex: ConvexSettings::default(), meta: MetaHyper::default() }
    }
}

/// Global networks plus per-task buffers during meta-training.
pub struct MetaState {
    pub global: MdsAgent,
    pub tasks: Vec<TaskSpec>,
    pub buffers: Vec<ReplayBuffer>,
}

/// Meta-training across `tasks`. Returns the global checkpoint (with the
/// task manifest) and a log holding one record per task per episode.
pub fn meta_train(
    tasks: &[TaskSpec],
    env_factory: impl Fn(&TaskSpec) -> Result<StarRisEnv, EnvError>,
    backend: &dyn ConicBackend,
    agent: MdsAgent,
    opts: &MetaOptions,
) -> Result<(Checkpoint, TrainLog), AgentError> {
    let (state, log) = meta_train_state(tasks, env_factory, backend, agent, opts)?;
    let cp = Checkpoint::from_agent(&state.global, opts.episodes).with_tasks(state.tasks);
    Ok((cp, log))
}

pub fn meta_train_state(
    tasks: &[TaskSpec],
    env_factory: impl Fn(&TaskSpec) -> Result<StarRisEnv, EnvError>,
    backend: &dyn ConicBackend,
    agent: MdsAgent,
    opts: &MetaOptions,
) -> Result<(MetaState, TrainLog), AgentError> {
    if tasks.is_empty() {
        return Err(AgentError::Usage("at least one task is required".into()));
    }
    for (i, t) in tasks.iter().enumerate() {
        if tasks[..i].iter().any(|u| u.placement_seed == t.placement_seed || u.task_id == t.task_id) {
            return Err(AgentError::Usage(format!("task {} is not distinct", t.task_id)));
        }
    }
    let mut envs = tasks.iter().map(&env_factory).collect::<Result<Vec<_>, _>>()?;
    for env in &envs {
        check_dims(env, &agent)?;
    }
    let t_len = envs[0].config().episode_len;
    let mut st = MetaState {
        buffers: tasks.iter().map(|_| ReplayBuffer::new(agent.hyper.buffer_capacity)).collect(),
        global: agent,
        tasks: tasks.to_vec(),
    };
    let mut carried: Vec<Option<StarRisConfig>> = vec![None; tasks.len()];
    let mut log = TrainLog::default();
    let mh = &opts.meta;

    for e in 0..opts.episodes {
        let mut states: Vec<EnvState> = Vec::with_capacity(tasks.len());
        let mut stages = Vec::with_capacity(tasks.len());
        for (z, env) in envs.iter_mut().enumerate() {
            let (s, stage) = begin_episode(env, &tasks[z], e, carried[z].as_ref(), &opts.convex, backend)?;
            states.push(s);
            stages.push(stage);
        }
        let mut trackers = envs.iter().map(EpisodeTracker::start).collect::<Result<Vec<_>, _>>()?;
        for _ in 0..t_len {
            let mut adapted = Vec::new();
            let mut validation = Vec::new();
            let mut owners = Vec::new();
            for z in 0..tasks.len() {
                // one interaction step with the global policy
                let action = st.global.select_action(&states[z].obs, true)?;
                let (next, reward, info) = envs[z].step(&action)?;
                trackers[z].observe(reward, &info);
                let prev = std::mem::replace(&mut states[z], next);
                st.buffers[z].push(Transition { state: prev.obs, action, reward, next_state: states[z].obs.clone() });

                let n = st.global.hyper.batch_size;
                if st.buffers[z].len() >= 2 * n {
                    let (trn, val) = st.global.sample_split(&st.buffers[z]);
                    let support = NoisyBatch::draw(&mut st.global, &trn);
                    let val = NoisyBatch::draw(&mut st.global, &val);
                    adapted.push(inner_update(&st.global, &support, mh.inner_steps, mh.inner_lr_ratio)?);
                    validation.push(val);
                    owners.push(z);
                }
            }
            if !adapted.is_empty() {
                let stats = outer_update(&mut st.global, &adapted, &validation)?;
                for (z, s) in owners.iter().zip(&stats) {
                    trackers[*z].observe_update(s);
                }
            }
        }
        for (z, tracker) in trackers.into_iter().enumerate() {
            let (record, best) = tracker.finish(e, tasks[z].task_id, &stages[z], st.global.noise_std);
            log.records.push(record);
            if best.is_some() {
                carried[z] = best;
            }
        }
        st.global.decay_noise();
    }
    Ok((st, log))
}

/// Adaptation to a new task, starting from the meta-trained parameters
/// with a fresh buffer. Otherwise identical to single-task training.
pub fn meta_adapt(
    checkpoint: &Checkpoint,
    task: &TaskSpec,
    env: &mut StarRisEnv,
    backend: &dyn ConicBackend,
    opts: &TrainOptions,
) -> Result<(TrainLog, MdsAgent), AgentError> {
    let agent = checkpoint.to_agent()?;
    mds_train(env, backend, agent, task, opts)
}
