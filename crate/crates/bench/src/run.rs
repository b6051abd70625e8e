//! Orchestration of scheme runs, sweeps, single-instance simulation and
//! adaptation from a saved meta-checkpoint.

use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

use starris_core::agents::{mds_train, AgentError, Checkpoint, MdsAgent, TrainLog, TrainOptions};
use starris_core::convex::ClarabelBackend;
use starris_core::env::{ConvexStage, StarRisEnv};
use starris_core::meta::{meta_adapt, meta_train, MetaOptions};

use crate::config::{ExperimentConfig, Scheme};
use crate::plan::{env_config, Pipeline, RunPlan, SeedSetup};
use crate::records::{self, ResultRecord};
use crate::BenchError;

impl From<AgentError> for BenchError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Diverged(m) => BenchError::Diverged(m),
            AgentError::Usage(m) | AgentError::Checkpoint(m) => BenchError::Config(m),
            AgentError::Io(m) => BenchError::Io(m),
            AgentError::Env(e) => BenchError::Run(e.to_string()),
        }
    }
}

/// Everything one (scheme, seed) run produces.
pub struct SeedRun {
    pub scheme: Scheme,
    pub seed: u64,
    /// Training log (Scheme 1) or adaptation log (meta pipelines).
    pub log: TrainLog,
    pub meta_log: Option<TrainLog>,
    pub meta_checkpoint: Option<Checkpoint>,
    pub agent: MdsAgent,
    pub wallclock_s: f64,
}

impl SeedRun {
    pub fn records(&self, sweep: Option<(&str, f64)>) -> Vec<ResultRecord> {
        ResultRecord::from_log(self.scheme.id(), sweep, self.seed, &self.log, self.wallclock_s)
    }
}

fn env_for(cfg: &ExperimentConfig, plan: &RunPlan, setup: &SeedSetup) -> Result<StarRisEnv, BenchError> {
    StarRisEnv::new(env_config(cfg, plan, setup)).map_err(|e| BenchError::Config(e.to_string()))
}

fn fresh_agent(cfg: &ExperimentConfig, env: &StarRisEnv, seed: u64) -> Result<MdsAgent, BenchError> {
    let mut hyper = cfg.agent.clone();
    hyper.seed = hyper.seed.wrapping_add(seed);
    Ok(MdsAgent::new(env.state_dim(), env.action_m(), hyper)?)
}

fn train_options(cfg: &ExperimentConfig, plan: &RunPlan, seed: u64, episodes: usize) -> TrainOptions {
    TrainOptions { convex: cfg.convex.settings(seed, plan.fixed_rho), ..TrainOptions::new(episodes) }
}

/// Runs `scheme` for one seed. Deterministic given the configuration.
pub fn run_seed(cfg: &ExperimentConfig, scheme: Scheme, seed: u64) -> Result<SeedRun, BenchError> {
    let start = Instant::now();
    let plan = RunPlan::new(scheme, cfg);
    let setup = SeedSetup::new(cfg, seed);
    let backend = ClarabelBackend::default();
    let mut env = env_for(cfg, &plan, &setup)?;
    let agent = fresh_agent(cfg, &env, seed)?;
    let opts = train_options(cfg, &plan, seed, cfg.episodes);
    let (log, agent, meta_log, meta_checkpoint) = match plan.pipeline {
        Pipeline::Mds => {
            let (log, agent) = mds_train(&mut env, &backend, agent, &setup.eval_task, &opts)?;
            (log, agent, None, None)
        }
        Pipeline::MetaAdapt => {
            let mopts = MetaOptions { episodes: cfg.meta.episodes, convex: opts.convex.clone(), meta: cfg.meta.hyper() };
            let (cp, mlog) = meta_train(&setup.meta_tasks, |_| Ok(StarRisEnv::new(env_config(cfg, &plan, &setup))?), &backend, agent, &mopts)?;
            let (log, agent) = meta_adapt(&cp, &setup.eval_task, &mut env, &backend, &opts)?;
            (log, agent, Some(mlog), Some(cp))
        }
    };
    if !log.records.is_empty() && log.records.iter().all(|r| r.infeasible) {
        return Err(BenchError::Infeasible(diagnose(cfg, scheme, seed)?.unwrap_or_else(|| "no feasible operating point".into())));
    }
    Ok(SeedRun { scheme, seed, log, meta_log, meta_checkpoint, agent, wallclock_s: start.elapsed().as_secs_f64() })
}

/// Adaptation of a saved meta-checkpoint on the seed's evaluation task.
pub fn adapt_seed(cfg: &ExperimentConfig, scheme: Scheme, seed: u64, checkpoint: &Checkpoint) -> Result<SeedRun, BenchError> {
    let start = Instant::now();
    let plan = RunPlan::new(scheme, cfg);
    let setup = SeedSetup::new(cfg, seed);
    let mut env = env_for(cfg, &plan, &setup)?;
    if env.state_dim() != checkpoint.state_dim || env.action_m() != checkpoint.m {
        return Err(BenchError::Config(format!(
            "checkpoint is sized for ({}, {}) but the configuration gives ({}, {})",
            checkpoint.state_dim,
            checkpoint.m,
            env.state_dim(),
            env.action_m()
        )));
    }
    let opts = train_options(cfg, &plan, seed, cfg.episodes);
    let (log, agent) = meta_adapt(checkpoint, &setup.eval_task, &mut env, &ClarabelBackend::default(), &opts)?;
    Ok(SeedRun { scheme, seed, log, meta_log: None, meta_checkpoint: None, agent, wallclock_s: start.elapsed().as_secs_f64() })
}

/// One job of a sweep: a scheme, an optional swept value and a seed.
#[derive(Clone, Debug)]
struct Job {
    scheme: Scheme,
    value: Option<f64>,
    seed: u64,
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, BenchError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| BenchError::Run(e.to_string()))
}

/// Runs every (scheme, value, seed) combination on worker threads and
/// merges the records in job order. An empty value list runs nothing.
pub fn sweep(
    cfg: &ExperimentConfig,
    schemes: &[Scheme],
    parameter: &str,
    values: &[f64],
    jobs: Option<usize>,
) -> Result<Vec<ResultRecord>, BenchError> {
    let configs = values.iter().map(|&v| cfg.with_value(parameter, v)).collect::<Result<Vec<_>, _>>()?;
    let list: Vec<(usize, Job)> = schemes
        .iter()
        .flat_map(|&scheme| values.iter().enumerate().flat_map(move |(i, &v)| cfg.seeds.iter().map(move |&seed| (i, Job { scheme, value: Some(v), seed }))))
        .collect();
    let runs = pool(jobs)?.install(|| {
        list.par_iter()
            .map(|(i, job)| run_seed(&configs[*i], job.scheme, job.seed).map(|r| r.records(job.value.map(|v| (parameter, v)))))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(runs.into_iter().flatten().collect())
}

/// All seeds of each scheme, without sweep tags.
pub fn run_schemes(cfg: &ExperimentConfig, schemes: &[Scheme], jobs: Option<usize>) -> Result<Vec<SeedRun>, BenchError> {
    let list: Vec<Job> =
        schemes.iter().flat_map(|&scheme| cfg.seeds.iter().map(move |&seed| Job { scheme, value: None, seed })).collect();
    pool(jobs)?.install(|| list.par_iter().map(|j| run_seed(cfg, j.scheme, j.seed)).collect())
}

/// Writes records, logs and checkpoints of finished runs under `dir`.
pub fn write_runs(dir: &Path, runs: &[SeedRun]) -> Result<Vec<ResultRecord>, BenchError> {
    let mut all = Vec::new();
    for run in runs {
        let stem = format!("{}_seed{}", run.scheme.id(), run.seed);
        records::write(&dir.join(format!("{stem}_log.jsonl")), &run.log.to_jsonl())?;
        if let Some(ml) = &run.meta_log {
            records::write(&dir.join(format!("{stem}_meta_log.jsonl")), &ml.to_jsonl())?;
        }
        if let Some(cp) = &run.meta_checkpoint {
            cp.save(&dir.join(format!("{stem}_meta_checkpoint.json")))?;
        }
        Checkpoint::from_agent(&run.agent, run.log.records.len()).save(&dir.join(format!("{stem}_checkpoint.json")))?;
        all.extend(run.records(None));
    }
    Ok(all)
}

pub fn write_records(dir: &Path, stem: &str, recs: &[ResultRecord]) -> Result<(), BenchError> {
    records::write(&dir.join(format!("{stem}.csv")), &records::to_csv(recs))?;
    records::write(&dir.join(format!("{stem}.json")), &records::to_json(recs))
}

/// Convex stage and constraint check for the neutral surface on the first
/// episode's channels.
#[derive(Clone, Debug, Serialize)]
pub struct SimulateReport {
    pub scheme: String,
    pub seed: u64,
    pub convex_status: String,
    pub convex_reason: Option<String>,
    pub ee_bits_per_hz_per_watt: f64,
    pub sum_rate_bits_per_hz: f64,
    pub total_power_w: f64,
    pub rho: Vec<f64>,
    pub violated: Vec<String>,
    pub first_violated: Option<String>,
}

impl SimulateReport {
    pub fn feasible(&self) -> bool {
        self.convex_reason.is_none() && self.violated.is_empty()
    }
}

pub fn simulate(cfg: &ExperimentConfig, scheme: Scheme, seed: u64) -> Result<SimulateReport, BenchError> {
    let plan = RunPlan::new(scheme, cfg);
    let setup = SeedSetup::new(cfg, seed);
    let mut env = env_for(cfg, &plan, &setup)?;
    env.reset(&setup.eval_task.for_episode(0)).map_err(|e| BenchError::Run(e.to_string()))?;
    let stage = env
        .solve_operating_point(&cfg.convex.settings(seed, plan.fixed_rho), &ClarabelBackend::default())
        .map_err(|e| BenchError::Run(e.to_string()))?;
    let (metrics, report) = env.evaluate_current().map_err(|e| BenchError::Run(e.to_string()))?;
    let (_, ps) = env.operating_point().map_err(|e| BenchError::Run(e.to_string()))?;
    let (status, reason) = match stage {
        ConvexStage::Solved { .. } => ("solved", None),
        ConvexStage::Reused { reason } => ("reused", Some(reason)),
        ConvexStage::Fallback { reason } => ("fallback", Some(reason)),
    };
    let violated: Vec<String> = report.violated().iter().map(|c| format!("C{c}")).collect();
    let first_violated = reason.as_ref().map(|r| first_label(r)).or_else(|| violated.first().cloned());
    Ok(SimulateReport {
        scheme: scheme.id().into(),
        seed,
        convex_status: status.into(),
        convex_reason: reason,
        ee_bits_per_hz_per_watt: metrics.ee,
        sum_rate_bits_per_hz: metrics.sum_rate,
        total_power_w: metrics.total_power,
        rho: ps.rho_r.iter().chain(&ps.rho_t).copied().collect(),
        violated,
        first_violated,
    })
}

/// The first constraint label (`C3t[0]`, ...) in a solver message, or the
/// message itself.
fn first_label(reason: &str) -> String {
    reason
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '[' || c == ']'))
        .find(|w| w.len() > 1 && w.starts_with('C') && w[1..].starts_with(|c: char| c.is_ascii_digit()))
        .map(str::to_string)
        .unwrap_or_else(|| reason.to_string())
}

/// Describes why the first episode is infeasible, if it is.
pub fn diagnose(cfg: &ExperimentConfig, scheme: Scheme, seed: u64) -> Result<Option<String>, BenchError> {
    let r = simulate(cfg, scheme, seed)?;
    Ok((!r.feasible()).then(|| {
        format!(
            "{} seed {}: first violated constraint {}{}",
            r.scheme,
            r.seed,
            r.first_violated.clone().unwrap_or_default(),
            r.convex_reason.map(|m| format!(" ({m})")).unwrap_or_default()
        )
    }))
}
