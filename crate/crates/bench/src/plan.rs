//! What each scheme changes. Every baseline is Scheme 2 (meta-training
//! followed by adaptation) with exactly one modification; Scheme 1 drops the
//! meta-learning stage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::TAU;

use starris_core::env::{EnvConfig, TaskSpec};
use starris_core::meta::sample_tasks;
use starris_core::model::{EhModel, SurfaceMode};

use crate::config::{ExperimentConfig, Scheme};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    /// Single-task training from random initialisation.
    Mds,
    /// Meta-training over several placements, then adaptation.
    MetaAdapt,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunPlan {
    pub pipeline: Pipeline,
    pub eh: EhModel,
    pub fixed_rho: Option<f64>,
    pub random_phases: bool,
    pub surface: SurfaceMode,
}

impl RunPlan {
    pub fn new(scheme: Scheme, cfg: &ExperimentConfig) -> Self {
        let base = Self {
            pipeline: Pipeline::MetaAdapt,
            eh: cfg.eh.nonlinear(),
            fixed_rho: None,
            random_phases: false,
            surface: SurfaceMode::Active,
        };
        match scheme {
            Scheme::Scheme2 => base,
            Scheme::Scheme1 => Self { pipeline: Pipeline::Mds, ..base },
            Scheme::Baseline1 => Self { eh: cfg.eh.linear(), ..base },
            Scheme::Baseline2 => Self { fixed_rho: Some(cfg.convex.baseline_rho), ..base },
            Scheme::Baseline3 => Self { random_phases: true, ..base },
            Scheme::Baseline4 => Self { surface: SurfaceMode::Passive, ..base },
        }
    }
}

/// Tasks and random draws shared by every scheme run with the same seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedSetup {
    /// The placement training/adaptation is evaluated on (task id 0).
    pub eval_task: TaskSpec,
    /// Meta-training placements, distinct from the evaluation one.
    pub meta_tasks: Vec<TaskSpec>,
    /// Reflection and transmission phases of the random-phase baseline,
    /// drawn once per seed.
    pub phases: (Vec<f64>, Vec<f64>),
}

impl SeedSetup {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eval_task = TaskSpec::new(0, rng.random(), rng.random());
        let meta_tasks = sample_tasks(cfg.meta.tasks + 1, &mut rng)
            .expect("at least one task")
            .into_iter()
            .filter(|t| t.placement_seed != eval_task.placement_seed)
            .take(cfg.meta.tasks)
            .enumerate()
            .map(|(i, t)| TaskSpec::new(i as u64 + 1, t.placement_seed, t.channel_seed))
            .collect();
        let mut prng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_9a5e);
        let m = cfg.system.m_elements;
        let mut draw = || (0..m).map(|_| prng.random_range(0.0..TAU)).collect::<Vec<f64>>();
        let phases = (draw(), draw());
        Self { eval_task, meta_tasks, phases }
    }
}

pub fn env_config(cfg: &ExperimentConfig, plan: &RunPlan, setup: &SeedSetup) -> EnvConfig {
    let mut ec = EnvConfig::new(cfg.system.to_params(plan.surface), plan.eh, cfg.episode_len);
    ec.geometry = cfg.geometry.clone();
    ec.fading = cfg.fading.clone();
    if plan.random_phases {
        ec.decoder = ec.decoder.with_fixed_phases(setup.phases.0.clone(), setup.phases.1.clone());
    }
    ec
}
