use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ddpg::{self, ddpg_targets, stack, DdpgNets};
use super::nn::{Activation, ApproximatorParams, Architecture, Optimizer, OptimizerKind};
use super::sac::{self, policy_mean, policy_sample, sac_targets, SacNets};
use super::AgentError;
use crate::env::{HybridAction, ReplayBuffer, Transition};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentHyper {
    /// ξ
    pub discount: f64,
    /// Soft-update coefficient for all target networks.
    pub tau: f64,
    /// λ
    pub entropy_weight: f64,
    pub lr_critic: f64,
    pub lr_actor: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Std of the Gaussian noise added to the selection head while exploring.
    pub noise_std: f64,
    /// Per-episode multiplicative decay of `noise_std`.
    pub noise_decay: f64,
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Initial bias of the policy's log-σ outputs.
    pub init_log_std: f64,
}

impl Default for AgentHyper {
    fn default() -> Self {
        Self {
            discount: 0.95,
            tau: 0.005,
            entropy_weight: 0.2,
            lr_critic: 1e-3,
            lr_actor: 1e-4,
            batch_size: 64,
            buffer_capacity: 100_000,
            noise_std: 0.1,
            noise_decay: 0.999,
            hidden: vec![256, 256],
            optimizer: OptimizerKind::Adam,
            seed: 0,
            init_log_std: 0.0,
        }
    }
}

impl AgentHyper {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Usage(m.into()));
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad("discount must lie in (0, 1]");
        }
        if !(self.entropy_weight >= 0.0) {
            return bad("entropy weight must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("soft-update coefficient must lie in [0, 1]");
        }
        if !(self.lr_critic > 0.0 && self.lr_actor > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("batch size must be positive and fit in the buffer");
        }
        if !(self.noise_std >= 0.0 && self.noise_decay > 0.0 && self.noise_decay <= 1.0) {
            return bad("exploration noise settings out of range");
        }
        if !(super::sac::LOG_STD_MIN..=super::sac::LOG_STD_MAX).contains(&self.init_log_std) {
            return bad("initial log-σ must lie within the clamp range");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layers must be non-empty");
        }
        Ok(())
    }
}

/// A replay batch as column matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub s: DMatrix<f64>,
    /// Selection scores as stored (post-tanh, with exploration noise).
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub r: Vec<f64>,
    pub s_next: DMatrix<f64>,
}

impl Batch {
    pub fn from_transitions(ts: &[&Transition]) -> Self {
        assert!(!ts.is_empty(), "empty batch");
        let b = ts.len();
        let d = ts[0].state.len();
        let m = ts[0].action.discrete_raw.len();
        let k = ts[0].action.continuous_raw.len();
        Self {
            s: DMatrix::from_fn(d, b, |i, j| ts[j].state[i]),
            a1: DMatrix::from_fn(m, b, |i, j| ts[j].action.discrete_raw[i]),
            a2: DMatrix::from_fn(k, b, |i, j| ts[j].action.continuous_raw[i]),
            r: ts.iter().map(|t| t.reward).collect(),
            s_next: DMatrix::from_fn(d, b, |i, j| ts[j].next_state[i]),
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// Standard-normal draws for the policy: ε′ for next-state targets, ε for
/// the actor loss.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNoise {
    pub eps_next: DMatrix<f64>,
    pub eps: DMatrix<f64>,
}

impl BatchNoise {
    pub fn zeros(k: usize, b: usize) -> Self {
        Self { eps_next: DMatrix::zeros(k, b), eps: DMatrix::zeros(k, b) }
    }
}

/// Descent directions for the five trained networks.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentGrads {
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
    pub sac_actor: Vec<f64>,
    pub critic1: Vec<f64>,
    pub critic2: Vec<f64>,
}

impl AgentGrads {
    fn parts_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [&mut self.actor, &mut self.critic, &mut self.sac_actor, &mut self.critic1, &mut self.critic2]
    }

    fn parts(&self) -> [&Vec<f64>; 5] {
        [&self.actor, &self.critic, &self.sac_actor, &self.critic1, &self.critic2]
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.parts_mut().into_iter().zip(other.parts()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in self.parts_mut() {
            a.iter_mut().for_each(|x| *x *= c);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.parts().iter().all(|g| g.iter().all(|v| v.is_finite()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub critic_loss: f64,
    /// Mean critic value of the actor's actions (ascended).
    pub actor_objective: f64,
    pub critic1_loss: f64,
    pub critic2_loss: f64,
    pub policy_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentOptimizers {
    pub actor: Optimizer,
    pub critic: Optimizer,
    pub sac_actor: Optimizer,
    pub critic1: Optimizer,
    pub critic2: Optimizer,
}

/// The hybrid learner: a deterministic actor-critic for element selection
/// and a max-entropy actor-critic for the continuous heads.
#[derive(Clone, Debug)]
pub struct MdsAgent {
    pub hyper: AgentHyper,
    pub state_dim: usize,
    pub m: usize,
    pub ddpg: DdpgNets,
    pub sac: SacNets,
    pub opts: AgentOptimizers,
    /// Current exploration noise std (decays per episode).
    pub noise_std: f64,
    pub(crate) rng: ChaCha8Rng,
}

pub const NETWORK_NAMES: [&str; 9] =
    ["theta", "phi", "theta_bar", "phi_bar", "chi", "omega1", "omega2", "omega1_bar", "omega2_bar"];

impl MdsAgent {
    pub fn new(state_dim: usize, m: usize, hyper: AgentHyper) -> Result<Self, AgentError> {
        hyper.validate()?;
        if state_dim == 0 || m == 0 {
            return Err(AgentError::Usage("state and action widths must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let h = &hyper.hidden;
        let k = 4 * m;
        let actor = ApproximatorParams::init(Architecture::mlp(state_dim, h, m, Activation::Tanh), &mut rng);
        let critic = ApproximatorParams::init(Architecture::mlp(state_dim + m, h, 1, Activation::Identity), &mut rng);
        let mut chi = ApproximatorParams::init(Architecture::mlp(state_dim, h, 2 * k, Activation::Identity), &mut rng);
        // the output bias is the tail of the parameter vector: [mean | log σ]
        let n = chi.len();
        chi.values[n - k..].iter_mut().for_each(|b| *b = hyper.init_log_std);
        let w1 = ApproximatorParams::init(Architecture::mlp(state_dim + k, h, 1, Activation::Identity), &mut rng);
        let w2 = ApproximatorParams::init(Architecture::mlp(state_dim + k, h, 1, Activation::Identity), &mut rng);
        let opt = |lr: f64, p: &ApproximatorParams| Optimizer::new(hyper.optimizer, lr, p.len());
        let opts = AgentOptimizers {
            actor: opt(hyper.lr_actor, &actor),
            critic: opt(hyper.lr_critic, &critic),
            sac_actor: opt(hyper.lr_actor, &chi),
            critic1: opt(hyper.lr_critic, &w1),
            critic2: opt(hyper.lr_critic, &w2),
        };
        Ok(Self {
            noise_std: hyper.noise_std,
            state_dim,
            m,
            ddpg: DdpgNets { target_actor: actor.clone(), target_critic: critic.clone(), actor, critic },
            sac: SacNets {
                actor: chi,
                target_critic1: w1.clone(),
                target_critic2: w2.clone(),
                critic1: w1,
                critic2: w2,
            },
            opts,
            rng,
            hyper,
        })
    }

    pub fn continuous_dim(&self) -> usize {
        4 * self.m
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn normal(&mut self, rows: usize, cols: usize) -> DMatrix<f64> {
        let rng = &mut self.rng;
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    /// Selection scores from the deterministic actor (plus Gaussian noise
    /// when exploring) and a squashed policy draw (its mean when not).
    pub fn select_action(&mut self, state: &[f64], explore: bool) -> Result<HybridAction, AgentError> {
        if state.len() != self.state_dim {
            return Err(AgentError::Usage(format!("state has {} entries, expected {}", state.len(), self.state_dim)));
        }
        let s = DMatrix::from_column_slice(self.state_dim, 1, state);
        let mut a1 = self.ddpg.actor.forward(&s);
        let a2 = if explore {
            if self.noise_std > 0.0 {
                let n = self.normal(self.m, 1);
                a1.zip_apply(&n, |a, e| *a = (*a + self.noise_std * e).clamp(-1.0, 1.0));
            }
            let eps = self.normal(self.continuous_dim(), 1);
            policy_sample(&self.sac.actor, &s, &eps).action
        } else {
            policy_mean(&self.sac.actor, &s)
        };
        Ok(HybridAction::new(a1.as_slice().to_vec(), a2.as_slice().to_vec()))
    }

    pub fn sample_batch<'a>(&mut self, buffer: &'a ReplayBuffer) -> Vec<&'a Transition> {
        buffer.sample(self.hyper.batch_size, &mut self.rng)
    }

    pub fn sample_split<'a>(&mut self, buffer: &'a ReplayBuffer) -> (Vec<&'a Transition>, Vec<&'a Transition>) {
        let n = self.hyper.batch_size;
        buffer.sample_split(n, n, &mut self.rng)
    }

    pub fn draw_noise(&mut self, batch: usize) -> BatchNoise {
        let k = self.continuous_dim();
        BatchNoise { eps_next: self.normal(k, batch), eps: self.normal(k, batch) }
    }

    /// Descent directions for all five online networks, every one evaluated
    /// at the current parameters.
    pub fn gradients(&self, batch: &Batch, noise: &BatchNoise) -> Result<(AgentGrads, UpdateStats), AgentError> {
        let (xi, lambda) = (self.hyper.discount, self.hyper.entropy_weight);
        let y = ddpg_targets(&self.ddpg, &batch.r, &batch.s_next, xi);
        let (critic_loss, critic) = ddpg::mse_loss_grad(&self.ddpg.critic, &stack(&batch.s, &batch.a1), &y);
        let (actor_objective, mut actor) = ddpg::actor_objective_grad(&self.ddpg.actor, &self.ddpg.critic, &batch.s);
        actor.iter_mut().for_each(|g| *g = -*g);

        let y2 = sac_targets(&self.sac, &batch.r, &batch.s_next, &noise.eps_next, xi, lambda);
        let x2 = stack(&batch.s, &batch.a2);
        let (critic1_loss, critic1) = ddpg::mse_loss_grad(&self.sac.critic1, &x2, &y2);
        let (critic2_loss, critic2) = ddpg::mse_loss_grad(&self.sac.critic2, &x2, &y2);
        let (policy_loss, sac_actor) =
            sac::actor_loss_grad(&self.sac.actor, (&self.sac.critic1, &self.sac.critic2), &batch.s, &noise.eps, lambda);

        let stats = UpdateStats { critic_loss, actor_objective, critic1_loss, critic2_loss, policy_loss };
        let grads = AgentGrads { actor, critic, sac_actor, critic1, critic2 };
        let losses = [critic_loss, actor_objective, critic1_loss, critic2_loss, policy_loss];
        if !grads.is_finite() || losses.iter().any(|l| !l.is_finite()) {
            return Err(AgentError::Diverged(format!("non-finite update: {stats:?}")));
        }
        Ok((grads, stats))
    }

    /// Optimiser steps on the online networks, then soft target updates.
    pub fn apply(&mut self, grads: &AgentGrads) {
        self.opts.actor.step(&mut self.ddpg.actor, &grads.actor);
        self.opts.critic.step(&mut self.ddpg.critic, &grads.critic);
        self.opts.sac_actor.step(&mut self.sac.actor, &grads.sac_actor);
        self.opts.critic1.step(&mut self.sac.critic1, &grads.critic1);
        self.opts.critic2.step(&mut self.sac.critic2, &grads.critic2);
        self.update_targets();
    }

    pub fn update_targets(&mut self) {
        let tau = self.hyper.tau;
        self.ddpg.target_actor.soft_update(&self.ddpg.actor, tau);
        self.ddpg.target_critic.soft_update(&self.ddpg.critic, tau);
        self.sac.target_critic1.soft_update(&self.sac.critic1, tau);
        self.sac.target_critic2.soft_update(&self.sac.critic2, tau);
    }

    /// Plain SGD step on the online networks at `scale` times the configured
    /// actor/critic rates; targets and optimiser state are untouched.
    pub fn sgd_step(&mut self, grads: &AgentGrads, scale: f64) {
        let (la, lc) = (scale * self.hyper.lr_actor, scale * self.hyper.lr_critic);
        self.ddpg.actor.axpy(-la, &grads.actor);
        self.ddpg.critic.axpy(-lc, &grads.critic);
        self.sac.actor.axpy(-la, &grads.sac_actor);
        self.sac.critic1.axpy(-lc, &grads.critic1);
        self.sac.critic2.axpy(-lc, &grads.critic2);
    }

    /// One full update on a replay batch.
    pub fn update(&mut self, transitions: &[&Transition]) -> Result<UpdateStats, AgentError> {
        let batch = Batch::from_transitions(transitions);
        let noise = self.draw_noise(batch.len());
        let (g, stats) = self.gradients(&batch, &noise)?;
        self.apply(&g);
        Ok(stats)
    }

    pub fn decay_noise(&mut self) {
        self.noise_std *= self.hyper.noise_decay;
    }

    pub fn networks(&self) -> [(&'static str, &ApproximatorParams); 9] {
        let n = &NETWORK_NAMES;
        [
            (n[0], &self.ddpg.actor),
            (n[1], &self.ddpg.critic),
            (n[2], &self.ddpg.target_actor),
            (n[3], &self.ddpg.target_critic),
            (n[4], &self.sac.actor),
            (n[5], &self.sac.critic1),
            (n[6], &self.sac.critic2),
            (n[7], &self.sac.target_critic1),
            (n[8], &self.sac.target_critic2),
        ]
    }

    pub(crate) fn network_mut(&mut self, name: &str) -> Option<&mut ApproximatorParams> {
        Some(match name {
            "theta" => &mut self.ddpg.actor,
            "phi" => &mut self.ddpg.critic,
            "theta_bar" => &mut self.ddpg.target_actor,
            "phi_bar" => &mut self.ddpg.target_critic,
            "chi" => &mut self.sac.actor,
            "omega1" => &mut self.sac.critic1,
            "omega2" => &mut self.sac.critic2,
            "omega1_bar" => &mut self.sac.target_critic1,
            "omega2_bar" => &mut self.sac.target_critic2,
            _ => return None,
        })
    }

    /// True when every network of `self` equals the corresponding one of `other`.
    pub fn same_parameters(&self, other: &Self) -> bool {
        self.networks().iter().zip(other.networks()).all(|(a, b)| a.1 == b.1)
    }
}
