//! Maximum-entropy actor-critic driving the continuous heads (gain, energy
//! split, phases). Actions are tanh-squashed Gaussians.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use super::ddpg::QFunction;
use super::nn::{softplus, ApproximatorParams, Optimizer};
use super::AgentError;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SacNets {
    /// Outputs [mean | log σ], each of the action width.
    pub actor: ApproximatorParams,
    pub critic1: ApproximatorParams,
    pub critic2: ApproximatorParams,
    pub target_critic1: ApproximatorParams,
    pub target_critic2: ApproximatorParams,
}

pub struct PolicySample {
    /// tanh(u), one column per sample.
    pub action: DMatrix<f64>,
    pub log_prob: Vec<f64>,
    pub mean: DMatrix<f64>,
    /// Clamped log σ.
    pub log_std: DMatrix<f64>,
    /// Unsquashed draw u = mean + σ·ε.
    pub u: DMatrix<f64>,
}

/// ln(1 − tanh²u), stable for large |u|.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (LN_2 - u - softplus(-2.0 * u))
}

fn split(out: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = out.nrows() / 2;
    (out.rows(0, k).into_owned(), out.rows(k, k).map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)))
}

fn sample_from(mean: DMatrix<f64>, log_std: DMatrix<f64>, eps: &DMatrix<f64>) -> PolicySample {
    assert_eq!(eps.shape(), mean.shape(), "noise shape mismatch");
    let mut u = mean.clone();
    u.zip_zip_apply(&log_std, eps, |u, ls, e| *u += ls.exp() * e);
    let action = u.map(f64::tanh);
    let log_prob = (0..u.ncols())
        .map(|j| {
            (0..u.nrows())
                .map(|k| {
                    let e = eps[(k, j)];
                    -0.5 * e * e - log_std[(k, j)] - HALF_LN_2PI - log_one_minus_tanh_sq(u[(k, j)])
                })
                .sum()
        })
        .collect();
    PolicySample { action, log_prob, mean, log_std, u }
}

/// Reparameterised draw tanh(mean + σ·ε) with its log-density.
pub fn policy_sample(actor: &ApproximatorParams, s: &DMatrix<f64>, eps: &DMatrix<f64>) -> PolicySample {
    let (mean, log_std) = split(&actor.forward(s));
    sample_from(mean, log_std, eps)
}

/// Deterministic action tanh(mean).
pub fn policy_mean(actor: &ApproximatorParams, s: &DMatrix<f64>) -> DMatrix<f64> {
    let out = actor.forward(s);
    out.rows(0, out.nrows() / 2).map(f64::tanh)
}

/// y = r + ξ·[min_j q̄_j(s′, a′) − λ·log π(a′|s′)], a′ drawn from the current policy.
pub fn sac_targets(
    nets: &SacNets,
    r: &[f64],
    s_next: &DMatrix<f64>,
    eps_next: &DMatrix<f64>,
    discount: f64,
    lambda: f64,
) -> Vec<f64> {
    let p = policy_sample(&nets.actor, s_next, eps_next);
    let q1 = nets.target_critic1.q(s_next, &p.action);
    let q2 = nets.target_critic2.q(s_next, &p.action);
    (0..r.len()).map(|l| r[l] + discount * (q1[l].min(q2[l]) - lambda * p.log_prob[l])).collect()
}

/// L(χ) = mean[λ·log π(ã|s) − min_i q_i(s, ã)], ã = tanh(mean + σ·ε), with ∂L/∂χ.
pub fn actor_loss_grad(
    actor: &ApproximatorParams,
    critics: (&impl QFunction, &impl QFunction),
    s: &DMatrix<f64>,
    eps: &DMatrix<f64>,
    lambda: f64,
) -> (f64, Vec<f64>) {
    let b = s.ncols();
    let trace = actor.forward_trace(s);
    let raw = trace.output();
    let k = raw.nrows() / 2;
    let (mean, log_std) = split(raw);
    let p = sample_from(mean, log_std, eps);
    let (q1, g1) = critics.0.q_and_action_grad(s, &p.action);
    let (q2, g2) = critics.1.q_and_action_grad(s, &p.action);
    let mut loss = 0.0;
    let mut g_out = DMatrix::zeros(2 * k, b);
    for j in 0..b {
        // ties go to the first critic
        let (q, dq) = if q1[j] <= q2[j] { (q1[j], &g1) } else { (q2[j], &g2) };
        loss += lambda * p.log_prob[j] - q;
        for i in 0..k {
            let a = p.action[(i, j)];
            let t = p.u[(i, j)].tanh();
            let sig_eps = p.log_std[(i, j)].exp() * eps[(i, j)];
            let dq_du = dq[(i, j)] * (1.0 - a * a);
            g_out[(i, j)] = lambda * 2.0 * t - dq_du;
            let raw_ls = raw[(k + i, j)];
            if raw_ls > LOG_STD_MIN && raw_ls < LOG_STD_MAX {
                g_out[(k + i, j)] = lambda * (-1.0 + 2.0 * t * sig_eps) - dq_du * sig_eps;
            }
        }
    }
    g_out /= b as f64;
    let (g, _) = actor.backward(&trace, &g_out);
    (loss / b as f64, g)
}

pub fn actor_step(
    actor: &mut ApproximatorParams,
    opt: &mut Optimizer,
    critics: (&impl QFunction, &impl QFunction),
    s: &DMatrix<f64>,
    eps: &DMatrix<f64>,
    lambda: f64,
) -> Result<f64, AgentError> {
    let (loss, g) = actor_loss_grad(actor, critics, s, eps, lambda);
    if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(AgentError::Diverged(format!("policy loss {loss}")));
    }
    opt.step(actor, &g);
    Ok(loss)
}
