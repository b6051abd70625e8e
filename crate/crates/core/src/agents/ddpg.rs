//! Deterministic-policy actor-critic driving the element-selection head.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::nn::{ApproximatorParams, Optimizer};
use super::AgentError;

/// Anything that scores (state, action) batches and can differentiate the
/// score with respect to the action.
pub trait QFunction {
    fn q(&self, s: &DMatrix<f64>, a: &DMatrix<f64>) -> Vec<f64>;
    /// Values and ∂q/∂a, one column per sample.
    fn q_and_action_grad(&self, s: &DMatrix<f64>, a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>);
}

pub(crate) fn stack(s: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(s.ncols(), a.ncols(), "batch sizes differ");
    let (ds, da) = (s.nrows(), a.nrows());
    let mut x = DMatrix::zeros(ds + da, s.ncols());
    x.rows_mut(0, ds).copy_from(s);
    x.rows_mut(ds, da).copy_from(a);
    x
}

/// Critic networks take the state stacked over the action.
impl QFunction for ApproximatorParams {
    fn q(&self, s: &DMatrix<f64>, a: &DMatrix<f64>) -> Vec<f64> {
        self.forward(&stack(s, a)).as_slice().to_vec()
    }

    fn q_and_action_grad(&self, s: &DMatrix<f64>, a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let trace = self.forward_trace(&stack(s, a));
        let q = trace.output().as_slice().to_vec();
        let (_, gin) = self.backward(&trace, &DMatrix::from_element(1, s.ncols(), 1.0));
        (q, gin.rows(s.nrows(), a.nrows()).into_owned())
    }
}

/// Mean squared error of a scalar-output network against `y`, with its
/// parameter gradient.
pub fn mse_loss_grad(net: &ApproximatorParams, x: &DMatrix<f64>, y: &[f64]) -> (f64, Vec<f64>) {
    let b = x.ncols();
    assert_eq!(y.len(), b);
    let trace = net.forward_trace(x);
    let q = trace.output();
    let resid: Vec<f64> = q.iter().zip(y).map(|(q, y)| q - y).collect();
    let loss = resid.iter().map(|r| r * r).sum::<f64>() / b as f64;
    let g_out = DMatrix::from_iterator(1, b, resid.iter().map(|r| 2.0 * r / b as f64));
    let (g, _) = net.backward(&trace, &g_out);
    (loss, g)
}

/// Critic regression step; returns the loss before the step.
pub fn critic_step(
    critic: &mut ApproximatorParams,
    opt: &mut Optimizer,
    s: &DMatrix<f64>,
    a: &DMatrix<f64>,
    y: &[f64],
) -> Result<f64, AgentError> {
    let (loss, g) = mse_loss_grad(critic, &stack(s, a), y);
    if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(AgentError::Diverged(format!("critic loss {loss}")));
    }
    opt.step(critic, &g);
    Ok(loss)
}

/// J(θ) = mean q(s, μ(s; θ)) and ∂J/∂θ.
pub fn actor_objective_grad(actor: &ApproximatorParams, critic: &impl QFunction, s: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let b = s.ncols() as f64;
    let trace = actor.forward_trace(s);
    let (q, dq_da) = critic.q_and_action_grad(s, trace.output());
    let (g, _) = actor.backward(&trace, &(dq_da / b));
    (q.iter().sum::<f64>() / b, g)
}

/// Gradient ascent on the critic's value of the actor's actions; returns
/// the objective before the step.
pub fn actor_step(
    actor: &mut ApproximatorParams,
    opt: &mut Optimizer,
    critic: &impl QFunction,
    s: &DMatrix<f64>,
) -> Result<f64, AgentError> {
    let (j, mut g) = actor_objective_grad(actor, critic, s);
    if !j.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(AgentError::Diverged(format!("actor objective {j}")));
    }
    g.iter_mut().for_each(|v| *v = -*v);
    opt.step(actor, &g);
    Ok(j)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DdpgNets {
    pub actor: ApproximatorParams,
    pub critic: ApproximatorParams,
    pub target_actor: ApproximatorParams,
    pub target_critic: ApproximatorParams,
}

/// y = r + ξ·q̄(s′, μ̄(s′)), using the target networks only.
pub fn ddpg_targets(nets: &DdpgNets, r: &[f64], s_next: &DMatrix<f64>, discount: f64) -> Vec<f64> {
    let a_next = nets.target_actor.forward(s_next);
    let q = nets.target_critic.q(s_next, &a_next);
    r.iter().zip(q).map(|(r, q)| r + discount * q).collect()
}
