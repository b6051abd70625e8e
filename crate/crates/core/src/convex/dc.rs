//! Lifted rate as a difference of concave functions, f − g, and the tangent
//! over-estimator of g.

use num_complex::Complex64;
use std::f64::consts::LN_2;

use super::lifted::{tr_re, HMat, LiftedConstants};
use super::ConvexError;
use crate::model::Side;

/// Lifted operating point: one PSD matrix per user plus its splitting ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpIterate {
    pub w_mat_r: Vec<HMat>,
    pub w_mat_t: Vec<HMat>,
    pub rho_r: Vec<f64>,
    pub rho_t: Vec<f64>,
    /// Dinkelbach parameter in force when this point was produced.
    pub mu: f64,
    /// Expansion point this iterate was obtained from, if any.
    pub surrogate_point: Option<Box<SdpIterate>>,
}

impl SdpIterate {
    pub fn w(&self, side: Side) -> &[HMat] {
        match side {
            Side::R => &self.w_mat_r,
            Side::T => &self.w_mat_t,
        }
    }

    pub fn w_mut(&mut self, side: Side) -> &mut Vec<HMat> {
        match side {
            Side::R => &mut self.w_mat_r,
            Side::T => &mut self.w_mat_t,
        }
    }

    pub fn rho(&self, side: Side) -> &[f64] {
        match side {
            Side::R => &self.rho_r,
            Side::T => &self.rho_t,
        }
    }

    pub fn rho_mut(&mut self, side: Side) -> &mut Vec<f64> {
        match side {
            Side::R => &mut self.rho_r,
            Side::T => &mut self.rho_t,
        }
    }

    /// Copy without the expansion-point history.
    pub fn detached(&self) -> Self {
        Self { surrogate_point: None, ..self.clone() }
    }
}

/// Σ_l tr(H̄_k W_l) over the user's side, and the same sum without l = k.
fn traces(lc: &LiftedConstants, it: &SdpIterate, u: usize) -> (f64, f64) {
    let user = &lc.users[u];
    let ws = it.w(user.side);
    let mut all = 0.0;
    let mut own = 0.0;
    for (l, w) in ws.iter().enumerate() {
        let t = tr_re(&user.h_outer, w);
        all += t;
        if l == user.index {
            own = t;
        }
    }
    (all, all - own)
}

fn check_rho(it: &SdpIterate) -> Result<(), ConvexError> {
    if it.rho_r.iter().chain(&it.rho_t).all(|&r| r > 0.0 && r <= 1.0) {
        Ok(())
    } else {
        Err(ConvexError::Domain("power-splitting ratio must lie in (0, 1]".into()))
    }
}

/// Arguments of the log terms of f and g for one user.
fn log_args(lc: &LiftedConstants, it: &SdpIterate, u: usize) -> (f64, f64) {
    let user = &lc.users[u];
    let rho = it.rho(user.side)[user.index];
    let (all, interf) = traces(lc, it, u);
    let base = user.noise() + user.delta2 / rho;
    (all + base, interf + base)
}

/// f = Σ log2(Σ_l tr(H̄_k W_l) + σ_z²‖h^HΓ‖² + σ² + δ²/ρ_k).
pub fn eval_f(lc: &LiftedConstants, it: &SdpIterate) -> Result<f64, ConvexError> {
    check_rho(it)?;
    Ok((0..lc.n_users()).map(|u| log_args(lc, it, u).0.log2()).sum())
}

/// g = Σ log2(Σ_{l≠k} tr(H̄_k W_l) + σ_z²‖h^HΓ‖² + σ² + δ²/ρ_k).
pub fn eval_g(lc: &LiftedConstants, it: &SdpIterate) -> Result<f64, ConvexError> {
    check_rho(it)?;
    Ok((0..lc.n_users()).map(|u| log_args(lc, it, u).1.log2()).sum())
}

/// Lifted sum rate f − g.
pub fn lifted_rate(lc: &LiftedConstants, it: &SdpIterate) -> Result<f64, ConvexError> {
    check_rho(it)?;
    Ok((0..lc.n_users())
        .map(|u| {
            let (a, b) = log_args(lc, it, u);
            (a / b).log2()
        })
        .sum())
}

/// Total consumed power as an affine function of the lifted beamformers.
pub fn lifted_power(lc: &LiftedConstants, it: &SdpIterate) -> f64 {
    let mut p = lc.power_const;
    for side in Side::BOTH {
        for w in it.w(side) {
            p += tr_re(lc.power_weight(side), w);
        }
    }
    p
}

pub fn lifted_transmit_power(it: &SdpIterate) -> f64 {
    it.w_mat_r.iter().chain(&it.w_mat_t).map(|w| w.trace().re).sum()
}

pub fn lifted_output_power(lc: &LiftedConstants, it: &SdpIterate) -> f64 {
    let mut p = lc.out_const;
    for side in Side::BOTH {
        for w in it.w(side) {
            p += tr_re(lc.out_weight(side), w);
        }
    }
    p
}

/// First-order model of g around an expansion point, affine in (W, q = 1/ρ).
///
/// g is concave in (W, q), so the tangent over-estimates it and f − g̃ is a
/// lower bound on the rate that touches it at the expansion point. In ρ
/// itself g is convex, which is why the model is kept affine in q; the ρ
/// gradients are reported through the chain rule dq/dρ = −1/ρ².
#[derive(Clone, Debug)]
pub struct Surrogate {
    pub value: f64,
    pub grad_w_r: Vec<HMat>,
    pub grad_w_t: Vec<HMat>,
    pub grad_rho_r: Vec<f64>,
    pub grad_rho_t: Vec<f64>,
    pub grad_q_r: Vec<f64>,
    pub grad_q_t: Vec<f64>,
    pub expansion: SdpIterate,
}

impl Surrogate {
    pub fn grad_w(&self, side: Side) -> &[HMat] {
        match side {
            Side::R => &self.grad_w_r,
            Side::T => &self.grad_w_t,
        }
    }

    pub fn grad_q(&self, side: Side) -> &[f64] {
        match side {
            Side::R => &self.grad_q_r,
            Side::T => &self.grad_q_t,
        }
    }

    pub fn grad_rho(&self, side: Side) -> &[f64] {
        match side {
            Side::R => &self.grad_rho_r,
            Side::T => &self.grad_rho_t,
        }
    }

    /// g̃ at another point.
    pub fn eval(&self, it: &SdpIterate) -> f64 {
        let mut v = self.value;
        for side in Side::BOTH {
            for (l, w) in it.w(side).iter().enumerate() {
                let dw = w - &self.expansion.w(side)[l];
                v += tr_re(&self.grad_w(side)[l], &dw);
            }
            for (k, rho) in it.rho(side).iter().enumerate() {
                let q0 = 1.0 / self.expansion.rho(side)[k];
                v += self.grad_q(side)[k] * (1.0 / rho - q0);
            }
        }
        v
    }
}

/// Tangent of g at `expansion`.
pub fn linearize_g(lc: &LiftedConstants, expansion: &SdpIterate) -> Result<Surrogate, ConvexError> {
    check_rho(expansion)
        .map_err(|_| ConvexError::Domain("expansion point needs power-splitting ratios in (0, 1]".into()))?;
    let n = lc.n_tx;
    let zero = HMat::zeros(n, n);
    let mut grad_w_r = vec![zero.clone(); expansion.w_mat_r.len()];
    let mut grad_w_t = vec![zero; expansion.w_mat_t.len()];
    let mut grad_q_r = vec![0.0; expansion.rho_r.len()];
    let mut grad_q_t = vec![0.0; expansion.rho_t.len()];
    let mut value = 0.0;
    for (u, user) in lc.users.iter().enumerate() {
        let den = log_args(lc, expansion, u).1;
        value += den.log2();
        let scale = 1.0 / (LN_2 * den);
        let grads = match user.side {
            Side::R => &mut grad_w_r,
            Side::T => &mut grad_w_t,
        };
        for (l, gl) in grads.iter_mut().enumerate() {
            if l != user.index {
                *gl += &user.h_outer * Complex64::from(scale);
            }
        }
        let gq = match user.side {
            Side::R => &mut grad_q_r,
            Side::T => &mut grad_q_t,
        };
        gq[user.index] = user.delta2 * scale;
    }
    let to_rho = |gq: &[f64], rho: &[f64]| gq.iter().zip(rho).map(|(g, r)| -g / (r * r)).collect::<Vec<_>>();
    Ok(Surrogate {
        value,
        grad_rho_r: to_rho(&grad_q_r, &expansion.rho_r),
        grad_rho_t: to_rho(&grad_q_t, &expansion.rho_t),
        grad_w_r,
        grad_w_t,
        grad_q_r,
        grad_q_t,
        expansion: expansion.detached(),
    })
}

/// Surrogate rate R̃ = f − g̃.
pub fn surrogate_rate(lc: &LiftedConstants, sur: &Surrogate, it: &SdpIterate) -> Result<f64, ConvexError> {
    Ok(eval_f(lc, it)? - sur.eval(it))
}
