use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::conic::ConicBackend;
use super::dc::{lifted_power, lifted_rate, linearize_g, surrogate_rate, SdpIterate};
use super::inner::{lifted_violations, phase_one, solve_inner_sdp};
use super::lifted::{outer, LiftedConstants};
use super::recover::recover_solution;
use super::{ConvexError, ConvexSettings};
use crate::channel::{stream_rng, Stream};
use crate::linalg::norm_sqr;
use crate::model::{BeamformingSet, ChannelSet, EhModel, Metrics, PowerSplitSet, Side, StarRisConfig, SystemParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Infeasible,
}

/// One outer iteration, as emitted to the harness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    /// μ used in this iteration's sub-problem.
    pub mu: f64,
    pub r_tilde: f64,
    pub power: f64,
    /// R̃ − μ·P at the accepted point.
    pub gap: f64,
    /// False if the sub-problem did not improve and the expansion point was kept.
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub bf: BeamformingSet,
    pub ps: PowerSplitSet,
    /// Final ratio R̃/P of the lifted solution.
    pub mu_star: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Lifted ratio minus the energy efficiency of the recovered vectors.
    pub sdp_objective_gap: f64,
    pub trace: Vec<TraceRecord>,
    /// Metrics of the recovered (bf, ps).
    pub metrics: Metrics,
    pub lifted: SdpIterate,
    pub rank_one: bool,
}

/// Equal-power maximum-ratio beamformers at half the budget and ρ = 0.5
/// (or the pinned ratio).
pub fn mrt_start(lc: &LiftedConstants) -> SdpIterate {
    let per_user = lc.p_bs_max / 2.0 / lc.n_users().max(1) as f64;
    let mut it = SdpIterate { w_mat_r: vec![], w_mat_t: vec![], rho_r: vec![], rho_t: vec![], mu: 0.0, surrogate_point: None };
    for user in &lc.users {
        let norm = norm_sqr(&user.hbar).sqrt();
        let w: Vec<Complex64> = if norm > 0.0 {
            user.hbar.iter().map(|z| z * (per_user.sqrt() / norm)).collect()
        } else {
            let mut e = vec![Complex64::new(0.0, 0.0); lc.n_tx];
            e[0] = Complex64::new(per_user.sqrt(), 0.0);
            e
        };
        it.w_mut(user.side).push(outer(&w));
        it.rho_mut(user.side).push(lc.fixed_rho.unwrap_or(0.5));
    }
    it
}

/// A lifted point satisfying every requirement: the MRT start if it is
/// feasible, otherwise the phase-1 solution.
pub fn feasible_start(lc: &LiftedConstants, backend: &dyn ConicBackend) -> Result<SdpIterate, ConvexError> {
    let start = mrt_start(lc);
    if lifted_violations(lc, &start, 0.0).is_empty() {
        return Ok(start);
    }
    phase_one(lc, backend)
}

/// Result of the lifted Dinkelbach loop before vector recovery.
#[derive(Clone, Debug)]
pub struct LiftedOutcome {
    pub iterate: SdpIterate,
    pub mu_star: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub trace: Vec<TraceRecord>,
}

/// Dinkelbach iterations on the lifted problem: linearise g at the current
/// point, maximise R̃ − μP, set μ ← R̃/P, stop once |R̃ − μP| < ε.
pub fn dinkelbach_lifted(
    lc: &LiftedConstants,
    settings: &ConvexSettings,
    backend: &dyn ConicBackend,
) -> Result<LiftedOutcome, ConvexError> {
    let mut x = feasible_start(lc, backend)?;
    let mut mu = 0.0;
    let mut trace = Vec::new();
    let mut status = SolveStatus::MaxIter;
    for k in 0..settings.k_max {
        let sur = linearize_g(lc, &x)?;
        let at_expansion = lifted_rate(lc, &x)? - mu * lifted_power(lc, &x);
        let (next, accepted) = match solve_inner_sdp(lc, &sur, mu, backend) {
            Ok(sol) if sol.objective >= at_expansion => (sol.iterate, true),
            Ok(_) | Err(ConvexError::Backend(_)) => (x.clone(), false),
            Err(e) => return Err(e),
        };
        let r_tilde = surrogate_rate(lc, &sur, &next)?;
        let power = lifted_power(lc, &next);
        let gap = r_tilde - mu * power;
        trace.push(TraceRecord { k, mu, r_tilde, power, gap, accepted });
        x = next;
        let new_mu = r_tilde / power;
        // never let round-off push μ backwards
        mu = mu.max(new_mu);
        if gap.abs() < settings.epsilon {
            status = SolveStatus::Converged;
            break;
        }
    }
    x.mu = mu;
    Ok(LiftedOutcome { iterate: x, mu_star: mu, iterations: trace.len(), status, trace })
}

/// Algorithm 1 end to end: lifted Dinkelbach loop followed by rank-one
/// recovery and evaluation with the exact model.
pub fn dinkelbach(
    ch: &ChannelSet,
    ris: &StarRisConfig,
    params: &SystemParams,
    eh: &EhModel,
    lc: &LiftedConstants,
    settings: &ConvexSettings,
    backend: &dyn ConicBackend,
) -> Result<SolveOutcome, ConvexError> {
    let lifted = dinkelbach_lifted(lc, settings, backend)?;
    let bound = lifted_rate(lc, &lifted.iterate)? / lifted_power(lc, &lifted.iterate);
    let mut rng = stream_rng(settings.seed, Stream::Noise);
    let rec = recover_solution(
        &lifted.iterate,
        ch,
        ris,
        params,
        eh,
        settings.rank_tol,
        settings.candidates,
        &mut rng,
        bound,
    )?;
    Ok(SolveOutcome {
        sdp_objective_gap: bound - rec.metrics.ee,
        bf: rec.bf,
        ps: rec.ps,
        mu_star: lifted.mu_star,
        iterations: lifted.iterations,
        status: lifted.status,
        trace: lifted.trace,
        metrics: rec.metrics,
        lifted: lifted.iterate,
        rank_one: rec.exact,
    })
}

/// Convenience wrapper: lift, then run [`dinkelbach`].
pub fn solve_convex_stage(
    ch: &ChannelSet,
    ris: &StarRisConfig,
    params: &SystemParams,
    eh: &EhModel,
    settings: &ConvexSettings,
    backend: &dyn ConicBackend,
) -> Result<SolveOutcome, ConvexError> {
    if settings.fixed_rho.is_some_and(|r| !(r > 0.0 && r < 1.0)) {
        return Err(ConvexError::Domain("fixed power-splitting ratio must lie in (0, 1)".into()));
    }
    if !(settings.margin >= 0.0 && settings.margin < 0.5) {
        return Err(ConvexError::Domain("requirement margin must lie in [0, 0.5)".into()));
    }
    let mut lc = super::lift(ch, ris, params, eh)?;
    lc.fixed_rho = settings.fixed_rho;
    if settings.margin > 0.0 {
        let m = settings.margin;
        let mut tight = lc.clone();
        for u in &mut tight.users {
            u.gamma_min *= 1.0 + m;
            u.rf_floor *= 1.0 + m;
        }
        tight.p_i_max *= 1.0 - m;
        match dinkelbach(ch, ris, params, eh, &tight, settings, backend) {
            Err(ConvexError::Infeasible { .. }) => {}
            r => return r,
        }
    }
    dinkelbach(ch, ris, params, eh, &lc, settings, backend)
}

/// Lifted point of an explicit (bf, ps) pair.
pub fn lift_point(bf: &BeamformingSet, ps: &PowerSplitSet) -> SdpIterate {
    let mut it = SdpIterate { w_mat_r: vec![], w_mat_t: vec![], rho_r: ps.rho_r.clone(), rho_t: ps.rho_t.clone(), mu: 0.0, surrogate_point: None };
    for side in Side::BOTH {
        for w in bf.side(side) {
            it.w_mut(side).push(outer(w));
        }
    }
    it
}
