//! Sub-problem (i): beamforming and power splitting for a fixed surface
//! configuration. Beamformers are lifted to PSD matrices, the rate is split
//! into a difference of concave functions whose subtracted part is
//! linearised, and a Dinkelbach loop handles the energy-efficiency ratio.

pub mod conic;
mod dc;
mod dinkelbach;
mod inner;
mod lifted;
mod recover;

pub use conic::{ClarabelBackend, ConicBackend};
pub use dc::{
    eval_f, eval_g, lifted_output_power, lifted_power, lifted_rate, lifted_transmit_power, linearize_g,
    surrogate_rate, SdpIterate, Surrogate,
};
pub use dinkelbach::{
    dinkelbach, dinkelbach_lifted, feasible_start, lift_point, mrt_start, solve_convex_stage, LiftedOutcome,
    SolveOutcome, SolveStatus, TraceRecord,
};
pub use inner::{lifted_violations, phase_one, solve_inner_sdp, InnerSolution, SAFETY};
pub use lifted::{lift, outer, tr_re, HMat, LiftedConstants, UserLift};
pub use recover::{recover_rank1, recover_solution, Recovered};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvexError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("infeasible: {}", certificate.join(", "))]
    Infeasible { certificate: Vec<String> },
    #[error("rank-one recovery found no feasible candidate (lifted bound {bound})")]
    RecoveryFailed { bound: f64 },
    #[error("conic backend: {0}")]
    Backend(String),
}

/// Tolerances and limits of the outer loop and the recovery step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexSettings {
    /// Stop once |R̃ − μP| < epsilon.
    pub epsilon: f64,
    pub k_max: usize,
    /// λ₂/λ₁ below which a lifted matrix counts as rank one.
    pub rank_tol: f64,
    /// Gaussian-randomisation candidates.
    pub candidates: usize,
    pub seed: u64,
    /// Hold every ρ at this value instead of optimising it.
    #[serde(default)]
    pub fixed_rho: Option<f64>,
    /// Relative back-off on the SINR, harvesting and amplifier-budget
    /// requirements, so the returned point is not exactly tight. Dropped
    /// again when the backed-off problem is infeasible.
    #[serde(default)]
    pub margin: f64,
}

impl Default for ConvexSettings {
    fn default() -> Self {
        Self { epsilon: 1e-2, k_max: 10, rank_tol: 1e-6, candidates: 200, seed: 0, fixed_rho: None, margin: 0.0 }
    }
}
