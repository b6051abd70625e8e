use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::{
    BeamformingSet, ChannelSet, EhModel, Metrics, ModelError, PowerSplitSet, Side, StarRisConfig,
    SurfaceMode, SystemParams,
};

pub const CONSTRAINT_COUNT: usize = 13;

/// Relative feasibility tolerance. A constraint `lhs ≥ rhs` counts as met when
/// `lhs − rhs ≥ −tol·max(|rhs|, unit)`, where `unit` is 1 for dimensionless
/// quantities and budgets, and 0 for the harvested-energy floors (those sit at
/// picowatt level and would be vacuous under an absolute 1e−6 W tolerance).
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Signed slack of every constraint C1..C13 (index 0 is C1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub satisfied: [bool; CONSTRAINT_COUNT],
    pub margin: [f64; CONSTRAINT_COUNT],
    pub violation_count: usize,
}

impl ConstraintReport {
    /// A report where every constraint holds with zero margin.
    pub fn all_satisfied() -> Self {
        Self { satisfied: [true; CONSTRAINT_COUNT], margin: [0.0; CONSTRAINT_COUNT], violation_count: 0 }
    }

    /// Builds a report from explicit flags; margins are ±1 placeholders.
    pub fn from_flags(satisfied: [bool; CONSTRAINT_COUNT]) -> Self {
        let margin = satisfied.map(|s| if s { 1.0 } else { -1.0 });
        let violation_count = satisfied.iter().filter(|s| !**s).count();
        Self { satisfied, margin, violation_count }
    }

    pub fn feasible(&self) -> bool {
        self.violation_count == 0
    }

    /// Whether constraint `c` (1-based) holds.
    pub fn holds(&self, c: usize) -> bool {
        self.satisfied[c - 1]
    }

    /// 1-based labels of violated constraints.
    pub fn violated(&self) -> Vec<usize> {
        (1..=CONSTRAINT_COUNT).filter(|&c| !self.holds(c)).collect()
    }
}

struct Acc {
    margin: f64,
    ok: bool,
}

impl Acc {
    fn new() -> Self {
        Self { margin: f64::INFINITY, ok: true }
    }

    fn push(&mut self, margin: f64, scale: f64) {
        self.margin = self.margin.min(margin);
        self.ok &= margin >= -FEASIBILITY_TOL * scale;
    }

    fn finish(self) -> (bool, f64) {
        (self.ok, if self.margin.is_finite() { self.margin } else { 0.0 })
    }
}

/// Evaluates C1–C13. Never fails on violation; errors only on malformed input.
pub fn check_constraints(
    ch: &ChannelSet,
    ris: &StarRisConfig,
    bf: &BeamformingSet,
    ps: &PowerSplitSet,
    params: &SystemParams,
    eh: &EhModel,
) -> Result<ConstraintReport, ModelError> {
    let metrics = Metrics::evaluate(ch, ris, bf, ps, params, eh)?;
    Ok(check_with_metrics(&metrics, ris, ps, params))
}

/// Same as [`check_constraints`] for already-evaluated metrics.
pub fn check_with_metrics(
    metrics: &Metrics,
    ris: &StarRisConfig,
    ps: &PowerSplitSet,
    params: &SystemParams,
) -> ConstraintReport {
    let mut acc: Vec<Acc> = (0..CONSTRAINT_COUNT).map(|_| Acc::new()).collect();
    for (off, side) in [(0, Side::R), (1, Side::T)] {
        for (g, gmin) in metrics.sinr(side).iter().zip(params.gamma_min(side)) {
            acc[off].push(g - gmin, gmin.max(1.0));
        }
        for (e, emin) in metrics.harvested(side).iter().zip(params.e_min(side)) {
            acc[2 + off].push(e - emin, *emin);
        }
        for &rho in ps.side(side) {
            acc[6 + off].push(rho.min(1.0 - rho), 1.0);
        }
    }
    acc[4].push(params.p_bs_max - metrics.transmit_power, params.p_bs_max.max(1.0));
    if params.surface == SurfaceMode::Active {
        acc[5].push(params.p_i_max - metrics.ris_output_power, params.p_i_max);
    } else {
        acc[5].push(params.p_i_max, params.p_i_max);
    }
    for &a in ris.gain() {
        acc[8].push(a.min(params.a_max - a), params.a_max.max(1.0));
    }
    acc[9].push(0.0, 1.0); // on/off flags are boolean by type
    acc[10].push(params.n_active_max as f64 - ris.on_count() as f64, 1.0);
    for (br, bt) in ris.beta(Side::R).iter().zip(ris.beta(Side::T)) {
        acc[11].push(-(br + bt - 1.0).abs(), 1.0);
        acc[11].push(br.min(*bt), 1.0);
    }
    for side in Side::BOTH {
        for &phi in ris.phi(side) {
            acc[12].push(phi.min(TAU - phi), 1.0);
        }
    }
    let mut satisfied = [true; CONSTRAINT_COUNT];
    let mut margin = [0.0; CONSTRAINT_COUNT];
    for (i, a) in acc.into_iter().enumerate() {
        (satisfied[i], margin[i]) = a.finish();
    }
    let violation_count = satisfied.iter().filter(|s| !**s).count();
    ConstraintReport { satisfied, margin, violation_count }
}
