//! Physical-layer model: parameters, configuration types, the non-linear
//! energy-harvesting curve, metrics and the constraint set C1–C13.

mod constraints;
mod eh;
mod metrics;
mod params;
mod types;

pub use constraints::{check_constraints, check_with_metrics, ConstraintReport, CONSTRAINT_COUNT, FEASIBILITY_TOL};
pub use eh::{inverse_eh, nonlinear_eh, EhModel, EhParams};
pub use metrics::{
    effective_channel, energy_efficiency, harvested_rf_power, ris_output_power, sinr, sinr_detail,
    sum_rate, total_power, LinkView, Metrics, SinrValue,
};
pub use params::{AsrCountMode, SurfaceMode, SystemParams};
pub use types::{split_pair, BeamformingSet, ChannelSet, PowerSplitSet, Side, StarRisConfig};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("energy target {target} W is at or above the harvester saturation {m_sat} W")]
    InfeasibleTarget { target: f64, m_sat: f64 },
    #[error("total power must be positive, got {0} W")]
    NonPositivePower(f64),
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), ModelError> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::Dimension { what, expected, got })
    }
}
