//! Simulation and optimisation toolkit for active STAR-RIS-aided SWIPT downlinks.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] evaluates every physical-layer quantity (effective channels,
//!   SINR, harvested power, non-linear energy harvesting, power consumption,
//!   energy efficiency) and the constraint set of the joint design problem.
//! * [`channel`] synthesises seeded channel realisations from a 3D geometry.
//! * [`convex`] optimises BS beamforming and power-splitting ratios for a
//!   fixed surface configuration (SDR lifting, DC surrogate, Dinkelbach loop).
//! * [`env`] wraps the surface-configuration sub-problem as an episodic MDP.
//! * [`agents`] holds the hybrid discrete/continuous actor-critic learner.
//! * [`meta`] adds first-order meta-training and meta-adaptation on top.

// Links the system OpenBLAS used by the conic backend's PSD cone.
use openblas_src as _;

pub mod agents;
pub mod channel;
pub mod convex;
pub mod env;
pub mod linalg;
pub mod meta;
pub mod model;
pub mod units;
