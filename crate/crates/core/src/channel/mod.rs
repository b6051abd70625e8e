//! Seeded channel synthesis from a 3D deployment: Rayleigh direct links,
//! Rician surface links and a log-distance path-loss law.

mod fading;
mod geometry;
mod rng;

pub use fading::{gen_rayleigh, gen_rician, path_loss_db, steering_vector, FadingParams};
pub use geometry::{sample_positions, Geometry, Point3};
pub use rng::{stream_rng, Stream};

use crate::linalg::{CMatrix, CVector};
use crate::model::{ChannelSet, Side, SystemParams};
use crate::units::db_to_linear;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("geometry has {got} {side} users but the system expects {expected}")]
    UserCount { side: &'static str, expected: usize, got: usize },
    #[error("invalid {name}: {reason}")]
    Invalid { name: &'static str, reason: String },
}

/// Non-fatal notes raised while building a realisation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildFlags {
    /// Some link was shorter than the reference distance and was clamped.
    pub distance_clamped: bool,
}

fn distance(a: Point3, b: Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Sine of the angle off the array broadside for a linear array along x,
/// looking from `from` towards `to`.
fn axis_sine(from: Point3, to: Point3) -> f64 {
    let d = distance(from, to);
    if d == 0.0 {
        0.0
    } else {
        (to[0] - from[0]) / d
    }
}

fn link_gain(d: f64, exp: f64, fading: &FadingParams, flags: &mut BuildFlags) -> f64 {
    let d = if d < fading.d0 {
        flags.distance_clamped = true;
        fading.d0
    } else {
        d
    };
    db_to_linear(path_loss_db(d, exp, fading.l0_db, fading.d0))
}

/// Draws a channel realisation with explicit generators for the direct links
/// and for the surface links.
pub fn build_channel_set_with(
    geom: &Geometry,
    fading: &FadingParams,
    params: &SystemParams,
    direct_rng: &mut impl Rng,
    ris_rng: &mut impl Rng,
) -> Result<(ChannelSet, BuildFlags), ChannelError> {
    fading.validate()?;
    for (side, got) in [(Side::R, geom.user_pos_r.len()), (Side::T, geom.user_pos_t.len())] {
        if got != params.users(side) {
            return Err(ChannelError::UserCount { side: side.name(), expected: params.users(side), got });
        }
    }
    let mut flags = BuildFlags::default();
    let (m, nt) = (params.m_elements, params.n_tx);

    let g_scale = link_gain(distance(geom.bs_pos, geom.ris_pos), fading.pathloss_exp_ris, fading, &mut flags);
    let arrive = steering_vector(m, axis_sine(geom.ris_pos, geom.bs_pos).asin());
    let depart = steering_vector(nt, axis_sine(geom.bs_pos, geom.ris_pos).asin());
    let los = CMatrix::from_fn(m, nt, |i, j| arrive[i] * depart[j].conj());
    let g = gen_rician(&los, fading.rician_k_db, g_scale, ris_rng);

    let mut direct = [Vec::new(), Vec::new()];
    let mut ris_links = [Vec::new(), Vec::new()];
    for (s, positions) in [&geom.user_pos_r, &geom.user_pos_t].into_iter().enumerate() {
        for &u in positions {
            let scale = link_gain(distance(geom.bs_pos, u), fading.pathloss_exp_direct, fading, &mut flags);
            let hd = gen_rayleigh(1, nt, scale, direct_rng);
            direct[s].push(hd.row(0).to_vec());

            let scale = link_gain(distance(geom.ris_pos, u), fading.pathloss_exp_ris, fading, &mut flags);
            let los_vec = steering_vector(m, axis_sine(geom.ris_pos, u).asin());
            let los = CMatrix::from_fn(1, m, |_, j| los_vec[j]);
            let h = gen_rician(&los, fading.rician_k_db, scale, ris_rng);
            ris_links[s].push(h.row(0).to_vec());
        }
    }
    let [h_direct_r, h_direct_t]: [Vec<CVector>; 2] = direct;
    let [h_ris_r, h_ris_t]: [Vec<CVector>; 2] = ris_links;
    Ok((ChannelSet { g_bs_ris: g, h_direct_r, h_direct_t, h_ris_r, h_ris_t }, flags))
}

/// Draws a realisation from one generator (direct links first, interleaved
/// per user with the surface links).
pub fn build_channel_set(
    geom: &Geometry,
    fading: &FadingParams,
    params: &SystemParams,
    rng: &mut impl Rng,
) -> Result<(ChannelSet, BuildFlags), ChannelError> {
    let mut direct = stream_rng(rng.random(), Stream::Direct);
    let mut ris = stream_rng(rng.random(), Stream::Ris);
    build_channel_set_with(geom, fading, params, &mut direct, &mut ris)
}

/// Places users and draws channels from named streams of two seeds: user
/// placement depends only on `placement_seed`, fading only on `channel_seed`.
pub fn realize(
    geom: &Geometry,
    fading: &FadingParams,
    params: &SystemParams,
    placement_seed: u64,
    channel_seed: u64,
) -> Result<(Geometry, ChannelSet, BuildFlags), ChannelError> {
    let placed = sample_positions(geom, params.u_r, params.u_t, &mut stream_rng(placement_seed, Stream::Positions))?;
    let (ch, flags) = build_channel_set_with(
        &placed,
        fading,
        params,
        &mut stream_rng(channel_seed, Stream::Direct),
        &mut stream_rng(channel_seed, Stream::Ris),
    )?;
    Ok((placed, ch, flags))
}
