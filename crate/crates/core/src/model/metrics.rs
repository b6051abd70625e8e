use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    check_len, BeamformingSet, ChannelSet, EhModel, ModelError, PowerSplitSet, Side, StarRisConfig,
    SurfaceMode, SystemParams,
};
use crate::linalg::{norm_sqr, CVector};

/// Effective channels of one side with the surface configuration folded in.
#[derive(Clone, Debug)]
pub struct LinkView {
    pub side: Side,
    /// Row vectors h̄^H = h_d^H + h^H·Γ·G, one per user.
    pub hbar_h: Vec<CVector>,
    /// ‖h^H Γ‖² per user (multiplies the amplification noise variance).
    pub ris_path_norm: Vec<f64>,
    /// Effective amplification-noise variance for this side.
    pub sigma2_ris: f64,
}

impl LinkView {
    pub fn new(ch: &ChannelSet, ris: &StarRisConfig, params: &SystemParams, side: Side) -> Result<Self, ModelError> {
        check_len("surface config", ch.m_elements(), ris.len())?;
        let gamma = ris.coefficients(side, params.surface);
        let mut hbar_h = Vec::with_capacity(ch.users(side));
        let mut ris_path_norm = Vec::with_capacity(ch.users(side));
        for (hd, h) in ch.direct(side).iter().zip(ch.ris(side)) {
            check_len("direct link length", ch.n_tx(), hd.len())?;
            check_len("surface link length", ch.m_elements(), h.len())?;
            let v: CVector = h.iter().zip(&gamma).map(|(hm, c)| hm.conj() * c).collect();
            let mut row = ch.g_bs_ris.row_mul(&v);
            for (r, d) in row.iter_mut().zip(hd) {
                *r += d.conj();
            }
            hbar_h.push(row);
            ris_path_norm.push(norm_sqr(&v));
        }
        Ok(Self { side, hbar_h, ris_path_norm, sigma2_ris: params.sigma2_ris(side) })
    }

    /// |h̄_k^H w|²
    pub fn gain(&self, user: usize, w: &[Complex64]) -> f64 {
        self.hbar_h[user].iter().zip(w).map(|(r, x)| r * x).sum::<Complex64>().norm_sqr()
    }

    pub fn ris_noise(&self, user: usize) -> f64 {
        self.sigma2_ris * self.ris_path_norm[user]
    }
}

/// SINR value with a flag for the 0/0 case (no decoding noise, no power).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinrValue {
    pub value: f64,
    pub degenerate: bool,
}

fn sinr_from_view(view: &LinkView, ws: &[CVector], rho: f64, sigma2: f64, delta2: f64, user: usize) -> SinrValue {
    let signal = view.gain(user, &ws[user]);
    let interference: f64 = ws.iter().enumerate().filter(|(l, _)| *l != user).map(|(_, w)| view.gain(user, w)).sum();
    let num = rho * signal;
    let den = rho * (interference + view.ris_noise(user) + sigma2) + delta2;
    if den > 0.0 {
        SinrValue { value: num / den, degenerate: false }
    } else {
        SinrValue { value: 0.0, degenerate: true }
    }
}

fn rf_from_view(view: &LinkView, ws: &[CVector], rho: f64, user: usize) -> f64 {
    let total: f64 = ws.iter().map(|w| view.gain(user, w)).sum();
    (1.0 - rho) * (total + view.ris_noise(user))
}

fn check_user(params: &SystemParams, side: Side, user: usize) -> Result<(), ModelError> {
    if user < params.users(side) {
        Ok(())
    } else {
        Err(ModelError::Dimension { what: "user index", expected: params.users(side), got: user })
    }
}

/// Effective end-to-end channel h̄ of one user (column form).
pub fn effective_channel(
    ch: &ChannelSet,
    ris: &StarRisConfig,
    params: &SystemParams,
    side: Side,
    user: usize,
) -> Result<CVector, ModelError> {
    check_user(params, side, user)?;
    let view = LinkView::new(ch, ris, params, side)?;
    Ok(view.hbar_h[user].iter().map(|z| z.conj()).collect())
}

pub fn sinr_detail(
    ch: &ChannelSet,
    ris: &StarRisConfig,
    bf: &BeamformingSet,
    ps: &PowerSplitSet,
    params: &SystemParams,
    side: Side,
    user: usize,
) -> Result<SinrValue, ModelError> {
    check_user(params, side, user)?;
    bf.validate(params)?;
    ps.validate(params)?;
    let view = LinkView::new(ch, ris, params, side)?;
    Ok(sinr_from_view(
        &view,
        bf.side(side),
        ps.side(side)[user],
        params.sigma2_awgn(side)[user],
        params.delta2(side)[user],
        user,
    ))
}

pub fn sinr(
    ch: &ChannelSet,
    ris: &StarRisConfig,
    bf: &BeamformingSet,
    ps: &PowerSplitSet,
    params: &SystemParams,
    side: Side,
    user: usize,
) -> Result<f64, ModelError> {
    sinr_detail(ch, ris, bf, ps, params, side, user).map(|s| s.value)
}

/// RF power routed to the harvester: (1−ρ)(Σ_k|h̄^H w_k|² + σ_z²‖h^H Γ‖²).
pub fn harvested_rf_power(
    ch: &ChannelSet,
    ris: &StarRisConfig,
    bf: &BeamformingSet,
    ps: &PowerSplitSet,
    params: &SystemParams,
    side: Side,
    user: usize,
) -> Result<f64, ModelError> {
    check_user(params, side, user)?;
    bf.validate(params)?;
    ps.validate(params)?;
    let view = LinkView::new(ch, ris, params, side)?;
    Ok(rf_from_view(&view, bf.side(side), ps.side(side)[user], user))
}

pub fn sum_rate(
    ch: &ChannelSet,
    ris: &StarRisConfig,
    bf: &BeamformingSet,
    ps: &PowerSplitSet,
    params: &SystemParams,
) -> Result<f64, ModelError> {
    let mut rate = 0.0;
    for side in Side::BOTH {
        for user in 0..params.users(side) {
            rate += sinr(ch, ris, bf, ps, params, side, user)?.ln_1p() / std::f64::consts::LN_2;
        }
    }
    Ok(rate)
}

/// Surface output power: Σ‖Γ_s G w‖² + σ_s²‖Γ_s‖_F² over both sides.
pub fn ris_output_power(
    ch: &ChannelSet,
    ris: &StarRisConfig,
    bf: &BeamformingSet,
    params: &SystemParams,
) -> Result<f64, ModelError> {
    check_len("surface config", ch.m_elements(), ris.len())?;
    bf.validate(params)?;
    let mut p = 0.0;
    for side in Side::BOTH {
        let gamma = ris.coefficients(side, params.surface);
        let gamma_abs2: Vec<f64> = gamma.iter().map(|c| c.norm_sqr()).collect();
        for w in bf.side(side) {
            let gw = ch.g_bs_ris.mul_vec(w);
            p += gw.iter().zip(&gamma_abs2).map(|(x, g)| g * x.norm_sqr()).sum::<f64>();
        }
        p += params.sigma2_ris(side) * gamma_abs2.iter().sum::<f64>();
    }
    Ok(p)
}

/// Power drawn by the surface hardware (switch/control and, if active, DC
/// biasing plus amplifier output scaled by ζ).
fn surface_power(ris: &StarRisConfig, params: &SystemParams, p_out: f64) -> (f64, f64) {
    let count = match params.asr_count_mode {
        super::AsrCountMode::Active => ris.on_count(),
        super::AsrCountMode::All => params.m_elements,
    } as f64;
    match params.surface {
        SurfaceMode::Active => (count * (params.p_c + params.p_dc), params.zeta * p_out),
        SurfaceMode::Passive => (count * params.p_c, 0.0),
    }
}

pub fn total_power(
    ch: &ChannelSet,
    ris: &StarRisConfig,
    bf: &BeamformingSet,
    params: &SystemParams,
) -> Result<f64, ModelError> {
    let p_out = ris_output_power(ch, ris, bf, params)?;
    let (circuit, amp) = surface_power(ris, params, p_out);
    Ok(bf.transmit_power() + params.p_cir_total() + circuit + amp)
}

pub fn energy_efficiency(
    ch: &ChannelSet,
    ris: &StarRisConfig,
    bf: &BeamformingSet,
    ps: &PowerSplitSet,
    params: &SystemParams,
) -> Result<f64, ModelError> {
    let p = total_power(ch, ris, bf, params)?;
    if !(p > 0.0) {
        return Err(ModelError::NonPositivePower(p));
    }
    Ok(sum_rate(ch, ris, bf, ps, params)? / p)
}

/// Every metric of one operating point, computed with shared intermediates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sinr_r: Vec<f64>,
    pub sinr_t: Vec<f64>,
    pub rf_r: Vec<f64>,
    pub rf_t: Vec<f64>,
    pub harvested_r: Vec<f64>,
    pub harvested_t: Vec<f64>,
    pub degenerate: bool,
    pub sum_rate: f64,
    pub transmit_power: f64,
    pub ris_output_power: f64,
    pub surface_circuit_power: f64,
    pub amplifier_power: f64,
    pub total_power: f64,
    pub ee: f64,
}

impl Metrics {
    pub fn evaluate(
        ch: &ChannelSet,
        ris: &StarRisConfig,
        bf: &BeamformingSet,
        ps: &PowerSplitSet,
        params: &SystemParams,
        eh: &EhModel,
    ) -> Result<Self, ModelError> {
        bf.validate(params)?;
        ps.validate(params)?;
        let mut out = Metrics {
            sinr_r: vec![],
            sinr_t: vec![],
            rf_r: vec![],
            rf_t: vec![],
            harvested_r: vec![],
            harvested_t: vec![],
            degenerate: false,
            sum_rate: 0.0,
            transmit_power: bf.transmit_power(),
            ris_output_power: 0.0,
            surface_circuit_power: 0.0,
            amplifier_power: 0.0,
            total_power: 0.0,
            ee: 0.0,
        };
        for side in Side::BOTH {
            let view = LinkView::new(ch, ris, params, side)?;
            let ws = bf.side(side);
            let rho = ps.side(side);
            let (mut sinrs, mut rfs) = (Vec::new(), Vec::new());
            for k in 0..params.users(side) {
                let s = sinr_from_view(&view, ws, rho[k], params.sigma2_awgn(side)[k], params.delta2(side)[k], k);
                out.degenerate |= s.degenerate;
                out.sum_rate += s.value.ln_1p() / std::f64::consts::LN_2;
                sinrs.push(s.value);
                rfs.push(rf_from_view(&view, ws, rho[k], k));
            }
            let harvested: Vec<f64> = rfs.iter().map(|&p| eh.harvest(p)).collect();
            match side {
                Side::R => (out.sinr_r, out.rf_r, out.harvested_r) = (sinrs, rfs, harvested),
                Side::T => (out.sinr_t, out.rf_t, out.harvested_t) = (sinrs, rfs, harvested),
            }
        }
        out.ris_output_power = ris_output_power(ch, ris, bf, params)?;
        let (circuit, amp) = surface_power(ris, params, out.ris_output_power);
        out.surface_circuit_power = circuit;
        out.amplifier_power = amp;
        out.total_power = out.transmit_power + params.p_cir_total() + circuit + amp;
        if !(out.total_power > 0.0) {
            return Err(ModelError::NonPositivePower(out.total_power));
        }
        out.ee = out.sum_rate / out.total_power;
        Ok(out)
    }

    pub fn sinr(&self, side: Side) -> &[f64] {
        match side {
            Side::R => &self.sinr_r,
            Side::T => &self.sinr_t,
        }
    }

    pub fn harvested(&self, side: Side) -> &[f64] {
        match side {
            Side::R => &self.harvested_r,
            Side::T => &self.harvested_t,
        }
    }

    pub fn rf(&self, side: Side) -> &[f64] {
        match side {
            Side::R => &self.rf_r,
            Side::T => &self.rf_t,
        }
    }
}
