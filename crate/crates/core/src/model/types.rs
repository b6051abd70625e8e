use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::{check_len, ModelError, SurfaceMode, SystemParams};
use crate::linalg::{CMatrix, CVector};

/// Half-space served by the surface: reflection (`r`) or transmission (`t`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    R,
    T,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::R, Side::T];

    pub fn name(self) -> &'static str {
        match self {
            Side::R => "r",
            Side::T => "t",
        }
    }
}

/// All channels of one network realisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSet {
    /// BS → surface, M × N_t.
    pub g_bs_ris: CMatrix,
    pub h_direct_r: Vec<CVector>,
    pub h_direct_t: Vec<CVector>,
    pub h_ris_r: Vec<CVector>,
    pub h_ris_t: Vec<CVector>,
}

impl ChannelSet {
    pub fn direct(&self, side: Side) -> &[CVector] {
        match side {
            Side::R => &self.h_direct_r,
            Side::T => &self.h_direct_t,
        }
    }

    pub fn ris(&self, side: Side) -> &[CVector] {
        match side {
            Side::R => &self.h_ris_r,
            Side::T => &self.h_ris_t,
        }
    }

    pub fn users(&self, side: Side) -> usize {
        self.direct(side).len()
    }

    pub fn n_tx(&self) -> usize {
        self.g_bs_ris.cols()
    }

    pub fn m_elements(&self) -> usize {
        self.g_bs_ris.rows()
    }

    pub fn validate(&self, params: &SystemParams) -> Result<(), ModelError> {
        check_len("g_bs_ris rows", params.m_elements, self.g_bs_ris.rows())?;
        check_len("g_bs_ris cols", params.n_tx, self.g_bs_ris.cols())?;
        for side in Side::BOTH {
            let u = params.users(side);
            check_len("direct links", u, self.direct(side).len())?;
            check_len("surface links", u, self.ris(side).len())?;
            for h in self.direct(side) {
                check_len("direct link length", params.n_tx, h.len())?;
            }
            for h in self.ris(side) {
                check_len("surface link length", params.m_elements, h.len())?;
            }
        }
        let finite = |v: &[Complex64]| v.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        let all_finite = self.g_bs_ris.is_finite()
            && Side::BOTH
                .iter()
                .all(|&s| self.direct(s).iter().chain(self.ris(s)).all(|h| finite(h)));
        if !all_finite {
            return Err(ModelError::InvalidParam { name: "channels", reason: "non-finite entry".into() });
        }
        Ok(())
    }
}

/// Splits an amplitude so that both halves sum to exactly 1.0 in floating
/// point: the larger share `x ≥ 0.5` is kept and the other is `1 − x`, which
/// is exact by Sterbenz's lemma.
pub fn split_pair(beta_r: f64) -> (f64, f64) {
    let b = beta_r.clamp(0.0, 1.0);
    if b >= 0.5 {
        (b, 1.0 - b)
    } else {
        let bt = 1.0 - b;
        (1.0 - bt, bt)
    }
}

/// Per-element surface configuration. Amplitudes are kept private so the
/// reflection/transmission split always sums to one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StarRisConfig {
    gain: Vec<f64>,
    on: Vec<bool>,
    beta_r: Vec<f64>,
    beta_t: Vec<f64>,
    phi_r: Vec<f64>,
    phi_t: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    gain: Vec<f64>,
    on: Vec<bool>,
    beta_r: Vec<f64>,
    beta_t: Vec<f64>,
    phi_r: Vec<f64>,
    phi_t: Vec<f64>,
}

impl<'de> Deserialize<'de> for StarRisConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawConfig::deserialize(d)?;
        if raw.beta_r.iter().zip(&raw.beta_t).any(|(r, t)| r + t != 1.0) {
            return Err(serde::de::Error::custom("beta_r + beta_t must equal 1"));
        }
        StarRisConfig::new(raw.gain, raw.on, raw.beta_r, raw.phi_r, raw.phi_t)
            .map_err(serde::de::Error::custom)
    }
}

fn wrap_phase(phi: f64) -> f64 {
    let p = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if p >= TAU {
        0.0
    } else {
        p
    }
}

impl StarRisConfig {
    /// Builds a configuration; `beta_t` is derived from `beta_r` and phases are
    /// wrapped into [0, 2π).
    pub fn new(
        gain: Vec<f64>,
        on: Vec<bool>,
        beta_r: Vec<f64>,
        phi_r: Vec<f64>,
        phi_t: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let m = gain.len();
        check_len("on", m, on.len())?;
        check_len("beta_r", m, beta_r.len())?;
        check_len("phi_r", m, phi_r.len())?;
        check_len("phi_t", m, phi_t.len())?;
        if gain.iter().chain(&beta_r).chain(&phi_r).chain(&phi_t).any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidParam { name: "surface", reason: "non-finite entry".into() });
        }
        if gain.iter().any(|&a| a < 0.0) {
            return Err(ModelError::InvalidParam { name: "gain", reason: "negative gain".into() });
        }
        let (beta_r, beta_t) = beta_r.into_iter().map(split_pair).unzip();
        Ok(Self {
            gain,
            on,
            beta_r,
            beta_t,
            phi_r: phi_r.into_iter().map(wrap_phase).collect(),
            phi_t: phi_t.into_iter().map(wrap_phase).collect(),
        })
    }

    /// Every element switched off (direct links only).
    pub fn all_off(m: usize) -> Self {
        Self::new(vec![1.0; m], vec![false; m], vec![0.5; m], vec![0.0; m], vec![0.0; m]).unwrap()
    }

    pub fn len(&self) -> usize {
        self.gain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gain.is_empty()
    }

    pub fn gain(&self) -> &[f64] {
        &self.gain
    }

    pub fn on(&self) -> &[bool] {
        &self.on
    }

    pub fn beta(&self, side: Side) -> &[f64] {
        match side {
            Side::R => &self.beta_r,
            Side::T => &self.beta_t,
        }
    }

    pub fn phi(&self, side: Side) -> &[f64] {
        match side {
            Side::R => &self.phi_r,
            Side::T => &self.phi_t,
        }
    }

    pub fn on_count(&self) -> usize {
        self.on.iter().filter(|&&f| f).count()
    }

    pub fn set_gain(&mut self, m: usize, a: f64) {
        self.gain[m] = a.max(0.0);
    }

    pub fn set_on(&mut self, m: usize, f: bool) {
        self.on[m] = f;
    }

    pub fn set_beta_r(&mut self, m: usize, b: f64) {
        let (r, t) = split_pair(b);
        self.beta_r[m] = r;
        self.beta_t[m] = t;
    }

    pub fn set_phi(&mut self, side: Side, m: usize, phi: f64) {
        let p = wrap_phase(phi);
        match side {
            Side::R => self.phi_r[m] = p,
            Side::T => self.phi_t[m] = p,
        }
    }

    /// Diagonal entry of Γ = A·F·Θ for one side: a·f·√β·e^{jφ}. A passive
    /// surface ignores the stored gains.
    pub fn coefficient(&self, side: Side, m: usize, surface: SurfaceMode) -> Complex64 {
        if !self.on[m] {
            return Complex64::new(0.0, 0.0);
        }
        let a = match surface {
            SurfaceMode::Active => self.gain[m],
            SurfaceMode::Passive => 1.0,
        };
        Complex64::from_polar(a * self.beta(side)[m].sqrt(), self.phi(side)[m])
    }

    pub fn coefficients(&self, side: Side, surface: SurfaceMode) -> CVector {
        (0..self.len()).map(|m| self.coefficient(side, m, surface)).collect()
    }
}

/// BS transmit vectors, one per user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamformingSet {
    pub w_r: Vec<CVector>,
    pub w_t: Vec<CVector>,
}

impl BeamformingSet {
    pub fn zeros(params: &SystemParams) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); params.n_tx];
        Self { w_r: vec![z.clone(); params.u_r], w_t: vec![z; params.u_t] }
    }

    pub fn side(&self, side: Side) -> &[CVector] {
        match side {
            Side::R => &self.w_r,
            Side::T => &self.w_t,
        }
    }

    pub fn side_mut(&mut self, side: Side) -> &mut Vec<CVector> {
        match side {
            Side::R => &mut self.w_r,
            Side::T => &mut self.w_t,
        }
    }

    /// Σ‖w‖² over both sides.
    pub fn transmit_power(&self) -> f64 {
        self.w_r.iter().chain(&self.w_t).map(|w| crate::linalg::norm_sqr(w)).sum()
    }

    pub fn validate(&self, params: &SystemParams) -> Result<(), ModelError> {
        for side in Side::BOTH {
            check_len("beamformers", params.users(side), self.side(side).len())?;
            for w in self.side(side) {
                check_len("beamformer length", params.n_tx, w.len())?;
            }
        }
        Ok(())
    }
}

/// Power-splitting ratios: the share of received power routed to decoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSplitSet {
    pub rho_r: Vec<f64>,
    pub rho_t: Vec<f64>,
}

impl PowerSplitSet {
    pub fn uniform(params: &SystemParams, rho: f64) -> Self {
        Self { rho_r: vec![rho; params.u_r], rho_t: vec![rho; params.u_t] }
    }

    pub fn side(&self, side: Side) -> &[f64] {
        match side {
            Side::R => &self.rho_r,
            Side::T => &self.rho_t,
        }
    }

    pub fn side_mut(&mut self, side: Side) -> &mut Vec<f64> {
        match side {
            Side::R => &mut self.rho_r,
            Side::T => &mut self.rho_t,
        }
    }

    pub fn validate(&self, params: &SystemParams) -> Result<(), ModelError> {
        for side in Side::BOTH {
            check_len("power-splitting ratios", params.users(side), self.side(side).len())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_pair_examples() {
        assert_eq!(split_pair(1.0), (1.0, 0.0));
        assert_eq!(split_pair(0.0), (0.0, 1.0));
        let (r, t) = split_pair(0.1);
        assert_eq!(r + t, 1.0);
        assert!((r - 0.1).abs() < 1e-16);
    }

    proptest! {
        #[test]
        fn amplitudes_sum_to_one_exactly(b in 0.0f64..=1.0, b2 in -1.0f64..2.0) {
            let mut cfg = StarRisConfig::new(vec![1.0], vec![true], vec![b], vec![0.0], vec![0.0]).unwrap();
            prop_assert_eq!(cfg.beta(Side::R)[0] + cfg.beta(Side::T)[0], 1.0);
            cfg.set_beta_r(0, b2);
            prop_assert_eq!(cfg.beta(Side::R)[0] + cfg.beta(Side::T)[0], 1.0);
        }

        #[test]
        fn phases_wrap_into_range(phi in -100.0f64..100.0) {
            let cfg = StarRisConfig::new(vec![1.0], vec![true], vec![0.5], vec![phi], vec![-phi]).unwrap();
            for side in Side::BOTH {
                let p = cfg.phi(side)[0];
                prop_assert!((0.0..TAU).contains(&p));
            }
        }
    }

    #[test]
    fn json_round_trip_and_conservation_check() {
        let cfg = StarRisConfig::new(vec![2.0], vec![true], vec![0.3], vec![1.0], vec![2.0]).unwrap();
        let s = serde_json::to_string(&cfg).unwrap();
        let back: StarRisConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
        let bad = r#"{"gain":[1.0],"on":[true],"beta_r":[0.3],"beta_t":[0.6],"phi_r":[0.0],"phi_t":[0.0]}"#;
        assert!(serde_json::from_str::<StarRisConfig>(bad).is_err());
    }

    #[test]
    fn passive_coefficient_ignores_gain() {
        let cfg = StarRisConfig::new(vec![3.0], vec![true], vec![1.0], vec![0.0], vec![0.0]).unwrap();
        assert_eq!(cfg.coefficient(Side::R, 0, SurfaceMode::Active), Complex64::new(3.0, 0.0));
        assert_eq!(cfg.coefficient(Side::R, 0, SurfaceMode::Passive), Complex64::new(1.0, 0.0));
        assert_eq!(cfg.coefficient(Side::T, 0, SurfaceMode::Active), Complex64::new(0.0, 0.0));
    }
}
