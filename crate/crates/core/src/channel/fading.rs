use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::ChannelError;
use crate::linalg::{CMatrix, CVector};
use crate::units::db_to_linear;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingParams {
    /// Rician factor of the surface links (dB).
    pub rician_k_db: f64,
    pub pathloss_exp_direct: f64,
    pub pathloss_exp_ris: f64,
    /// Loss at the reference distance (dB, negative).
    pub l0_db: f64,
    /// Reference distance (m).
    pub d0: f64,
    pub seed: u64,
}

impl Default for FadingParams {
    fn default() -> Self {
        Self { rician_k_db: 5.0, pathloss_exp_direct: 3.5, pathloss_exp_ris: 2.2, l0_db: -30.0, d0: 1.0, seed: 0 }
    }
}

impl FadingParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.d0 > 0.0) {
            return Err(ChannelError::Invalid { name: "d0", reason: "must be positive".into() });
        }
        for (name, v) in [
            ("rician_k_db", self.rician_k_db),
            ("pathloss_exp_direct", self.pathloss_exp_direct),
            ("pathloss_exp_ris", self.pathloss_exp_ris),
            ("l0_db", self.l0_db),
        ] {
            if !v.is_finite() {
                return Err(ChannelError::Invalid { name, reason: "must be finite".into() });
            }
        }
        Ok(())
    }
}

/// Log-distance path loss, `l0_db − 10·exp·log10(d/d0)`.
pub fn path_loss_db(d: f64, exp: f64, l0_db: f64, d0: f64) -> f64 {
    l0_db - 10.0 * exp * (d / d0).log10()
}

/// Half-wavelength ULA response, entry k = e^{jπ k sin θ}.
pub fn steering_vector(n_el: usize, spatial_angle: f64) -> CVector {
    let s = spatial_angle.sin();
    (0..n_el).map(|k| Complex64::from_polar(1.0, PI * k as f64 * s)).collect()
}

fn cn(rng: &mut impl Rng, scale: f64) -> Complex64 {
    let sd = (scale / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}

/// i.i.d. CN(0, scale) entries.
pub fn gen_rayleigh(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| cn(rng, scale))
}

/// √scale·(√(K/(K+1))·LoS + √(1/(K+1))·NLoS).
pub fn gen_rician(los: &CMatrix, k_db: f64, scale: f64, rng: &mut impl Rng) -> CMatrix {
    let k = db_to_linear(k_db);
    let (w_los, w_nlos) = if k.is_infinite() { (1.0, 0.0) } else { ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt()) };
    let s = scale.sqrt();
    CMatrix::from_fn(los.rows(), los.cols(), |i, j| {
        let nlos = cn(rng, 1.0);
        s * (w_los * los.get(i, j) + w_nlos * nlos)
    })
}
