use serde::{Deserialize, Serialize};

use super::{check_len, ModelError, Side};
use crate::units::dbm_to_watt;

/// Whether the surface amplifies (active) or only reflects/transmits (passive).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceMode {
    #[default]
    Active,
    /// Unit gain, no amplification noise, no amplifier power.
    Passive,
}

/// Which element count multiplies the per-element circuit power.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AsrCountMode {
    /// Number of elements currently switched on.
    #[default]
    Active,
    /// All M elements, as in the lifted power expression.
    All,
}

/// System-level constants. Every power is in watts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub n_tx: usize,
    pub m_elements: usize,
    pub n_active_max: usize,
    pub u_r: usize,
    pub u_t: usize,
    pub p_bs_max: f64,
    pub p_i_max: f64,
    pub a_max: f64,
    pub sigma2_ris_r: f64,
    pub sigma2_ris_t: f64,
    pub sigma2_awgn_r: Vec<f64>,
    pub sigma2_awgn_t: Vec<f64>,
    pub delta2_r: Vec<f64>,
    pub delta2_t: Vec<f64>,
    pub gamma_min_r: Vec<f64>,
    pub gamma_min_t: Vec<f64>,
    pub e_min_r: Vec<f64>,
    pub e_min_t: Vec<f64>,
    pub p_cir_bs: f64,
    pub p_cir_user: f64,
    pub p_c: f64,
    pub p_dc: f64,
    pub zeta: f64,
    #[serde(default)]
    pub surface: SurfaceMode,
    #[serde(default)]
    pub asr_count_mode: AsrCountMode,
}

impl SystemParams {
    /// Uniform per-user settings for a topology; powers in dBm where the
    /// simulation table quotes them.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        n_tx: usize,
        m_elements: usize,
        n_active_max: usize,
        u_r: usize,
        u_t: usize,
        gamma_min: f64,
        e_min: f64,
    ) -> Self {
        let sigma2 = dbm_to_watt(-80.0);
        let delta2 = dbm_to_watt(-50.0);
        Self {
            n_tx,
            m_elements,
            n_active_max,
            u_r,
            u_t,
            p_bs_max: dbm_to_watt(40.0),
            p_i_max: dbm_to_watt(5.0),
            a_max: 4.0,
            sigma2_ris_r: sigma2,
            sigma2_ris_t: sigma2,
            sigma2_awgn_r: vec![sigma2; u_r],
            sigma2_awgn_t: vec![sigma2; u_t],
            delta2_r: vec![delta2; u_r],
            delta2_t: vec![delta2; u_t],
            gamma_min_r: vec![gamma_min; u_r],
            gamma_min_t: vec![gamma_min; u_t],
            e_min_r: vec![e_min; u_r],
            e_min_t: vec![e_min; u_t],
            p_cir_bs: dbm_to_watt(30.0),
            p_cir_user: dbm_to_watt(7.0),
            p_c: dbm_to_watt(-10.0),
            p_dc: dbm_to_watt(-5.0),
            zeta: 1.25,
            surface: SurfaceMode::Active,
            asr_count_mode: AsrCountMode::Active,
        }
    }

    /// Full-scale topology: N_t = 5, M = 16, 3 + 3 users.
    /// Floors default to γ_min = 1 and E_min = 1 fW: with the default
    /// geometry the received RF power sits around 1e-8 W, which the EH curve
    /// maps to a few fW.
    pub const DEFAULT_GAMMA_MIN: f64 = 1.0;
    pub const DEFAULT_E_MIN: f64 = 1e-15;

    pub fn table_one() -> Self {
        Self::uniform(5, 16, 12, 3, 3, Self::DEFAULT_GAMMA_MIN, Self::DEFAULT_E_MIN)
    }

    /// Reduced instance used for quick runs and CI.
    pub fn desk() -> Self {
        Self::uniform(3, 8, 6, 1, 1, Self::DEFAULT_GAMMA_MIN, Self::DEFAULT_E_MIN)
    }

    pub fn users(&self, side: Side) -> usize {
        match side {
            Side::R => self.u_r,
            Side::T => self.u_t,
        }
    }

    pub fn total_users(&self) -> usize {
        self.u_r + self.u_t
    }

    pub fn sigma2_ris(&self, side: Side) -> f64 {
        if self.surface == SurfaceMode::Passive {
            return 0.0;
        }
        match side {
            Side::R => self.sigma2_ris_r,
            Side::T => self.sigma2_ris_t,
        }
    }

    pub fn sigma2_awgn(&self, side: Side) -> &[f64] {
        match side {
            Side::R => &self.sigma2_awgn_r,
            Side::T => &self.sigma2_awgn_t,
        }
    }

    pub fn delta2(&self, side: Side) -> &[f64] {
        match side {
            Side::R => &self.delta2_r,
            Side::T => &self.delta2_t,
        }
    }

    pub fn gamma_min(&self, side: Side) -> &[f64] {
        match side {
            Side::R => &self.gamma_min_r,
            Side::T => &self.gamma_min_t,
        }
    }

    pub fn e_min(&self, side: Side) -> &[f64] {
        match side {
            Side::R => &self.e_min_r,
            Side::T => &self.e_min_t,
        }
    }

    pub fn p_cir_total(&self) -> f64 {
        self.p_cir_bs + self.total_users() as f64 * self.p_cir_user
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |name: &'static str, reason: &str| {
            Err(ModelError::InvalidParam { name, reason: reason.to_string() })
        };
        if self.n_tx == 0 {
            return bad("n_tx", "must be at least 1");
        }
        if self.m_elements == 0 {
            return bad("m_elements", "must be at least 1");
        }
        if self.n_active_max == 0 || self.n_active_max > self.m_elements {
            return bad("n_active_max", "must lie in 1..=m_elements");
        }
        if !(self.zeta >= 1.0) {
            return bad("zeta", "must be at least 1");
        }
        if !(self.a_max >= 0.0) {
            return bad("a_max", "must be non-negative");
        }
        let scalars = [
            ("p_bs_max", self.p_bs_max),
            ("p_i_max", self.p_i_max),
            ("sigma2_ris_r", self.sigma2_ris_r),
            ("sigma2_ris_t", self.sigma2_ris_t),
            ("p_cir_bs", self.p_cir_bs),
            ("p_cir_user", self.p_cir_user),
            ("p_c", self.p_c),
            ("p_dc", self.p_dc),
        ];
        for (name, v) in scalars {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(name, "must be a finite non-negative power");
            }
        }
        for side in Side::BOTH {
            let u = self.users(side);
            check_len("sigma2_awgn", u, self.sigma2_awgn(side).len())?;
            check_len("delta2", u, self.delta2(side).len())?;
            check_len("gamma_min", u, self.gamma_min(side).len())?;
            check_len("e_min", u, self.e_min(side).len())?;
            let lists: [(&'static str, &[f64]); 4] = [
                ("sigma2_awgn", self.sigma2_awgn(side)),
                ("delta2", self.delta2(side)),
                ("gamma_min", self.gamma_min(side)),
                ("e_min", self.e_min(side)),
            ];
            for (name, vals) in lists {
                if vals.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return bad(name, "entries must be finite and non-negative");
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_is_valid() {
        let p = SystemParams::table_one();
        p.validate().unwrap();
        assert_eq!((p.n_tx, p.m_elements, p.u_r, p.u_t), (5, 16, 3, 3));
        assert!((p.p_bs_max - 10.0).abs() < 1e-12);
        assert!((p.p_cir_total() - (1.0 + 6.0 * dbm_to_watt(7.0))).abs() < 1e-15);
    }

    #[test]
    fn validation_names_the_field() {
        let mut p = SystemParams::table_one();
        p.n_active_max = 17;
        let err = p.validate().unwrap_err();
        assert!(err.to_string().contains("n_active_max"));
        let mut p = SystemParams::table_one();
        p.zeta = 0.5;
        assert!(p.validate().unwrap_err().to_string().contains("zeta"));
        let mut p = SystemParams::table_one();
        p.e_min_t.pop();
        assert!(matches!(p.validate(), Err(ModelError::Dimension { .. })));
    }

    #[test]
    fn passive_surface_has_no_amplifier_noise() {
        let mut p = SystemParams::table_one();
        p.surface = SurfaceMode::Passive;
        assert_eq!(p.sigma2_ris(Side::R), 0.0);
    }
}
