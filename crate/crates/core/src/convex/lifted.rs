use nalgebra::DMatrix;
use num_complex::Complex64;

use super::ConvexError;
use crate::linalg::CVector;
use crate::model::{ChannelSet, EhModel, LinkView, Side, StarRisConfig, SurfaceMode, SystemParams};

pub type HMat = DMatrix<Complex64>;

/// Per-user constants of the lifted problem.
#[derive(Clone, Debug)]
pub struct UserLift {
    pub side: Side,
    pub index: usize,
    /// Effective channel h̄ (column).
    pub hbar: CVector,
    /// H̄ = h̄ h̄^H.
    pub h_outer: HMat,
    /// σ_z²‖h^H Γ‖².
    pub ris_noise: f64,
    pub sigma2: f64,
    pub delta2: f64,
    pub gamma_min: f64,
    /// RF power the harvester needs to reach its floor, P(E_min).
    pub rf_floor: f64,
}

impl UserLift {
    /// Noise inside the ρ-scaled bracket: σ_z²‖h^H Γ‖² + σ².
    pub fn noise(&self) -> f64 {
        self.ris_noise + self.sigma2
    }
}

/// Everything the convex stage needs once the surface configuration is fixed.
#[derive(Clone, Debug)]
pub struct LiftedConstants {
    pub n_tx: usize,
    /// Diagonals of Γ_r = A F Θ_r and Γ_t.
    pub gamma_r: CVector,
    pub gamma_t: CVector,
    /// Users of both sides, reflection side first.
    pub users: Vec<UserLift>,
    /// Q_s = I + ζ G^H Γ_s^H Γ_s G: total power is Σ tr(Q_s W) + `power_const`.
    pub power_weight_r: HMat,
    pub power_weight_t: HMat,
    pub power_const: f64,
    /// D_s = G^H Γ_s^H Γ_s G: surface output is Σ tr(D_s W) + `out_const`.
    pub out_weight_r: HMat,
    pub out_weight_t: HMat,
    pub out_const: f64,
    pub p_bs_max: f64,
    pub p_i_max: f64,
    /// Pins every power-splitting ratio (fixed-ρ baseline).
    pub fixed_rho: Option<f64>,
    /// False for a passive surface (no amplifier budget).
    pub enforce_c6: bool,
}

impl LiftedConstants {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn side_users(&self, side: Side) -> impl Iterator<Item = (usize, &UserLift)> {
        self.users.iter().enumerate().filter(move |(_, u)| u.side == side)
    }

    pub fn gamma(&self, side: Side) -> &[Complex64] {
        match side {
            Side::R => &self.gamma_r,
            Side::T => &self.gamma_t,
        }
    }

    pub fn power_weight(&self, side: Side) -> &HMat {
        match side {
            Side::R => &self.power_weight_r,
            Side::T => &self.power_weight_t,
        }
    }

    pub fn out_weight(&self, side: Side) -> &HMat {
        match side {
            Side::R => &self.out_weight_r,
            Side::T => &self.out_weight_t,
        }
    }
}

/// Re tr(M W) for Hermitian M, W.
pub fn tr_re(m: &HMat, w: &HMat) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (m[(i, j)] * w[(j, i)]).re;
        }
    }
    s
}

pub fn outer(v: &[Complex64]) -> HMat {
    let n = v.len();
    HMat::from_fn(n, n, |i, j| v[i] * v[j].conj())
}

/// Builds Γ, H̄ and the affine power models for a fixed configuration.
pub fn lift(
    ch: &ChannelSet,
    ris: &StarRisConfig,
    params: &SystemParams,
    eh: &EhModel,
) -> Result<LiftedConstants, ConvexError> {
    params.validate()?;
    ch.validate(params)?;
    let n = params.n_tx;
    let m = params.m_elements;
    let g = &ch.g_bs_ris;
    let mut users = Vec::new();
    let mut weights = Vec::new();
    let mut out_const = 0.0;
    for side in Side::BOTH {
        let view = LinkView::new(ch, ris, params, side)?;
        for k in 0..params.users(side) {
            let hbar: CVector = view.hbar_h[k].iter().map(|z| z.conj()).collect();
            let e_min = params.e_min(side)[k];
            let rf_floor = if e_min > 0.0 { eh.required_rf(e_min)? } else { 0.0 };
            users.push(UserLift {
                side,
                index: k,
                h_outer: outer(&hbar),
                hbar,
                ris_noise: view.ris_noise(k),
                sigma2: params.sigma2_awgn(side)[k],
                delta2: params.delta2(side)[k],
                gamma_min: params.gamma_min(side)[k],
                rf_floor,
            });
        }
        let gamma = ris.coefficients(side, params.surface);
        let abs2: Vec<f64> = gamma.iter().map(|c| c.norm_sqr()).collect();
        // D = G^H diag(|γ|²) G
        let d = HMat::from_fn(n, n, |i, j| (0..m).map(|r| g.get(r, i).conj() * abs2[r] * g.get(r, j)).sum());
        out_const += params.sigma2_ris(side) * abs2.iter().sum::<f64>();
        weights.push((gamma, d));
    }
    let (gamma_t, out_weight_t) = weights.pop().unwrap();
    let (gamma_r, out_weight_r) = weights.pop().unwrap();
    let active = params.surface == SurfaceMode::Active;
    let count = match params.asr_count_mode {
        crate::model::AsrCountMode::Active => ris.on_count(),
        crate::model::AsrCountMode::All => params.m_elements,
    } as f64;
    let eye = HMat::identity(n, n);
    let (power_weight_r, power_weight_t, power_const) = if active {
        (
            &eye + &out_weight_r * Complex64::from(params.zeta),
            &eye + &out_weight_t * Complex64::from(params.zeta),
            params.p_cir_total() + count * (params.p_c + params.p_dc) + params.zeta * out_const,
        )
    } else {
        (eye.clone(), eye, params.p_cir_total() + count * params.p_c)
    };
    Ok(LiftedConstants {
        n_tx: n,
        gamma_r,
        gamma_t,
        users,
        power_weight_r,
        power_weight_t,
        power_const,
        out_weight_r,
        out_weight_t,
        out_const,
        p_bs_max: params.p_bs_max,
        p_i_max: params.p_i_max,
        fixed_rho: None,
        enforce_c6: active,
    })
}
