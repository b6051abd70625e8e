use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::model::{Side, StarRisConfig, SurfaceMode, SystemParams};

/// Raw agent output: a selection score per element and four squashed
/// continuous heads laid out as [gain | β_r | φ_r | φ_t], each of length M.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridAction {
    pub discrete_raw: Vec<f64>,
    pub continuous_raw: Vec<f64>,
}

impl HybridAction {
    /// Builds an action, clamping the continuous heads into [−1, 1].
    pub fn new(discrete_raw: Vec<f64>, continuous_raw: Vec<f64>) -> Self {
        let continuous_raw = continuous_raw.into_iter().map(|c| c.clamp(-1.0, 1.0)).collect();
        Self { discrete_raw, continuous_raw }
    }

    pub fn zeros(m: usize) -> Self {
        Self { discrete_raw: vec![0.0; m], continuous_raw: vec![0.0; 4 * m] }
    }

    pub fn m(&self) -> usize {
        self.discrete_raw.len()
    }

    /// Flat 5M encoding used in the state: tanh of the selection scores,
    /// then the continuous heads.
    pub fn flat(&self) -> Vec<f64> {
        self.discrete_raw.iter().map(|d| d.tanh()).chain(self.continuous_raw.iter().copied()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.discrete_raw.iter().chain(&self.continuous_raw).all(|v| v.is_finite())
    }

    fn head(&self, k: usize) -> &[f64] {
        let m = self.m();
        &self.continuous_raw[k * m..(k + 1) * m]
    }
}

/// Maps raw actions onto valid surface configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionDecoder {
    pub m: usize,
    pub n_active_max: usize,
    pub a_max: f64,
    pub surface: SurfaceMode,
    /// Phases held fixed regardless of the action (random-phase baseline).
    pub fixed_phases: Option<(Vec<f64>, Vec<f64>)>,
}

/// Maps c ∈ [−1, 1] onto [0, 2π) with c = 0 landing on π.
fn phase(c: f64) -> f64 {
    let p = PI * (c + 1.0);
    if p >= TAU {
        p - TAU
    } else {
        p
    }
}

impl ActionDecoder {
    pub fn new(params: &SystemParams) -> Self {
        Self {
            m: params.m_elements,
            n_active_max: params.n_active_max,
            a_max: params.a_max,
            surface: params.surface,
            fixed_phases: None,
        }
    }

    pub fn with_fixed_phases(mut self, phi_r: Vec<f64>, phi_t: Vec<f64>) -> Self {
        self.fixed_phases = Some((phi_r, phi_t));
        self
    }

    /// Element selection: on iff tanh(score) > 0, then at most N elements
    /// survive, the highest scores first (ties to the lowest index).
    pub fn select(&self, scores: &[f64]) -> Vec<bool> {
        let mut on: Vec<bool> = scores.iter().map(|s| s.tanh() > 0.0).collect();
        let mut chosen: Vec<usize> = (0..on.len()).filter(|&i| on[i]).collect();
        if chosen.len() > self.n_active_max {
            chosen.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            for &i in &chosen[self.n_active_max..] {
                on[i] = false;
            }
        }
        on
    }

    pub fn decode(&self, raw: &HybridAction) -> StarRisConfig {
        assert_eq!(raw.m(), self.m, "action width does not match the surface");
        assert_eq!(raw.continuous_raw.len(), 4 * self.m, "continuous head must have 4M entries");
        let c = |x: f64| x.clamp(-1.0, 1.0);
        let gain: Vec<f64> = match self.surface {
            SurfaceMode::Active => raw.head(0).iter().map(|&x| self.a_max * (c(x) + 1.0) / 2.0).collect(),
            SurfaceMode::Passive => vec![1.0; self.m],
        };
        let beta_r: Vec<f64> = raw.head(1).iter().map(|&x| (c(x) + 1.0) / 2.0).collect();
        let (phi_r, phi_t) = match &self.fixed_phases {
            Some((r, t)) => (r.clone(), t.clone()),
            None => (
                raw.head(2).iter().map(|&x| phase(c(x))).collect(),
                raw.head(3).iter().map(|&x| phase(c(x))).collect(),
            ),
        };
        StarRisConfig::new(gain, self.select(&raw.discrete_raw), beta_r, phi_r, phi_t)
            .expect("decoded configuration is valid by construction")
    }

    /// Reset configuration: the first N elements on, half gain (unit gain
    /// when passive), an even energy split and zero phases.
    pub fn initial(&self) -> StarRisConfig {
        let gain = match self.surface {
            SurfaceMode::Active => self.a_max / 2.0,
            SurfaceMode::Passive => 1.0,
        };
        let (phi_r, phi_t) = self.fixed_phases.clone().unwrap_or((vec![0.0; self.m], vec![0.0; self.m]));
        StarRisConfig::new(
            vec![gain; self.m],
            (0..self.m).map(|i| i < self.n_active_max).collect(),
            vec![0.5; self.m],
            phi_r,
            phi_t,
        )
        .expect("initial configuration is valid")
    }

    /// Inverse of [`decode`](Self::decode) on the continuous heads, used to
    /// express a configuration as an action (selection scores ±1).
    pub fn encode(&self, ris: &StarRisConfig) -> HybridAction {
        let m = self.m;
        let mut cont = Vec::with_capacity(4 * m);
        cont.extend(ris.gain().iter().map(|a| if self.a_max > 0.0 { 2.0 * a / self.a_max - 1.0 } else { -1.0 }));
        cont.extend(ris.beta(Side::R).iter().map(|b| 2.0 * b - 1.0));
        for side in Side::BOTH {
            cont.extend(ris.phi(side).iter().map(|p| p / PI - 1.0));
        }
        HybridAction::new(ris.on().iter().map(|&f| if f { 1.0 } else { -1.0 }).collect(), cont)
    }
}

/// Decodes with the parameters' surface settings and no fixed phases.
pub fn decode_action(raw: &HybridAction, params: &SystemParams) -> StarRisConfig {
    ActionDecoder::new(params).decode(raw)
}
