//! Observation layout. Every block is listed in a versioned table so that
//! consumers can locate fields by name instead of by offset.

use serde::{Deserialize, Serialize};

use super::action::HybridAction;
use crate::channel::{path_loss_db, FadingParams, Geometry};
use crate::model::{Metrics, Side, SystemParams};
use crate::units::db_to_linear;

pub const STATE_LAYOUT_VERSION: u32 = 1;

/// Reference levels of the log-scaled entries.
pub const SINR_REF: f64 = 1.0;
pub const EH_REF_W: f64 = 1e-12;
pub const POWER_REF_W: f64 = 1.0;
/// Log-scaled entries and the previous reward are clipped to ±CLIP.
pub const CLIP: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    /// How raw values are mapped into the observation.
    pub scaling: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateLayout {
    pub version: u32,
    pub n_tx: usize,
    pub m_elements: usize,
    pub u_r: usize,
    pub u_t: usize,
    pub dim: usize,
    /// √(path loss) at the BS–surface distance; channel entries are divided by it.
    pub channel_scale: f64,
    pub fields: Vec<FieldSpec>,
}

fn user_names(params: &SystemParams) -> Vec<String> {
    Side::BOTH
        .iter()
        .flat_map(|&s| (0..params.users(s)).map(move |k| format!("{}{k}", s.name())))
        .collect()
}

impl StateLayout {
    /// D = U·2N_t + 4U + 2 + 5M + 1 with U = U_r + U_t.
    pub fn new(params: &SystemParams, geometry: &Geometry, fading: &FadingParams) -> Self {
        let users = user_names(params);
        let mut fields = Vec::new();
        let mut offset = 0;
        let mut add = |name: String, len: usize, scaling: &str| {
            fields.push(FieldSpec { name, offset, len, scaling: scaling.into() });
            offset += len;
        };
        for u in &users {
            add(format!("sinr.{u}"), 1, "log10(x/1), clipped");
        }
        for u in &users {
            add(format!("sinr_floor.{u}"), 1, "log10(x/1), clipped");
        }
        for u in &users {
            add(format!("harvested.{u}"), 1, "log10(x/1e-12 W), clipped");
        }
        for u in &users {
            add(format!("harvest_floor.{u}"), 1, "log10(x/1e-12 W), clipped");
        }
        for u in &users {
            add(format!("channel.{u}"), 2 * params.n_tx, "h̄^H re/im interleaved, divided by channel_scale");
        }
        add("p_bs_max".into(), 1, "log10(x/1 W), clipped");
        add("p_i_max".into(), 1, "log10(x/1 W), clipped");
        add("prev_action.select".into(), params.m_elements, "tanh(score)");
        add("prev_action.continuous".into(), 4 * params.m_elements, "raw in [-1, 1]");
        add("prev_reward".into(), 1, "raw, clipped");
        let d = ((geometry.bs_pos[0] - geometry.ris_pos[0]).powi(2)
            + (geometry.bs_pos[1] - geometry.ris_pos[1]).powi(2)
            + (geometry.bs_pos[2] - geometry.ris_pos[2]).powi(2))
        .sqrt()
        .max(fading.d0);
        let channel_scale = db_to_linear(path_loss_db(d, fading.pathloss_exp_ris, fading.l0_db, fading.d0)).sqrt();
        Self {
            version: STATE_LAYOUT_VERSION,
            n_tx: params.n_tx,
            m_elements: params.m_elements,
            u_r: params.u_r,
            u_t: params.u_t,
            dim: offset,
            channel_scale,
            fields,
        }
    }

    pub fn field(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn slice<'a>(&self, obs: &'a [f64], name: &str) -> Option<&'a [f64]> {
        self.field(name).map(|f| &obs[f.offset..f.offset + f.len])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub obs: Vec<f64>,
}

fn log_clip(x: f64, reference: f64) -> f64 {
    if x > 0.0 {
        (x / reference).log10().clamp(-CLIP, CLIP)
    } else {
        -CLIP
    }
}

/// Assembles the observation. `hbar_h` holds the effective channel rows of
/// every user, reflection side first.
pub fn encode_state(
    layout: &StateLayout,
    metrics: &Metrics,
    hbar_h: &[Vec<num_complex::Complex64>],
    params: &SystemParams,
    prev_action: &HybridAction,
    prev_reward: f64,
) -> EnvState {
    let mut obs = Vec::with_capacity(layout.dim);
    let sides = || Side::BOTH.into_iter();
    obs.extend(sides().flat_map(|s| metrics.sinr(s).to_vec()).map(|x| log_clip(x, SINR_REF)));
    obs.extend(sides().flat_map(|s| params.gamma_min(s).to_vec()).map(|x| log_clip(x, SINR_REF)));
    obs.extend(sides().flat_map(|s| metrics.harvested(s).to_vec()).map(|x| log_clip(x, EH_REF_W)));
    obs.extend(sides().flat_map(|s| params.e_min(s).to_vec()).map(|x| log_clip(x, EH_REF_W)));
    for row in hbar_h {
        for z in row {
            obs.push(z.re / layout.channel_scale);
            obs.push(z.im / layout.channel_scale);
        }
    }
    obs.push(log_clip(params.p_bs_max, POWER_REF_W));
    obs.push(log_clip(params.p_i_max, POWER_REF_W));
    obs.extend(prev_action.flat());
    obs.push(if prev_reward.is_finite() { prev_reward.clamp(-CLIP, CLIP) } else { -CLIP });
    debug_assert_eq!(obs.len(), layout.dim);
    EnvState { obs }
}
