//! Experiment configuration: one TOML file, overridable key by key with
//! dotted paths (`system.e_min_w=2.5e-15`).
//!
//! The `[system]`, `[eh]` and `[convex]` sections carry the simulation-table
//! constants and must list every one of them; everything else has defaults.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use starris_core::agents::AgentHyper;
use starris_core::channel::{FadingParams, Geometry};
use starris_core::convex::ConvexSettings;
use starris_core::meta::MetaHyper;
use starris_core::model::{EhModel, EhParams, SurfaceMode, SystemParams};
use starris_core::units::dbm_to_watt;

use crate::BenchError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Scheme1,
    Scheme2,
    Baseline1,
    Baseline2,
    Baseline3,
    Baseline4,
}

impl Scheme {
    pub const ALL: [Scheme; 6] =
        [Scheme::Scheme1, Scheme::Scheme2, Scheme::Baseline1, Scheme::Baseline2, Scheme::Baseline3, Scheme::Baseline4];

    pub fn id(self) -> &'static str {
        match self {
            Scheme::Scheme1 => "scheme1",
            Scheme::Scheme2 => "scheme2",
            Scheme::Baseline1 => "baseline1",
            Scheme::Baseline2 => "baseline2",
            Scheme::Baseline3 => "baseline3",
            Scheme::Baseline4 => "baseline4",
        }
    }

    /// Legend label.
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Scheme1 => "Proposed Scheme 1",
            Scheme::Scheme2 => "Proposed Scheme 2",
            Scheme::Baseline1 => "Baseline 1 (linear EH)",
            Scheme::Baseline2 => "Baseline 2 (fixed PS ratio)",
            Scheme::Baseline3 => "Baseline 3 (random phases)",
            Scheme::Baseline4 => "Baseline 4 (passive)",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Scheme {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown scheme {s:?} (expected one of scheme1, scheme2, baseline1..baseline4)")))
    }
}

/// Simulation-table constants plus the floors and surface limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub n_tx: usize,
    pub m_elements: usize,
    pub u_r: usize,
    pub u_t: usize,
    pub p_bs_max_dbm: f64,
    pub p_i_max_dbm: f64,
    /// AWGN at the users and amplification noise at the surface.
    pub sigma2_dbm: f64,
    pub delta2_dbm: f64,
    pub p_cir_bs_dbm: f64,
    pub p_cir_user_dbm: f64,
    pub p_c_dbm: f64,
    pub p_dc_dbm: f64,
    pub zeta: f64,
    // not in the table
    #[serde(default = "default_n_active_max")]
    pub n_active_max: usize,
    #[serde(default = "default_a_max")]
    pub a_max: f64,
    #[serde(default = "default_gamma_min")]
    pub gamma_min: f64,
    #[serde(default = "default_e_min")]
    pub e_min_w: f64,
}

fn default_n_active_max() -> usize {
    6
}
fn default_a_max() -> f64 {
    4.0
}
fn default_gamma_min() -> f64 {
    SystemParams::DEFAULT_GAMMA_MIN
}
fn default_e_min() -> f64 {
    SystemParams::DEFAULT_E_MIN
}

impl SystemSection {
    fn table_one() -> Self {
        Self {
            n_tx: 5,
            m_elements: 16,
            u_r: 3,
            u_t: 3,
            p_bs_max_dbm: 40.0,
            p_i_max_dbm: 5.0,
            sigma2_dbm: -80.0,
            delta2_dbm: -50.0,
            p_cir_bs_dbm: 30.0,
            p_cir_user_dbm: 7.0,
            p_c_dbm: -10.0,
            p_dc_dbm: -5.0,
            zeta: 1.25,
            n_active_max: 12,
            a_max: default_a_max(),
            gamma_min: default_gamma_min(),
            e_min_w: default_e_min(),
        }
    }

    pub fn to_params(&self, surface: SurfaceMode) -> SystemParams {
        let mut p = SystemParams::uniform(
            self.n_tx,
            self.m_elements,
            self.n_active_max,
            self.u_r,
            self.u_t,
            self.gamma_min,
            self.e_min_w,
        );
        let sigma2 = dbm_to_watt(self.sigma2_dbm);
        let delta2 = dbm_to_watt(self.delta2_dbm);
        p.p_bs_max = dbm_to_watt(self.p_bs_max_dbm);
        p.p_i_max = dbm_to_watt(self.p_i_max_dbm);
        p.a_max = self.a_max;
        p.sigma2_ris_r = sigma2;
        p.sigma2_ris_t = sigma2;
        p.sigma2_awgn_r = vec![sigma2; self.u_r];
        p.sigma2_awgn_t = vec![sigma2; self.u_t];
        p.delta2_r = vec![delta2; self.u_r];
        p.delta2_t = vec![delta2; self.u_t];
        p.p_cir_bs = dbm_to_watt(self.p_cir_bs_dbm);
        p.p_cir_user = dbm_to_watt(self.p_cir_user_dbm);
        p.p_c = dbm_to_watt(self.p_c_dbm);
        p.p_dc = dbm_to_watt(self.p_dc_dbm);
        p.zeta = self.zeta;
        p.surface = surface;
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EhSection {
    /// Saturation power (W).
    pub m_sat: f64,
    pub a: f64,
    /// Turn-on point (W).
    pub b: f64,
    /// Efficiency of the linear harvester used by the linear-EH baseline.
    pub mu: f64,
}

impl EhSection {
    pub fn params(&self) -> EhParams {
        EhParams { m_sat: self.m_sat, a_curve: self.a, b_curve: self.b }
    }

    pub fn nonlinear(&self) -> EhModel {
        EhModel::NonLinear(self.params())
    }

    pub fn linear(&self) -> EhModel {
        EhModel::Linear { efficiency: self.mu }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexSection {
    pub k_max: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    /// Splitting ratio of the fixed-ratio baseline.
    #[serde(default = "default_fixed_rho")]
    pub baseline_rho: f64,
    /// Relative back-off on the convex-stage requirements.
    #[serde(default)]
    pub margin: f64,
}

fn default_epsilon() -> f64 {
    ConvexSettings::default().epsilon
}
fn default_rank_tol() -> f64 {
    ConvexSettings::default().rank_tol
}
fn default_candidates() -> usize {
    ConvexSettings::default().candidates
}
fn default_fixed_rho() -> f64 {
    0.5
}

impl ConvexSection {
    pub fn settings(&self, seed: u64, fixed_rho: Option<f64>) -> ConvexSettings {
        ConvexSettings {
            epsilon: self.epsilon,
            k_max: self.k_max,
            rank_tol: self.rank_tol,
            candidates: self.candidates,
            seed,
            fixed_rho,
            margin: self.margin,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaSection {
    /// Number of meta-training tasks (user placements).
    pub tasks: usize,
    /// Meta-training episodes (each runs every task once).
    pub episodes: usize,
    pub inner_steps: usize,
    pub inner_lr_ratio: f64,
}

impl Default for MetaSection {
    fn default() -> Self {
        let h = MetaHyper::default();
        Self { tasks: 3, episodes: 100, inner_steps: h.inner_steps, inner_lr_ratio: h.inner_lr_ratio }
    }
}

impl MetaSection {
    pub fn hyper(&self) -> MetaHyper {
        MetaHyper { inner_steps: self.inner_steps, inner_lr_ratio: self.inner_lr_ratio }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Dotted path of the swept key, e.g. `system.e_min_w`.
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub scheme: Scheme,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub episodes: usize,
    pub episode_len: usize,
    pub system: SystemSection,
    pub eh: EhSection,
    pub convex: ConvexSection,
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default)]
    pub fading: FadingParams,
    #[serde(default)]
    pub agent: AgentHyper,
    #[serde(default)]
    pub meta: MetaSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

impl ExperimentConfig {
    /// Full simulation-table topology (N_t = 5, M = 16, 3 + 3 users).
    pub fn table_one() -> Self {
        Self {
            version: CONFIG_VERSION,
            scheme: Scheme::Scheme1,
            seeds: vec![0, 1, 2],
            output_dir: PathBuf::from("results"),
            episodes: 1000,
            episode_len: 50,
            system: SystemSection::table_one(),
            eh: EhSection { m_sat: 0.02, a: 6400.0, b: 0.003, mu: 0.5 },
            convex: ConvexSection {
                k_max: 10,
                epsilon: default_epsilon(),
                rank_tol: default_rank_tol(),
                candidates: default_candidates(),
                baseline_rho: default_fixed_rho(),
                margin: 0.2,
            },
            geometry: Geometry::default(),
            fading: FadingParams::default(),
            agent: AgentHyper::default(),
            meta: MetaSection { episodes: 300, ..MetaSection::default() },
            sweep: None,
        }
    }

    /// Reduced topology for quick runs: N_t = 3, M = 8, 1 + 1 users,
    /// 300 episodes of 20 steps, 64-wide hidden layers.
    pub fn desk() -> Self {
        let mut c = Self::table_one();
        c.system.n_tx = 3;
        c.system.m_elements = 8;
        c.system.n_active_max = 6;
        c.system.u_r = 1;
        c.system.u_t = 1;
        c.episodes = 300;
        c.episode_len = 20;
        c.agent.hidden = vec![64, 64];
        // near-deterministic start and a small entropy bonus: at this size
        // the surface barely moves the reward, and λ = 0.2 keeps widening σ
        c.agent.init_log_std = -2.0;
        c.agent.entropy_weight = 0.01;
        c.meta.episodes = 100;
        c
    }

    pub fn preset(full: bool) -> Self {
        if full {
            Self::table_one()
        } else {
            Self::desk()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            BenchError::Config(m) => BenchError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.seeds.is_empty() {
            return bad("seeds: at least one seed is required".into());
        }
        if self.episode_len == 0 {
            return bad("episode_len must be positive".into());
        }
        if self.meta.tasks == 0 {
            return bad("meta.tasks must be positive".into());
        }
        if !(self.eh.mu > 0.0 && self.eh.mu <= 1.0) {
            return bad("eh.mu must lie in (0, 1]".into());
        }
        if !(self.convex.baseline_rho > 0.0 && self.convex.baseline_rho < 1.0) {
            return bad("convex.baseline_rho must lie in (0, 1)".into());
        }
        if !(self.convex.margin >= 0.0 && self.convex.margin < 0.5) {
            return bad("convex.margin must lie in [0, 0.5)".into());
        }
        self.system.to_params(SurfaceMode::Active).validate().map_err(|e| BenchError::Config(format!("system: {e}")))?;
        self.eh.params().validate().map_err(|e| BenchError::Config(format!("eh: {e}")))?;
        self.agent.validate().map_err(|e| BenchError::Config(format!("agent: {e}")))?;
        Ok(())
    }

    /// Applies `path=value` overrides. Values are parsed as TOML literals,
    /// falling back to plain strings; unknown keys are rejected on
    /// re-validation.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, BenchError> {
        let mut doc = toml::Value::try_from(self).expect("configuration serialises");
        for o in overrides {
            let o = o.as_ref();
            let (path, raw) =
                o.split_once('=').ok_or_else(|| BenchError::Config(format!("override {o:?} is not of the form key=value")))?;
            set_path(&mut doc, path.trim(), parse_literal(raw.trim()))?;
        }
        let cfg: Self = doc.try_into().map_err(|e: toml::de::Error| BenchError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one numeric key; the key must already exist in the effective
    /// configuration.
    pub fn with_value(&self, path: &str, value: f64) -> Result<Self, BenchError> {
        let doc = toml::Value::try_from(self).expect("configuration serialises");
        let existing = get_path(&doc, path).ok_or_else(|| BenchError::Config(format!("unknown parameter path {path:?}")))?;
        let v = match existing {
            toml::Value::Integer(_) if value.fract() == 0.0 && value.abs() < 9.0e15 => format!("{}", value as i64),
            toml::Value::Integer(_) => return Err(BenchError::Config(format!("{path} takes integers, got {value}"))),
            toml::Value::Float(_) => format!("{value:?}"),
            _ => return Err(BenchError::Config(format!("{path} is not numeric"))),
        };
        self.with_overrides(&[format!("{path}={v}")])
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Probe {
        v: toml::Value,
    }
    match toml::from_str::<Probe>(&format!("v = {raw}")) {
        Ok(p) => p.v,
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn get_path<'a>(doc: &'a toml::Value, path: &str) -> Option<&'a toml::Value> {
    path.split('.').try_fold(doc, |v, k| v.as_table()?.get(k))
}

fn set_path(doc: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), BenchError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(BenchError::Config(format!("malformed key path {path:?}")));
    }
    let (last, parents) = keys.split_last().expect("non-empty");
    let mut cur = doc;
    for k in parents {
        let table = cur.as_table_mut().ok_or_else(|| BenchError::Config(format!("{path}: {k} is not a table")))?;
        cur = table.entry(k.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = cur.as_table_mut().ok_or_else(|| BenchError::Config(format!("{path}: parent is not a table")))?;
    // integers given for float keys are widened
    let value = match (table.get(*last), value) {
        (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (_, v) => v,
    };
    table.insert(last.to_string(), value);
    Ok(())
}
