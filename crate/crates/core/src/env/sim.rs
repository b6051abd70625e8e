use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::action::{ActionDecoder, HybridAction};
use super::reward::{compute_reward, penalised_violations};
use super::state::{encode_state, EnvState, StateLayout};
use super::EnvError;
use crate::channel::{realize, BuildFlags, FadingParams, Geometry};
use crate::convex::{solve_convex_stage, ConicBackend, ConvexError, ConvexSettings};
use crate::linalg::norm_sqr;
use crate::model::{
    check_with_metrics, BeamformingSet, ChannelSet, ConstraintReport, EhModel, LinkView, Metrics, PowerSplitSet,
    Side, StarRisConfig, SystemParams,
};

/// One user placement plus the fading draw used for an episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: u64,
    pub placement_seed: u64,
    pub channel_seed: u64,
    /// Replaces the environment's geometry for this task.
    #[serde(default)]
    pub geometry: Option<Geometry>,
}

impl TaskSpec {
    pub fn new(task_id: u64, placement_seed: u64, channel_seed: u64) -> Self {
        Self { task_id, placement_seed, channel_seed, geometry: None }
    }

    /// Same placement, fresh fading for episode `episode`.
    pub fn for_episode(&self, episode: u64) -> Self {
        let mut t = self.clone();
        t.channel_seed = self.channel_seed.wrapping_add(episode.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub params: SystemParams,
    pub eh: EhModel,
    pub geometry: Geometry,
    pub fading: FadingParams,
    /// Steps per episode.
    pub episode_len: usize,
    pub decoder: ActionDecoder,
}

impl EnvConfig {
    pub fn new(params: SystemParams, eh: EhModel, episode_len: usize) -> Self {
        let decoder = ActionDecoder::new(&params);
        Self { params, eh, geometry: Geometry::default(), fading: FadingParams::default(), episode_len, decoder }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub step: usize,
    pub done: bool,
    pub report: ConstraintReport,
    pub metrics: Metrics,
    /// Violations counted by the reward.
    pub violations: usize,
    pub surface: StarRisConfig,
}

/// How the operating point (beamformers and splitting ratios) of the current
/// episode was obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConvexStage {
    Solved { mu: f64, iterations: usize, converged: bool },
    /// The solve failed; the last feasible operating point was kept.
    Reused { reason: String },
    /// The solve failed and nothing feasible was known yet; the MRT default
    /// stays in place.
    Fallback { reason: String },
}

impl ConvexStage {
    pub fn solved(&self) -> bool {
        matches!(self, ConvexStage::Solved { .. })
    }
}

struct Episode {
    task: TaskSpec,
    placed: Geometry,
    flags: BuildFlags,
    ch: ChannelSet,
    ris: StarRisConfig,
    bf: BeamformingSet,
    ps: PowerSplitSet,
    step: usize,
    prev_action: HybridAction,
    prev_reward: f64,
    state: EnvState,
}

/// The surface-configuration MDP. Channels are drawn on reset and held for
/// the episode; beamformers and splitting ratios come from the convex stage.
pub struct StarRisEnv {
    cfg: EnvConfig,
    layout: StateLayout,
    episode: Option<Episode>,
    last_feasible: Option<(BeamformingSet, PowerSplitSet)>,
}

/// Equal-power maximum-ratio beams at half the budget, ρ = 0.5.
pub fn default_operating_point(ch: &ChannelSet, ris: &StarRisConfig, params: &SystemParams) -> (BeamformingSet, PowerSplitSet) {
    let per_user = params.p_bs_max / 2.0 / params.total_users().max(1) as f64;
    let mut bf = BeamformingSet::zeros(params);
    for side in Side::BOTH {
        let view = LinkView::new(ch, ris, params, side).expect("validated channel set");
        for (k, row) in view.hbar_h.iter().enumerate() {
            let norm = norm_sqr(row).sqrt();
            bf.side_mut(side)[k] = if norm > 0.0 {
                row.iter().map(|z| z.conj() * (per_user.sqrt() / norm)).collect()
            } else {
                let mut e = vec![Complex64::new(0.0, 0.0); params.n_tx];
                e[0] = Complex64::new(per_user.sqrt(), 0.0);
                e
            };
        }
    }
    (bf, PowerSplitSet::uniform(params, 0.5))
}

impl StarRisEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.params.validate()?;
        cfg.fading.validate()?;
        if cfg.decoder.m != cfg.params.m_elements {
            return Err(EnvError::Usage("decoder width does not match the surface".into()));
        }
        let layout = StateLayout::new(&cfg.params, &cfg.geometry, &cfg.fading);
        Ok(Self { cfg, layout, episode: None, last_feasible: None })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn state_dim(&self) -> usize {
        self.layout.dim
    }

    pub fn action_m(&self) -> usize {
        self.cfg.params.m_elements
    }

    fn ep(&self) -> Result<&Episode, EnvError> {
        self.episode.as_ref().ok_or(EnvError::NotReset)
    }

    fn ep_mut(&mut self) -> Result<&mut Episode, EnvError> {
        self.episode.as_mut().ok_or(EnvError::NotReset)
    }

    /// Draws the task's channels, puts the surface in its reset
    /// configuration and returns the initial state.
    pub fn reset(&mut self, task: &TaskSpec) -> Result<EnvState, EnvError> {
        let geom = task.geometry.as_ref().unwrap_or(&self.cfg.geometry);
        let (placed, ch, flags) = realize(geom, &self.cfg.fading, &self.cfg.params, task.placement_seed, task.channel_seed)?;
        let ris = self.cfg.decoder.initial();
        let (bf, ps) = default_operating_point(&ch, &ris, &self.cfg.params);
        let m = self.cfg.params.m_elements;
        self.episode = Some(Episode {
            task: task.clone(),
            placed,
            flags,
            ch,
            ris,
            bf,
            ps,
            step: 0,
            prev_action: HybridAction::zeros(m),
            prev_reward: 0.0,
            state: EnvState { obs: vec![] },
        });
        self.refresh()
    }

    /// Re-encodes the current state (metrics of the current surface and
    /// operating point, previous action and reward as stored).
    fn refresh(&mut self) -> Result<EnvState, EnvError> {
        let (metrics, _) = self.evaluate_current()?;
        let ep = self.ep()?;
        let hbar = self.hbar_rows(&ep.ch, &ep.ris)?;
        let state = encode_state(&self.layout, &metrics, &hbar, &self.cfg.params, &ep.prev_action, ep.prev_reward);
        self.ep_mut()?.state = state.clone();
        Ok(state)
    }

    fn hbar_rows(&self, ch: &ChannelSet, ris: &StarRisConfig) -> Result<Vec<Vec<Complex64>>, EnvError> {
        let mut rows = Vec::new();
        for side in Side::BOTH {
            rows.extend(LinkView::new(ch, ris, &self.cfg.params, side)?.hbar_h);
        }
        Ok(rows)
    }

    fn evaluate(&self, ris: &StarRisConfig) -> Result<(Metrics, ConstraintReport), EnvError> {
        let ep = self.ep()?;
        let m = Metrics::evaluate(&ep.ch, ris, &ep.bf, &ep.ps, &self.cfg.params, &self.cfg.eh)?;
        let report = check_with_metrics(&m, ris, &ep.ps, &self.cfg.params);
        Ok((m, report))
    }

    pub fn evaluate_current(&self) -> Result<(Metrics, ConstraintReport), EnvError> {
        self.evaluate(&self.ep()?.ris)
    }

    /// Evaluates an action without changing the environment.
    pub fn peek(&self, action: &HybridAction) -> Result<(f64, Metrics, ConstraintReport), EnvError> {
        let ris = self.cfg.decoder.decode(action);
        let (m, r) = self.evaluate(&ris)?;
        Ok((compute_reward(m.ee, &r), m, r))
    }

    /// Replaces the surface configuration (e.g. the one carried over from
    /// the previous episode).
    pub fn set_surface(&mut self, ris: StarRisConfig) -> Result<EnvState, EnvError> {
        if ris.len() != self.cfg.params.m_elements {
            return Err(EnvError::Usage(format!("surface has {} elements, expected {}", ris.len(), self.cfg.params.m_elements)));
        }
        // the installed configuration shows up in the previous-action slots
        let encoded = self.cfg.decoder.encode(&ris);
        let ep = self.ep_mut()?;
        ep.ris = ris;
        ep.prev_action = encoded;
        self.refresh()
    }

    /// Installs an explicit operating point.
    pub fn set_operating_point(&mut self, bf: BeamformingSet, ps: PowerSplitSet) -> Result<EnvState, EnvError> {
        bf.validate(&self.cfg.params)?;
        ps.validate(&self.cfg.params)?;
        let ep = self.ep_mut()?;
        ep.bf = bf;
        ep.ps = ps;
        self.refresh()
    }

    /// Runs the convex stage for the current channels and surface. On
    /// failure the last feasible operating point is reused when one exists.
    pub fn solve_operating_point(
        &mut self,
        settings: &ConvexSettings,
        backend: &dyn ConicBackend,
    ) -> Result<ConvexStage, EnvError> {
        let ep = self.ep()?;
        let outcome = solve_convex_stage(&ep.ch, &ep.ris, &self.cfg.params, &self.cfg.eh, settings, backend);
        let stage = match outcome {
            Ok(out) => {
                self.last_feasible = Some((out.bf.clone(), out.ps.clone()));
                let ep = self.ep_mut()?;
                ep.bf = out.bf;
                ep.ps = out.ps;
                ConvexStage::Solved {
                    mu: out.mu_star,
                    iterations: out.iterations,
                    converged: out.status == crate::convex::SolveStatus::Converged,
                }
            }
            Err(ConvexError::Model(e)) => return Err(e.into()),
            Err(e) => {
                let reason = e.to_string();
                match self.last_feasible.clone() {
                    Some((bf, ps)) => {
                        let ep = self.ep_mut()?;
                        ep.bf = bf;
                        ep.ps = ps;
                        ConvexStage::Reused { reason }
                    }
                    None => ConvexStage::Fallback { reason },
                }
            }
        };
        self.refresh()?;
        Ok(stage)
    }

    pub fn step(&mut self, action: &HybridAction) -> Result<(EnvState, f64, StepInfo), EnvError> {
        let m = self.cfg.params.m_elements;
        if action.discrete_raw.len() != m || action.continuous_raw.len() != 4 * m {
            return Err(EnvError::Usage("action dimensions do not match the surface".into()));
        }
        if !action.is_finite() {
            return Err(EnvError::Usage("action contains non-finite entries".into()));
        }
        self.ep()?;
        let ris = self.cfg.decoder.decode(action);
        let (metrics, report) = self.evaluate(&ris)?;
        let reward = compute_reward(metrics.ee, &report);
        let violations = penalised_violations(&report);
        let ep = self.ep_mut()?;
        ep.ris = ris.clone();
        ep.step += 1;
        ep.prev_action = action.clone();
        ep.prev_reward = reward;
        let step = ep.step;
        let ep = self.ep()?;
        let hbar = self.hbar_rows(&ep.ch, &ep.ris)?;
        let state = encode_state(&self.layout, &metrics, &hbar, &self.cfg.params, &ep.prev_action, reward);
        self.ep_mut()?.state = state.clone();
        let info = StepInfo { step, done: step >= self.cfg.episode_len, report, metrics, violations, surface: ris };
        Ok((state, reward, info))
    }

    pub fn state(&self) -> Result<&EnvState, EnvError> {
        Ok(&self.ep()?.state)
    }

    pub fn channels(&self) -> Result<&ChannelSet, EnvError> {
        Ok(&self.ep()?.ch)
    }

    pub fn surface(&self) -> Result<&StarRisConfig, EnvError> {
        Ok(&self.ep()?.ris)
    }

    pub fn operating_point(&self) -> Result<(&BeamformingSet, &PowerSplitSet), EnvError> {
        let ep = self.ep()?;
        Ok((&ep.bf, &ep.ps))
    }

    pub fn task(&self) -> Result<&TaskSpec, EnvError> {
        Ok(&self.ep()?.task)
    }

    /// User positions of the current episode.
    pub fn placement(&self) -> Result<&Geometry, EnvError> {
        Ok(&self.ep()?.placed)
    }

    pub fn build_flags(&self) -> Result<&BuildFlags, EnvError> {
        Ok(&self.ep()?.flags)
    }
}
