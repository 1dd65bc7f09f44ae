use serde::{Deserialize, Serialize};

use crate::bandit::AgentConfig;
use crate::caasi::{CaasiConfig, ChannelPlan};
use crate::collision::CollisionConfig;
use crate::error::{Error, Result};
use crate::phy::{ActionSets, EnergyConvention, LoRaParams, PathLossParams, RadioConstants};

/// Mean path loss at the reference distance per channel before the flip.
pub const NONSTATIONARY_BEFORE_DB: [f64; 8] = [136.0, 134.0, 132.0, 130.0, 128.0, 126.0, 124.0, 122.0];
/// ... and after it.
pub const NONSTATIONARY_AFTER_DB: [f64; 8] = [122.0, 124.0, 126.0, 128.0, 130.0, 132.0, 134.0, 136.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSwitch {
    pub at_h: f64,
    pub params: PathLossParams,
}

/// Path loss of one channel over time: `initial` until the first switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub initial: PathLossParams,
    #[serde(default)]
    pub switches: Vec<ProfileSwitch>,
}

impl ChannelProfile {
    pub fn constant(params: PathLossParams) -> Self {
        Self { initial: params, switches: Vec::new() }
    }

    pub fn active_at(&self, t_h: f64) -> &PathLossParams {
        self.switches
            .iter()
            .rev()
            .find(|s| s.at_h <= t_h)
            .map_or(&self.initial, |s| &s.params)
    }
}

/// Active path loss parameters of every channel at time `t_h`.
pub fn apply_channel_schedule(profiles: &[ChannelProfile], t_h: f64) -> Vec<PathLossParams> {
    profiles.iter().map(|p| *p.active_at(t_h)).collect()
}

/// Heterogeneous channels whose quality order inverts at `flip_h`.
pub fn nonstationary_profiles(flip_h: f64) -> Vec<ChannelProfile> {
    NONSTATIONARY_BEFORE_DB
        .iter()
        .zip(NONSTATIONARY_AFTER_DB)
        .map(|(&before, after)| ChannelProfile {
            initial: PathLossParams { ref_loss_db: before, ..PathLossParams::default() },
            switches: vec![ProfileSwitch {
                at_h: flip_h,
                params: PathLossParams { ref_loss_db: after, ..PathLossParams::default() },
            }],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n_nodes: usize,
    pub radius_m: f64,
    pub topology_seed: u64,
    pub traffic_seed: u64,
    pub channel_seed: u64,
    pub mean_interval_s: f64,
    pub payload_bytes: u32,
    pub duration_h: f64,
    pub action_sets: ActionSets,
    pub radio: RadioConstants,
    /// One profile per channel; empty means the default stationary model everywhere.
    pub channel_profiles: Vec<ChannelProfile>,
    /// (α1, α2) weights of PDR and normalized EE in the utility.
    pub utility_weights: (f64, f64),
    pub collision: CollisionConfig,
    pub energy_convention: EnergyConvention,
    pub window_h: f64,
    /// Per-node transmission count covered by one bucket of the step series.
    pub step_bucket: u64,
    /// EE normalizer for the utility; defaults to the largest windowed EE.
    pub ee_scale: Option<f64>,
    /// Expected per-transmission success of the best fixed policy, enabling
    /// the regret column.
    pub regret_reference: Option<f64>,
    /// Explicit node coordinates (m, gateway at the origin), overriding random placement.
    pub node_positions: Option<Vec<(f64, f64)>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_nodes: 50,
            radius_m: 1000.0,
            topology_seed: 1,
            traffic_seed: 2,
            channel_seed: 3,
            mean_interval_s: 20.0,
            payload_bytes: 50,
            duration_h: 500.0,
            action_sets: ActionSets::default(),
            radio: RadioConstants::default(),
            channel_profiles: Vec::new(),
            utility_weights: (0.5, 0.5),
            collision: CollisionConfig::default(),
            energy_convention: EnergyConvention::default(),
            window_h: 50.0,
            step_bucket: 100,
            ee_scale: None,
            regret_reference: None,
            node_positions: None,
        }
    }
}

impl ScenarioConfig {
    /// Derives the three RNG seeds from one experiment seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.topology_seed = seed;
        self.traffic_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x5555;
        self.channel_seed = seed.wrapping_mul(0xC2B2_AE3D_27D4_EB4F) ^ 0xAAAA;
        self
    }

    /// Profiles with the stationary default filled in for every channel.
    pub fn resolved_profiles(&self) -> Vec<ChannelProfile> {
        if self.channel_profiles.is_empty() {
            vec![ChannelProfile::constant(PathLossParams::default()); self.action_sets.n_channels()]
        } else {
            self.channel_profiles.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: &str| Err(Error::Config(m.to_string()));
        self.action_sets.validate()?;
        self.radio.validate()?;
        if self.n_nodes == 0 {
            return cfg_err("n_nodes must be at least 1");
        }
        if !(self.radius_m > 0.0) {
            return cfg_err("radius_m must be positive");
        }
        if !(self.mean_interval_s > 0.0) {
            return cfg_err("mean_interval_s must be positive");
        }
        if self.payload_bytes == 0 {
            return cfg_err("payload_bytes must be positive");
        }
        if !(self.duration_h >= 0.0) || !self.duration_h.is_finite() {
            return cfg_err("duration_h must be finite and non-negative");
        }
        if !(self.window_h > 0.0) {
            return cfg_err("window_h must be positive");
        }
        if self.step_bucket == 0 {
            return cfg_err("step_bucket must be positive");
        }
        let (a1, a2) = self.utility_weights;
        if a1 < 0.0 || a2 < 0.0 || (a1 + a2 - 1.0).abs() > 1e-9 {
            return cfg_err("utility weights must be non-negative and sum to 1");
        }
        if let Some(scale) = self.ee_scale {
            if !(scale > 0.0) {
                return cfg_err("ee_scale must be positive");
            }
        }
        if !self.channel_profiles.is_empty() && self.channel_profiles.len() != self.action_sets.n_channels() {
            return cfg_err("need exactly one channel profile per channel");
        }
        for profile in &self.channel_profiles {
            profile.initial.validate()?;
            for w in profile.switches.windows(2) {
                if !(w[0].at_h < w[1].at_h) {
                    return cfg_err("channel switch times must be strictly increasing");
                }
            }
            for s in &profile.switches {
                s.params.validate()?;
                if !(s.at_h >= 0.0) {
                    return cfg_err("channel switch times must be non-negative");
                }
            }
        }
        if let Some(pos) = &self.node_positions {
            if pos.len() != self.n_nodes {
                return cfg_err("node_positions must list exactly n_nodes points");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    Random,
    NaiveMab,
    DLora,
    CdLora,
    /// Every node uses `fixed`.
    Static,
    /// CAASI channel plan with maximum SF and TP on every node.
    CaasiMaxSf,
}

impl AgentKind {
    pub fn label(&self) -> &'static str {
        match self {
            AgentKind::Random => "random",
            AgentKind::NaiveMab => "naive-mab",
            AgentKind::DLora => "d-lora",
            AgentKind::CdLora => "cd-lora",
            AgentKind::Static => "static",
            AgentKind::CaasiMaxSf => "caasi-max-sf",
        }
    }

    pub fn uses_caasi(&self) -> bool {
        matches!(self, AgentKind::CdLora | AgentKind::CaasiMaxSf)
    }
}

impl std::str::FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown agent kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub kind: AgentKind,
    #[serde(default)]
    pub learning: AgentConfig,
    #[serde(default)]
    pub caasi: CaasiConfig,
    /// Parameters of the `static` policy.
    #[serde(default)]
    pub fixed: Option<LoRaParams>,
    /// A saved CAASI plan; skips the setup phase when present.
    #[serde(default)]
    pub plan: Option<ChannelPlan>,
    /// Count CAASI setup packets in the reported PDR/EE series.
    #[serde(default)]
    pub include_setup_in_metrics: bool,
}

impl AgentSpec {
    pub fn new(kind: AgentKind) -> Self {
        Self {
            kind,
            learning: AgentConfig::default(),
            caasi: CaasiConfig::default(),
            fixed: None,
            plan: None,
            include_setup_in_metrics: false,
        }
    }

    pub fn fixed(params: LoRaParams) -> Self {
        Self { fixed: Some(params), ..Self::new(AgentKind::Static) }
    }

    pub fn validate(&self, scenario: &ScenarioConfig) -> Result<()> {
        self.learning.validate()?;
        if !(0.0..=1.0).contains(&self.caasi.pdr_min) {
            return Err(Error::Config("pdr_min must lie in [0, 1]".into()));
        }
        let sets = &scenario.action_sets;
        if self.kind == AgentKind::Static {
            let p = self
                .fixed
                .ok_or_else(|| Error::Config("static agent needs `fixed` parameters".into()))?;
            if p.channel as usize >= sets.n_channels() || !sets.sf.contains(&p.sf) || !sets.tp_dbm.contains(&p.tp_dbm) {
                return Err(Error::Config("fixed parameters outside the action sets".into()));
            }
        }
        if let Some(plan) = &self.plan {
            plan.validate(sets)?;
            if plan.assignment.len() != scenario.n_nodes {
                return Err(Error::Config("saved plan covers a different number of nodes".into()));
            }
        }
        Ok(())
    }
}

/// Contents of a run configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    pub agent: AgentSpec,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.scenario.validate()?;
        cfg.agent.validate(&cfg.scenario)?;
        Ok(cfg)
    }
}
