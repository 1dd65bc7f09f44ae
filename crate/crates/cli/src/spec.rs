//! Experiment descriptions and the built-in presets.

use lora_mab::engine::{nonstationary_profiles, AgentKind, AgentSpec, ScenarioConfig};
use lora_mab::phy::EnergyConvention;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Axis varied across sweep points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum Sweep {
    NNodes(Vec<usize>),
    RadiusM(Vec<f64>),
}

impl Sweep {
    pub fn axis(&self) -> &'static str {
        match self {
            Sweep::NNodes(_) => "n_nodes",
            Sweep::RadiusM(_) => "radius_m",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sweep::NNodes(v) => v.len(),
            Sweep::RadiusM(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Value at sweep point `i`, as used in file names and tables.
    pub fn value(&self, i: usize) -> f64 {
        match self {
            Sweep::NNodes(v) => v[i] as f64,
            Sweep::RadiusM(v) => v[i],
        }
    }

    pub fn apply(&self, i: usize, scenario: &mut ScenarioConfig) {
        match self {
            Sweep::NNodes(v) => scenario.n_nodes = v[i],
            Sweep::RadiusM(v) => scenario.radius_m = v[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    pub agents: Vec<AgentSpec>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |m: String| Err(CliError::Config(m));
        if self.agents.is_empty() {
            return cfg("experiment lists no agents".into());
        }
        if self.seeds.is_empty() {
            return cfg("experiment lists no seeds".into());
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return cfg("duplicate seeds".into());
        }
        if self.sweep.as_ref().is_some_and(Sweep::is_empty) {
            return cfg("sweep has no values".into());
        }
        let mut labels: Vec<&str> = self.agents.iter().map(|a| a.kind.label()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != self.agents.len() {
            return cfg("each agent kind may appear once".into());
        }
        for point in self.points() {
            let scenario = self.scenario_at(point, self.seeds[0]);
            scenario.validate().map_err(|e| CliError::Config(e.to_string()))?;
            for a in &self.agents {
                a.validate(&scenario).map_err(|e| CliError::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Sweep point indices; a single `None` without a sweep.
    pub fn points(&self) -> Vec<Option<usize>> {
        match &self.sweep {
            Some(s) => (0..s.len()).map(Some).collect(),
            None => vec![None],
        }
    }

    pub fn scenario_at(&self, point: Option<usize>, seed: u64) -> ScenarioConfig {
        let mut s = self.scenario.clone().with_seed(seed);
        if let (Some(sweep), Some(i)) = (&self.sweep, point) {
            sweep.apply(i, &mut s);
        }
        s
    }

    pub fn override_seeds(&mut self, seeds: Vec<u64>) {
        self.seeds = seeds;
    }

    pub fn override_energy(&mut self, convention: EnergyConvention) {
        self.scenario.energy_convention = convention;
    }

    /// Shortens or extends the horizon, moving channel switches proportionally.
    pub fn override_duration(&mut self, hours: f64) {
        let old = self.scenario.duration_h;
        if old > 0.0 {
            for profile in &mut self.scenario.channel_profiles {
                for switch in &mut profile.switches {
                    switch.at_h *= hours / old;
                }
            }
        }
        self.scenario.duration_h = hours;
    }
}

pub const PRESETS: [(&str, &str); 4] = [
    ("density", "node count 50..250 at 1000 m, stationary, random/naive-mab/d-lora/cd-lora"),
    ("radius", "radius 1000..3000 m with 100 nodes, stationary, random/naive-mab/d-lora/cd-lora"),
    ("convergence", "100 nodes at 1000 m over 2000 h, stationary, learning agents"),
    ("nonstationary", "100 nodes at 1000 m over 2000 h, channel quality order flips at 1000 h"),
];

fn agents(kinds: &[AgentKind]) -> Vec<AgentSpec> {
    kinds.iter().map(|&k| AgentSpec::new(k)).collect()
}

const ALL: [AgentKind; 4] = [AgentKind::Random, AgentKind::NaiveMab, AgentKind::DLora, AgentKind::CdLora];
const LEARNING: [AgentKind; 3] = [AgentKind::NaiveMab, AgentKind::DLora, AgentKind::CdLora];

pub fn preset(name: &str) -> Result<ExperimentSpec, CliError> {
    let seeds: Vec<u64> = (1..=5).collect();
    let base = ScenarioConfig { duration_h: 2000.0, ..Default::default() };
    let spec = match name {
        "density" => ExperimentSpec {
            name: name.into(),
            scenario: base,
            agents: agents(&ALL),
            seeds,
            sweep: Some(Sweep::NNodes(vec![50, 100, 150, 200, 250])),
        },
        "radius" => ExperimentSpec {
            name: name.into(),
            scenario: ScenarioConfig { n_nodes: 100, ..base },
            agents: agents(&ALL),
            seeds,
            sweep: Some(Sweep::RadiusM(vec![1000.0, 1500.0, 2000.0, 2500.0, 3000.0])),
        },
        "convergence" => ExperimentSpec {
            name: name.into(),
            scenario: ScenarioConfig { n_nodes: 100, ..base },
            agents: agents(&LEARNING),
            seeds,
            sweep: None,
        },
        "nonstationary" => ExperimentSpec {
            name: name.into(),
            scenario: ScenarioConfig {
                n_nodes: 100,
                channel_profiles: nonstationary_profiles(1000.0),
                ..base
            },
            agents: agents(&LEARNING),
            seeds,
            sweep: None,
        },
        other => {
            let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            return Err(CliError::Config(format!("unknown preset {other:?}; known presets: {}", known.join(", "))));
        }
    };
    Ok(spec)
}
