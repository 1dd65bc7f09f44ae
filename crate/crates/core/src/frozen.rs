//! Single-node link with no contention, for regret measurements.
//!
//! The node always sees the same per-channel path loss statistics, so every
//! fixed parameter choice has a well defined expected reward and the best
//! fixed choice is computable exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::baselines::{RandomPolicy, StaticPolicy};
use crate::bandit::{CdLora, DLora, NaiveMab, Policy, TransmissionOutcome};
use crate::caasi::prune_sf_actions;
use crate::engine::{AgentKind, AgentSpec};
use crate::error::{Error, Result};
use crate::phy::{self, ActionSets, LoRaParams, PathLossParams, RadioConstants};

#[derive(Debug, Clone, PartialEq)]
pub struct FrozenLink {
    pub distance_m: f64,
    /// Path loss statistics per channel index.
    pub channels: Vec<PathLossParams>,
    pub radio: RadioConstants,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

impl FrozenLink {
    pub fn validate(&self, sets: &ActionSets) -> Result<()> {
        if self.channels.len() != sets.n_channels() {
            return Err(Error::Config("one path loss entry per channel required".into()));
        }
        if !(self.distance_m > 0.0) {
            return Err(Error::Domain("distance must be positive".into()));
        }
        self.radio.validate()?;
        self.channels.iter().try_for_each(PathLossParams::validate)
    }

    /// Probability that a packet sent with `p` passes both the sensitivity
    /// and the SINR check.
    pub fn success_probability(&self, p: LoRaParams) -> f64 {
        let pl = &self.channels[p.channel as usize];
        let mean_rssi = p.tp_dbm as f64 - pl.mean_loss_db(self.distance_m);
        let sens = phy::receiver_sensitivity_dbm(p.sf, self.radio.bandwidth_hz).expect("valid sf");
        let thr = phy::sinr_threshold_db(p.sf).expect("valid sf");
        // Success iff shadow x <= a and x + noise <= c.
        let a = mean_rssi - sens;
        let c = mean_rssi - thr - self.radio.noise_floor_dbm();
        let (s1, s2) = (pl.shadow_sigma_db, self.radio.awgn_sigma_db);
        if s1 == 0.0 {
            return if a < 0.0 { 0.0 } else if s2 == 0.0 { f64::from(c >= 0.0) } else { std_normal_cdf(c / s2) };
        }
        if s2 == 0.0 {
            return std_normal_cdf(a.min(c) / s1);
        }
        // Simpson's rule over the shadowing density.
        let lo = -12.0 * s1;
        let hi = a.min(12.0 * s1);
        if hi <= lo {
            return 0.0;
        }
        let n = 2000;
        let h = (hi - lo) / n as f64;
        let f = |x: f64| {
            let z = x / s1;
            (-0.5 * z * z).exp() * std_normal_cdf((c - x) / s2)
        };
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(lo + i as f64 * h);
        }
        (acc * h / 3.0) / (s1 * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// Samples one transmission outcome.
    pub fn transmit<R: Rng + ?Sized>(&self, p: LoRaParams, rng: &mut R) -> bool {
        let pl = &self.channels[p.channel as usize];
        let shadow: f64 = rng.sample::<f64, _>(StandardNormal) * pl.shadow_sigma_db;
        let noise = Normal::new(self.radio.noise_floor_dbm(), self.radio.awgn_sigma_db)
            .expect("validated sigma")
            .sample(rng);
        let rssi = p.tp_dbm as f64 - pl.mean_loss_db(self.distance_m) - shadow;
        let sens = phy::receiver_sensitivity_dbm(p.sf, self.radio.bandwidth_hz).expect("valid sf");
        rssi >= sens && rssi - noise >= phy::sinr_threshold_db(p.sf).expect("valid sf")
    }

    /// Channel with the smallest mean path loss, lowest index on ties.
    pub fn best_channel(&self) -> u8 {
        let loss: Vec<f64> = self.channels.iter().map(|c| -c.mean_loss_db(self.distance_m)).collect();
        crate::bandit::argmax(&loss) as u8
    }

    /// Pruned SF set from exact success probabilities at maximum TP.
    pub fn pruned_sf(&self, sets: &ActionSets, channel: u8, pdr_min: f64) -> Vec<u8> {
        let pdr: Vec<(u8, f64)> = sets
            .sf
            .iter()
            .map(|&sf| (sf, self.success_probability(LoRaParams { channel, sf, tp_dbm: sets.max_tp() })))
            .collect();
        prune_sf_actions(&pdr, pdr_min)
    }
}

/// Fresh policy of the given kind for a single node on `link`.
pub fn build_policy(link: &FrozenLink, sets: &ActionSets, spec: &AgentSpec) -> Result<Box<dyn Policy>> {
    Ok(match spec.kind {
        AgentKind::Random => Box::new(RandomPolicy::new(sets)),
        AgentKind::NaiveMab => Box::new(NaiveMab::new(sets, &spec.learning)),
        AgentKind::DLora => Box::new(DLora::new(sets, &spec.learning)),
        AgentKind::Static => Box::new(StaticPolicy::new(
            spec.fixed.ok_or_else(|| Error::Config("static agent needs `fixed` parameters".into()))?,
        )),
        AgentKind::CdLora => {
            let ch = link.best_channel();
            Box::new(CdLora::new(sets, &spec.learning, ch, &link.pruned_sf(sets, ch, spec.caasi.pdr_min))?)
        }
        AgentKind::CaasiMaxSf => Box::new(StaticPolicy::new(LoRaParams {
            channel: link.best_channel(),
            sf: sets.max_sf(),
            tp_dbm: sets.max_tp(),
        })),
    })
}

/// Parameter choices available to the agent.
pub fn action_space(link: &FrozenLink, sets: &ActionSets, spec: &AgentSpec) -> Vec<LoRaParams> {
    match spec.kind {
        AgentKind::CdLora => {
            let ch = link.best_channel();
            let allowed = link.pruned_sf(sets, ch, spec.caasi.pdr_min);
            sets.super_arms().into_iter().filter(|p| p.channel == ch && allowed.contains(&p.sf)).collect()
        }
        _ => sets.super_arms(),
    }
}

/// Expected reward the agent credits itself for always sending with `p`.
/// Rewards are affine in the success indicator, so two probes of a fresh
/// policy give the exact expectation.
pub fn expected_reward(link: &FrozenLink, sets: &ActionSets, spec: &AgentSpec, p: LoRaParams) -> Result<f64> {
    let r0 = build_policy(link, sets, spec)?.observe(&TransmissionOutcome { success: false, params: p });
    let r1 = build_policy(link, sets, spec)?.observe(&TransmissionOutcome { success: true, params: p });
    Ok(r0 + link.success_probability(p) * (r1 - r0))
}

/// Best fixed choice in the agent's action space and its expected reward.
pub fn best_fixed(link: &FrozenLink, sets: &ActionSets, spec: &AgentSpec) -> Result<(LoRaParams, f64)> {
    let mut best: Option<(LoRaParams, f64)> = None;
    for p in action_space(link, sets, spec) {
        let r = expected_reward(link, sets, spec, p)?;
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((p, r));
        }
    }
    best.ok_or_else(|| Error::Config("empty action space".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub best: LoRaParams,
    pub optimal_mean: f64,
    /// `t·r* − Σ r_τ` over realized rewards, index `t − 1`.
    pub realized: Vec<f64>,
    /// Same with each realized reward replaced by its expectation.
    pub pseudo: Vec<f64>,
}

impl RegretTrace {
    /// Realized regret per step after `t` steps.
    pub fn average_at(&self, t: usize) -> f64 {
        self.realized[t - 1] / t as f64
    }
}

/// Runs one agent for `steps` transmissions on `link`.
pub fn run_frozen(link: &FrozenLink, sets: &ActionSets, spec: &AgentSpec, steps: usize, seed: u64) -> Result<RegretTrace> {
    link.validate(sets)?;
    spec.learning.validate()?;
    let (best, optimal_mean) = best_fixed(link, sets, spec)?;
    let arms = action_space(link, sets, spec);
    let expected: std::collections::BTreeMap<LoRaParams, f64> = arms
        .iter()
        .map(|&p| Ok((p, expected_reward(link, sets, spec, p)?)))
        .collect::<Result<_>>()?;

    let mut policy = build_policy(link, sets, spec)?;
    let mut agent_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6A09_E667_F3BC_C908);
    let mut realized = Vec::with_capacity(steps);
    let mut pseudo = Vec::with_capacity(steps);
    let (mut acc, mut acc_exp) = (0.0, 0.0);
    for t in 1..=steps {
        let p = policy.select(&mut agent_rng);
        let success = link.transmit(p, &mut env_rng);
        acc += policy.observe(&TransmissionOutcome { success, params: p });
        acc_exp += expected.get(&p).copied().unwrap_or(0.0);
        realized.push(t as f64 * optimal_mean - acc);
        pseudo.push(t as f64 * optimal_mean - acc_exp);
    }
    Ok(RegretTrace { best, optimal_mean, realized, pseudo })
}
