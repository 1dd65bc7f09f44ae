//! Online-learning agents.
//!
//! [`NaiveMab`] runs UCB1 over every (channel, SF, TP) super arm with a
//! success-indicator reward. [`DLora`] decomposes the super arm into three
//! base arms with separate shaped rewards and picks the combination with the
//! largest summed upper confidence bound (CUCB). [`CdLora`] is the same
//! learner restricted to (SF, TP) on a channel fixed by the CAASI setup.

use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::{ActionSets, LoRaParams};

/// Pull count and running mean reward of one arm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmStats {
    pub pulls: u64,
    pub mean: f64,
}

impl ArmStats {
    /// Credits one reward. The divisor is the post-increment pull count, so
    /// after n rewards `mean` is their arithmetic mean.
    pub fn record(&mut self, reward: f64) {
        self.pulls += 1;
        self.mean += (reward - self.mean) / self.pulls as f64;
    }
}

pub fn update_mean(stats: ArmStats, reward: f64) -> ArmStats {
    let mut next = stats;
    next.record(reward);
    next
}

/// Upper confidence bound `mean + c·sqrt(ln t / (2·pulls))`.
///
/// Returns `None` for an arm that has never been pulled; such an arm must be
/// selected unconditionally.
pub fn ucb_estimate(stats: ArmStats, t: u64, c: f64) -> Option<f64> {
    if stats.pulls == 0 {
        return None;
    }
    let t = t.max(1) as f64;
    Some(stats.mean + c * (t.ln() / (2.0 * stats.pulls as f64)).sqrt())
}

/// Index of the first unexplored arm, or else the UCB argmax (lowest index on ties).
pub fn ucb_pick(stats: &[ArmStats], t: u64, c: f64) -> usize {
    let half_log_t = 0.5 * (t.max(1) as f64).ln();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in stats.iter().enumerate() {
        if s.pulls == 0 {
            return i;
        }
        let score = s.mean + c * (half_log_t / s.pulls as f64).sqrt();
        if score > best_score {
            best_score = score;
            best = i;
        }
    }
    best
}

/// Argmax with lowest-index tie-breaking.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Joint argmax of a sum of per-dimension estimates, returned as indices.
///
/// The objective is separable, so each dimension is maximized on its own.
pub fn cucb_select(cf_est: &[f64], sf_est: &[f64], tp_est: &[f64]) -> (usize, usize, usize) {
    (argmax(cf_est), argmax(sf_est), argmax(tp_est))
}

/// Result of one transmission as reported back to the sending node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionOutcome {
    pub success: bool,
    pub params: LoRaParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// UCB weight factor `c`.
    pub exploration_weight: f64,
    /// Bias towards smaller SFs.
    pub sf_metric_factor: f64,
    /// Bias towards smaller TPs.
    pub tp_metric_factor: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            exploration_weight: 2.0,
            sf_metric_factor: 1.0,
            tp_metric_factor: 1.8,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.exploration_weight > 0.0) {
            return Err(Error::Config("exploration_weight must be positive".into()));
        }
        if !(self.sf_metric_factor >= 0.0) || !(self.tp_metric_factor >= 0.0) {
            return Err(Error::Config("metric factors must be non-negative".into()));
        }
        Ok(())
    }
}

fn indicator(outcome: &TransmissionOutcome) -> f64 {
    if outcome.success {
        1.0
    } else {
        0.0
    }
}

fn sf_weight(sf: u8) -> f64 {
    sf as f64 / (1u64 << sf) as f64
}

pub fn reward_cf(outcome: &TransmissionOutcome) -> f64 {
    indicator(outcome)
}

pub fn reward_sf(outcome: &TransmissionOutcome, xi: f64, sf_set: &[u8]) -> f64 {
    let norm: f64 = sf_set.iter().map(|&s| sf_weight(s)).sum();
    indicator(outcome) + xi * sf_weight(outcome.params.sf) / norm
}

pub fn reward_tp(outcome: &TransmissionOutcome, eta: f64, tp_set: &[i8]) -> f64 {
    let total: f64 = tp_set.iter().map(|&t| t as f64).sum();
    indicator(outcome) + eta * (1.0 - outcome.params.tp_dbm as f64 / total)
}

/// Precomputed normalizers for the three base-arm rewards.
#[derive(Debug, Clone, Copy)]
struct RewardShaper {
    xi: f64,
    eta: f64,
    sf_norm: f64,
    tp_total: f64,
}

impl RewardShaper {
    fn new(cfg: &AgentConfig, sets: &ActionSets) -> Self {
        Self {
            xi: cfg.sf_metric_factor,
            eta: cfg.tp_metric_factor,
            sf_norm: sets.sf.iter().map(|&s| sf_weight(s)).sum(),
            tp_total: sets.tp_dbm.iter().map(|&t| t as f64).sum(),
        }
    }

    fn sf(&self, outcome: &TransmissionOutcome) -> f64 {
        indicator(outcome) + self.xi * sf_weight(outcome.params.sf) / self.sf_norm
    }

    fn tp(&self, outcome: &TransmissionOutcome) -> f64 {
        indicator(outcome) + self.eta * (1.0 - outcome.params.tp_dbm as f64 / self.tp_total)
    }
}

/// Cumulative regret `t·r* − Σ r_τ` for every prefix of the history.
pub fn cumulative_regret(reward_history: &[f64], optimal_mean: f64) -> Vec<f64> {
    let mut acc = 0.0;
    reward_history
        .iter()
        .enumerate()
        .map(|(i, r)| {
            acc += r;
            (i + 1) as f64 * optimal_mean - acc
        })
        .collect()
}

/// A per-node parameter selection policy.
pub trait Policy: Send {
    /// Chooses the parameters for the next transmission.
    fn select(&mut self, rng: &mut dyn RngCore) -> LoRaParams;

    /// Learns from the outcome of the last transmission and returns the
    /// reward credited for it (the super-arm reward, i.e. the sum over base
    /// arms for decomposed learners).
    fn observe(&mut self, outcome: &TransmissionOutcome) -> f64;
}

/// Serializable agent state: arm label to statistics, plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub t: u64,
    pub arms: BTreeMap<String, ArmStats>,
}

fn restore_arm(snapshot: &AgentSnapshot, key: &str, into: &mut ArmStats) -> Result<()> {
    *into = *snapshot
        .arms
        .get(key)
        .ok_or_else(|| Error::Config(format!("snapshot missing arm {key}")))?;
    Ok(())
}

fn cf_key(mhz: f64) -> String {
    format!("cf:{mhz}")
}

fn sf_key(sf: u8) -> String {
    format!("sf:{sf}")
}

fn tp_key(tp: i8) -> String {
    format!("tp:{tp}")
}

/// UCB1 over all super arms with a success-indicator reward.
#[derive(Debug, Clone)]
pub struct NaiveMab {
    sets: ActionSets,
    c: f64,
    arms: Vec<LoRaParams>,
    stats: Vec<ArmStats>,
    /// `1/sqrt(pulls)` per arm, kept in step with `stats` so a selection
    /// costs one multiply-add per arm.
    inv_sqrt_pulls: Vec<f64>,
    means: Vec<f64>,
    scores: Vec<f64>,
    unexplored: usize,
    t: u64,
}

impl NaiveMab {
    pub fn new(sets: &ActionSets, cfg: &AgentConfig) -> Self {
        let arms = sets.super_arms();
        Self {
            sets: sets.clone(),
            c: cfg.exploration_weight,
            stats: vec![ArmStats::default(); arms.len()],
            inv_sqrt_pulls: vec![f64::INFINITY; arms.len()],
            means: vec![0.0; arms.len()],
            scores: vec![0.0; arms.len()],
            unexplored: arms.len(),
            arms,
            t: 0,
        }
    }

    fn refresh_cache(&mut self) {
        self.inv_sqrt_pulls = self.stats.iter().map(|s| 1.0 / (s.pulls as f64).sqrt()).collect();
        self.means = self.stats.iter().map(|s| s.mean).collect();
        self.scores = vec![0.0; self.stats.len()];
        self.unexplored = self.stats.iter().filter(|s| s.pulls == 0).count();
    }

    fn index_of(&self, p: &LoRaParams) -> usize {
        let n_sf = self.sets.sf.len();
        let n_tp = self.sets.tp_dbm.len();
        let sf = self.sets.sf_index(p.sf).expect("sf in action set");
        let tp = self.sets.tp_index(p.tp_dbm).expect("tp in action set");
        (p.channel as usize * n_sf + sf) * n_tp + tp
    }

    pub fn stats(&self) -> &[ArmStats] {
        &self.stats
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    fn key(&self, p: &LoRaParams) -> String {
        format!("{}/{}/{}", cf_key(self.sets.channels_mhz[p.channel as usize]), sf_key(p.sf), tp_key(p.tp_dbm))
    }

    pub fn snapshot(&self) -> AgentSnapshot {
        let arms = self.arms.iter().zip(&self.stats).map(|(p, s)| (self.key(p), *s)).collect();
        AgentSnapshot { t: self.t, arms }
    }

    pub fn restore(&mut self, snapshot: &AgentSnapshot) -> Result<()> {
        for i in 0..self.arms.len() {
            let key = self.key(&self.arms[i]);
            restore_arm(snapshot, &key, &mut self.stats[i])?;
        }
        self.t = snapshot.t;
        self.refresh_cache();
        Ok(())
    }
}

impl Policy for NaiveMab {
    fn select(&mut self, _rng: &mut dyn RngCore) -> LoRaParams {
        if self.unexplored > 0 {
            return self.arms[ucb_pick(&self.stats, self.t, self.c)];
        }
        let k = self.c * (0.5 * (self.t.max(1) as f64).ln()).sqrt();
        for ((out, &m), &inv) in self.scores.iter_mut().zip(&self.means).zip(&self.inv_sqrt_pulls) {
            *out = m + k * inv;
        }
        // Lane-wise maximum first, then the lowest index that attains it.
        let mut lanes = [f64::NEG_INFINITY; 8];
        let chunks = self.scores.chunks_exact(8);
        let tail = chunks.remainder();
        for chunk in chunks {
            for (l, &x) in lanes.iter_mut().zip(chunk) {
                *l = if x > *l { x } else { *l };
            }
        }
        let best_score = lanes.iter().chain(tail).copied().fold(f64::NEG_INFINITY, f64::max);
        let best = self.scores.iter().position(|&x| x == best_score).unwrap_or(0);
        self.arms[best]
    }

    fn observe(&mut self, outcome: &TransmissionOutcome) -> f64 {
        let reward = indicator(outcome);
        let idx = self.index_of(&outcome.params);
        if self.stats[idx].pulls == 0 {
            self.unexplored -= 1;
        }
        self.stats[idx].record(reward);
        self.inv_sqrt_pulls[idx] = 1.0 / (self.stats[idx].pulls as f64).sqrt();
        self.means[idx] = self.stats[idx].mean;
        self.t += 1;
        reward
    }
}

/// CUCB over the CF, SF and TP base arms.
#[derive(Debug, Clone)]
pub struct DLora {
    sets: ActionSets,
    c: f64,
    shaper: RewardShaper,
    cf: Vec<ArmStats>,
    sf: Vec<ArmStats>,
    tp: Vec<ArmStats>,
    t: u64,
}

impl DLora {
    pub fn new(sets: &ActionSets, cfg: &AgentConfig) -> Self {
        Self {
            sets: sets.clone(),
            c: cfg.exploration_weight,
            shaper: RewardShaper::new(cfg, sets),
            cf: vec![ArmStats::default(); sets.channels_mhz.len()],
            sf: vec![ArmStats::default(); sets.sf.len()],
            tp: vec![ArmStats::default(); sets.tp_dbm.len()],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn cf_stats(&self) -> &[ArmStats] {
        &self.cf
    }

    pub fn sf_stats(&self) -> &[ArmStats] {
        &self.sf
    }

    pub fn tp_stats(&self) -> &[ArmStats] {
        &self.tp
    }

    pub fn snapshot(&self) -> AgentSnapshot {
        let mut arms = BTreeMap::new();
        for (mhz, s) in self.sets.channels_mhz.iter().zip(&self.cf) {
            arms.insert(cf_key(*mhz), *s);
        }
        for (sf, s) in self.sets.sf.iter().zip(&self.sf) {
            arms.insert(sf_key(*sf), *s);
        }
        for (tp, s) in self.sets.tp_dbm.iter().zip(&self.tp) {
            arms.insert(tp_key(*tp), *s);
        }
        AgentSnapshot { t: self.t, arms }
    }

    pub fn restore(&mut self, snapshot: &AgentSnapshot) -> Result<()> {
        for (i, mhz) in self.sets.channels_mhz.iter().enumerate() {
            restore_arm(snapshot, &cf_key(*mhz), &mut self.cf[i])?;
        }
        for (i, sf) in self.sets.sf.iter().enumerate() {
            restore_arm(snapshot, &sf_key(*sf), &mut self.sf[i])?;
        }
        for (i, tp) in self.sets.tp_dbm.iter().enumerate() {
            restore_arm(snapshot, &tp_key(*tp), &mut self.tp[i])?;
        }
        self.t = snapshot.t;
        Ok(())
    }
}

impl Policy for DLora {
    fn select(&mut self, _rng: &mut dyn RngCore) -> LoRaParams {
        let ch = ucb_pick(&self.cf, self.t, self.c);
        let sf = ucb_pick(&self.sf, self.t, self.c);
        let tp = ucb_pick(&self.tp, self.t, self.c);
        LoRaParams {
            channel: ch as u8,
            sf: self.sets.sf[sf],
            tp_dbm: self.sets.tp_dbm[tp],
        }
    }

    fn observe(&mut self, outcome: &TransmissionOutcome) -> f64 {
        let p = &outcome.params;
        let sf = self.sets.sf_index(p.sf).expect("sf in action set");
        let tp = self.sets.tp_index(p.tp_dbm).expect("tp in action set");
        let (r_cf, r_sf, r_tp) = (reward_cf(outcome), self.shaper.sf(outcome), self.shaper.tp(outcome));
        self.cf[p.channel as usize].record(r_cf);
        self.sf[sf].record(r_sf);
        self.tp[tp].record(r_tp);
        self.t += 1;
        r_cf + r_sf + r_tp
    }
}

/// CUCB over SF and TP on a fixed channel with a possibly pruned SF set.
#[derive(Debug, Clone)]
pub struct CdLora {
    channel: u8,
    sf_set: Vec<u8>,
    tp_set: Vec<i8>,
    c: f64,
    shaper: RewardShaper,
    sf: Vec<ArmStats>,
    tp: Vec<ArmStats>,
    t: u64,
}

impl CdLora {
    /// `allowed_sf` is the pruned SF set; SF rewards stay normalized over the
    /// full SF set of `sets`.
    pub fn new(sets: &ActionSets, cfg: &AgentConfig, channel: u8, allowed_sf: &[u8]) -> Result<Self> {
        if allowed_sf.is_empty() {
            return Err(Error::Config("pruned SF set must not be empty".into()));
        }
        if allowed_sf.iter().any(|sf| !sets.sf.contains(sf)) {
            return Err(Error::Config("pruned SF set must be a subset of the SF set".into()));
        }
        if channel as usize >= sets.channels_mhz.len() {
            return Err(Error::Config(format!("channel index {channel} out of range")));
        }
        Ok(Self {
            channel,
            sf_set: allowed_sf.to_vec(),
            tp_set: sets.tp_dbm.clone(),
            c: cfg.exploration_weight,
            shaper: RewardShaper::new(cfg, sets),
            sf: vec![ArmStats::default(); allowed_sf.len()],
            tp: vec![ArmStats::default(); sets.tp_dbm.len()],
            t: 0,
        })
    }

    pub fn channel(&self) -> u8 {
        self.channel
    }

    pub fn allowed_sf(&self) -> &[u8] {
        &self.sf_set
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn snapshot(&self) -> AgentSnapshot {
        let mut arms = BTreeMap::new();
        for (sf, s) in self.sf_set.iter().zip(&self.sf) {
            arms.insert(sf_key(*sf), *s);
        }
        for (tp, s) in self.tp_set.iter().zip(&self.tp) {
            arms.insert(tp_key(*tp), *s);
        }
        AgentSnapshot { t: self.t, arms }
    }

    pub fn restore(&mut self, snapshot: &AgentSnapshot) -> Result<()> {
        for (i, sf) in self.sf_set.iter().enumerate() {
            restore_arm(snapshot, &sf_key(*sf), &mut self.sf[i])?;
        }
        for (i, tp) in self.tp_set.iter().enumerate() {
            restore_arm(snapshot, &tp_key(*tp), &mut self.tp[i])?;
        }
        self.t = snapshot.t;
        Ok(())
    }
}

impl Policy for CdLora {
    fn select(&mut self, _rng: &mut dyn RngCore) -> LoRaParams {
        let sf = ucb_pick(&self.sf, self.t, self.c);
        let tp = ucb_pick(&self.tp, self.t, self.c);
        LoRaParams {
            channel: self.channel,
            sf: self.sf_set[sf],
            tp_dbm: self.tp_set[tp],
        }
    }

    fn observe(&mut self, outcome: &TransmissionOutcome) -> f64 {
        let p = &outcome.params;
        let sf = self.sf_set.iter().position(|&s| s == p.sf).expect("sf in pruned set");
        let tp = self.tp_set.iter().position(|&t| t == p.tp_dbm).expect("tp in action set");
        let (r_sf, r_tp) = (self.shaper.sf(outcome), self.shaper.tp(outcome));
        self.sf[sf].record(r_sf);
        self.tp[tp].record(r_tp);
        self.t += 1;
        r_sf + r_tp
    }
}
