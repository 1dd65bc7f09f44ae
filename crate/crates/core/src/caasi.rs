//! Centralized channel allocation and action-space initialization (CAASI).
//!
//! Three phases, all driven by the gateway before distributed learning starts:
//!
//! 1. TDMA data collection: nodes in batches of |CF| rotate over every
//!    channel at maximum SF and TP while the gateway logs RSSI into a
//!    node × channel matrix.
//! 2. Channel allocation: channels ranked by mean RSSI, nodes ranked by
//!    vulnerability, and the k-th most vulnerable group of nodes is mapped to
//!    the k-th best channel.
//! 3. SF pruning: each node probes every SF at maximum TP on its channel and
//!    drops SFs whose delivery ratio falls below `pdr_min`.
//!
//! The result is an immutable [`ChannelPlan`] consumed by CD-LoRa agents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::{self, ActionSets, EnergyConvention, LoRaParams, RadioConstants};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleSlot {
    pub slot: usize,
    pub node: usize,
    pub channel: usize,
}

/// TDMA collection schedule; within a slot every channel carries at most one node.
pub fn collection_schedule(n_nodes: usize, n_channels: usize) -> Vec<ScheduleSlot> {
    let mut schedule = Vec::with_capacity(n_nodes * n_channels);
    if n_channels == 0 {
        return schedule;
    }
    let mut slot = 0;
    for batch_start in (0..n_nodes).step_by(n_channels) {
        let batch_end = (batch_start + n_channels).min(n_nodes);
        for j in 0..n_channels {
            for node in batch_start..batch_end {
                schedule.push(ScheduleSlot { slot, node, channel: (node + j) % n_channels });
            }
            slot += 1;
        }
    }
    schedule
}

/// Gateway-side record of received RSSI per node and channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkQualityMatrix {
    n_nodes: usize,
    n_channels: usize,
    rssi_sum: Vec<f64>,
    samples: Vec<u64>,
}

impl LinkQualityMatrix {
    pub fn new(n_nodes: usize, n_channels: usize) -> Self {
        Self {
            n_nodes,
            n_channels,
            rssi_sum: vec![0.0; n_nodes * n_channels],
            samples: vec![0; n_nodes * n_channels],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn record(&mut self, node: usize, channel: usize, rssi_dbm: f64) {
        let i = node * self.n_channels + channel;
        self.rssi_sum[i] += rssi_dbm;
        self.samples[i] += 1;
    }

    pub fn samples(&self, node: usize, channel: usize) -> u64 {
        self.samples[node * self.n_channels + channel]
    }

    /// Mean RSSI (dBm domain) of a node on a channel, if anything was heard.
    pub fn mean_rssi(&self, node: usize, channel: usize) -> Option<f64> {
        let i = node * self.n_channels + channel;
        (self.samples[i] > 0).then(|| self.rssi_sum[i] / self.samples[i] as f64)
    }
}

/// Sample-weighted mean RSSI on a channel; `-inf` when nothing was received.
pub fn channel_quality(m: &LinkQualityMatrix, channel: usize) -> f64 {
    let (sum, n) = (0..m.n_nodes).fold((0.0, 0u64), |(sum, n), node| {
        let i = node * m.n_channels + channel;
        (sum + m.rssi_sum[i], n + m.samples[i])
    });
    if n == 0 {
        f64::NEG_INFINITY
    } else {
        sum / n as f64
    }
}

/// Negated mean RSSI of a node across channels; `+inf` when never received.
pub fn node_vulnerability(m: &LinkQualityMatrix, node: usize) -> f64 {
    let row = node * m.n_channels..(node + 1) * m.n_channels;
    let sum: f64 = m.rssi_sum[row.clone()].iter().sum();
    let n: u64 = m.samples[row].iter().sum();
    if n == 0 {
        f64::INFINITY
    } else {
        -(sum / n as f64)
    }
}

/// Channels sorted best first; ties keep channel index order.
pub fn rank_channels(m: &LinkQualityMatrix) -> Vec<usize> {
    let q: Vec<f64> = (0..m.n_channels).map(|c| channel_quality(m, c)).collect();
    let mut order: Vec<usize> = (0..m.n_channels).collect();
    order.sort_by(|&a, &b| q[b].total_cmp(&q[a]));
    order
}

/// Nodes sorted most vulnerable first; ties keep node id order.
pub fn rank_nodes(m: &LinkQualityMatrix) -> Vec<usize> {
    let v: Vec<f64> = (0..m.n_nodes).map(|n| node_vulnerability(m, n)).collect();
    let mut order: Vec<usize> = (0..m.n_nodes).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    order
}

/// Sizes of the |CF| contiguous groups; the first `N mod |CF|` get one extra node.
pub fn group_sizes(n_nodes: usize, n_channels: usize) -> Vec<usize> {
    let base = n_nodes / n_channels;
    let rem = n_nodes % n_channels;
    (0..n_channels).map(|k| base + usize::from(k < rem)).collect()
}

/// Rank-based, order-preserving assignment; returns the channel of every node.
pub fn allocate_channels(m: &LinkQualityMatrix) -> Vec<usize> {
    let channels = rank_channels(m);
    let nodes = rank_nodes(m);
    let mut assignment = vec![0; m.n_nodes];
    let mut cursor = 0;
    for (k, size) in group_sizes(m.n_nodes, m.n_channels).into_iter().enumerate() {
        for &node in &nodes[cursor..cursor + size] {
            assignment[node] = channels[k];
        }
        cursor += size;
    }
    assignment
}

/// SFs whose probe PDR reaches `pdr_min`; falls back to the largest SF.
pub fn prune_sf_actions(probe_pdr: &[(u8, f64)], pdr_min: f64) -> Vec<u8> {
    let mut kept: Vec<u8> = probe_pdr.iter().filter(|(_, pdr)| *pdr >= pdr_min).map(|(sf, _)| *sf).collect();
    if kept.is_empty() {
        kept.extend(probe_pdr.iter().map(|(sf, _)| *sf).max());
    }
    kept.sort_unstable();
    kept
}

/// Output of CAASI: a fixed channel and a pruned SF set per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    pub assignment: Vec<u8>,
    pub pruned_sf: Vec<Vec<u8>>,
}

impl ChannelPlan {
    pub fn validate(&self, sets: &ActionSets) -> Result<()> {
        if self.assignment.len() != self.pruned_sf.len() {
            return Err(Error::Config("plan assignment and pruned_sf lengths differ".into()));
        }
        for (node, (ch, sfs)) in self.assignment.iter().zip(&self.pruned_sf).enumerate() {
            if *ch as usize >= sets.n_channels() {
                return Err(Error::Config(format!("node {node} assigned to unknown channel {ch}")));
            }
            if sfs.is_empty() || sfs.iter().any(|sf| !sets.sf.contains(sf)) {
                return Err(Error::Config(format!("node {node} has an invalid pruned SF set")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaasiConfig {
    pub pdr_min: f64,
    /// Packets per SF in the feasibility probe.
    pub probe_packets: u32,
}

impl Default for CaasiConfig {
    fn default() -> Self {
        Self { pdr_min: 0.25, probe_packets: 20 }
    }
}

/// One setup transmission, for accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetupPacket {
    pub node: usize,
    pub params: LoRaParams,
    pub start_s: f64,
    pub toa_s: f64,
    pub received: bool,
}

/// Link access used by CAASI. Setup packets never contend with each other,
/// so the probe only has to model propagation and the receiver thresholds.
pub trait LinkProbe {
    /// Sends one packet and returns its RSSI if the gateway decoded it.
    fn probe(&mut self, node: usize, params: LoRaParams, start_s: f64) -> Option<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaasiOutcome {
    pub plan: ChannelPlan,
    pub matrix: LinkQualityMatrix,
    /// Probe PDR per node, in SF-set order.
    pub probe_pdr: Vec<Vec<(u8, f64)>>,
    pub packets: Vec<SetupPacket>,
    pub duration_s: f64,
}

impl CaasiOutcome {
    pub fn energy_mj(&self, tp_energy: EnergyConvention) -> f64 {
        self.packets
            .iter()
            .map(|p| phy::tx_energy_mj(p.params.tp_dbm as f64, p.toa_s, tp_energy))
            .sum()
    }
}

/// Runs all three CAASI phases starting at `start_s`.
pub fn run_caasi(
    n_nodes: usize,
    sets: &ActionSets,
    radio: &RadioConstants,
    payload_bytes: u32,
    cfg: &CaasiConfig,
    start_s: f64,
    link: &mut dyn LinkProbe,
) -> CaasiOutcome {
    let n_channels = sets.n_channels();
    let max_sf = sets.max_sf();
    let max_tp = sets.max_tp();
    let mut packets = Vec::new();
    let mut matrix = LinkQualityMatrix::new(n_nodes, n_channels);

    let slot_len = phy::time_on_air_s(payload_bytes, max_sf, radio);
    let mut now = start_s;
    let mut current_slot = 0;
    for entry in collection_schedule(n_nodes, n_channels) {
        if entry.slot != current_slot {
            now += slot_len * (entry.slot - current_slot) as f64;
            current_slot = entry.slot;
        }
        let params = LoRaParams { channel: entry.channel as u8, sf: max_sf, tp_dbm: max_tp };
        let rssi = link.probe(entry.node, params, now);
        if let Some(r) = rssi {
            matrix.record(entry.node, entry.channel, r);
        }
        packets.push(SetupPacket { node: entry.node, params, start_s: now, toa_s: slot_len, received: rssi.is_some() });
    }
    if n_nodes > 0 {
        now += slot_len;
    }

    let assignment = allocate_channels(&matrix);

    // Groups in rank order; round r probes the r-th node of every group at once.
    let ranked = rank_nodes(&matrix);
    let mut groups: Vec<&[usize]> = Vec::with_capacity(n_channels);
    let mut cursor = 0;
    for size in group_sizes(n_nodes, n_channels) {
        groups.push(&ranked[cursor..cursor + size]);
        cursor += size;
    }
    let rounds = groups.iter().map(|g| g.len()).max().unwrap_or(0);
    let mut probe_pdr = vec![Vec::new(); n_nodes];
    for round in 0..rounds {
        let round_start = now;
        for group in &groups {
            let Some(&node) = group.get(round) else { continue };
            let mut t = round_start;
            for &sf in &sets.sf {
                let toa = phy::time_on_air_s(payload_bytes, sf, radio);
                let params = LoRaParams { channel: assignment[node] as u8, sf, tp_dbm: max_tp };
                let mut ok = 0;
                for _ in 0..cfg.probe_packets {
                    let received = link.probe(node, params, t).is_some();
                    ok += received as u32;
                    packets.push(SetupPacket { node, params, start_s: t, toa_s: toa, received });
                    t += toa;
                }
                let pdr = if cfg.probe_packets == 0 { 1.0 } else { ok as f64 / cfg.probe_packets as f64 };
                probe_pdr[node].push((sf, pdr));
            }
            now = now.max(t);
        }
    }

    let pruned_sf = probe_pdr.iter().map(|p| prune_sf_actions(p, cfg.pdr_min)).collect();
    CaasiOutcome {
        plan: ChannelPlan {
            assignment: assignment.into_iter().map(|c| c as u8).collect(),
            pruned_sf,
        },
        matrix,
        probe_pdr,
        packets,
        duration_s: now - start_s,
    }
}
