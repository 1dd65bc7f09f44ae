use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::LoRaParams;

/// Fraction of sent packets that were received; `None` when nothing was sent.
pub fn compute_pdr(sent: u64, received: u64) -> Result<Option<f64>> {
    if received > sent {
        return Err(Error::Invariant(format!("received {received} > sent {sent}")));
    }
    Ok((sent > 0).then(|| received as f64 / sent as f64))
}

/// Delivered payload bits per mJ of total transmit energy; `None` when idle.
pub fn compute_ee(received_payload_bits: u64, total_energy_mj: f64) -> Result<Option<f64>> {
    if total_energy_mj > 0.0 {
        Ok(Some(received_payload_bits as f64 / total_energy_mj))
    } else if received_payload_bits == 0 {
        Ok(None)
    } else {
        Err(Error::Invariant("bits delivered without spending energy".into()))
    }
}

pub fn compute_utility(pdr: f64, ee: f64, alpha1: f64, alpha2: f64, ee_scale: f64) -> f64 {
    alpha1 * pdr + alpha2 * (ee / ee_scale)
}

/// First index after which `series` stays within `tolerance` (relative) of
/// its final level, the mean of the last tenth of the series.
pub fn settling_index(series: &[f64], tolerance: f64) -> Option<usize> {
    if series.is_empty() {
        return None;
    }
    let tail = (series.len() / 10).max(1);
    let level = series[series.len() - tail..].iter().sum::<f64>() / tail as f64;
    let band = tolerance * level.abs();
    let last_out = series.iter().rposition(|v| (v - level).abs() > band);
    Some(last_out.map_or(0, |i| i + 1))
}

/// Per-node packet accounting.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NodeTally {
    pub sent: u64,
    pub received: u64,
    pub collision_lost: u64,
    pub signal_lost: u64,
    pub energy_mj: f64,
}

/// Usage counts per channel index, per SF and per TP (in action-set order).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UsageHistogram {
    pub channel: Vec<u64>,
    pub sf: Vec<u64>,
    pub tp: Vec<u64>,
}

impl UsageHistogram {
    pub fn new(n_channels: usize, n_sf: usize, n_tp: usize) -> Self {
        Self { channel: vec![0; n_channels], sf: vec![0; n_sf], tp: vec![0; n_tp] }
    }

    pub fn add(&mut self, other: &UsageHistogram) {
        for (a, b) in self.channel.iter_mut().zip(&other.channel) {
            *a += b;
        }
        for (a, b) in self.sf.iter_mut().zip(&other.sf) {
            *a += b;
        }
        for (a, b) in self.tp.iter_mut().zip(&other.tp) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.channel.iter().sum()
    }

    /// Largest share held by a single SF.
    pub fn max_sf_share(&self) -> f64 {
        let total = self.sf.iter().sum::<u64>();
        if total == 0 {
            return 0.0;
        }
        *self.sf.iter().max().unwrap() as f64 / total as f64
    }
}

/// One row of the windowed time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub start_h: f64,
    /// End of the window, clipped to the run duration.
    pub time_h: f64,
    pub sent: u64,
    pub received: u64,
    pub payload_bits: u64,
    pub energy_mj: f64,
    pub pdr: Option<f64>,
    pub ee: Option<f64>,
    pub utility: Option<f64>,
    /// Cumulative per-node regret at the end of the window.
    pub regret: Option<f64>,
    pub usage: UsageHistogram,
}

/// Learning-progress series indexed by per-node transmission count.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepBucket {
    pub sent: u64,
    pub received: u64,
    /// Sum of the rewards the agents credited themselves.
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SetupSummary {
    pub packets: u64,
    pub received: u64,
    pub energy_mj: f64,
    pub duration_s: f64,
    pub counted_in_metrics: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub agent: String,
    pub duration_h: f64,
    pub window_h: f64,
    pub step_bucket: u64,
    pub windows: Vec<WindowRow>,
    pub step_series: Vec<StepBucket>,
    pub per_node: Vec<NodeTally>,
    pub gateway_received: u64,
    pub total_sent: u64,
    pub total_energy_mj: f64,
    pub payload_bits_received: u64,
    pub pdr: Option<f64>,
    pub ee: Option<f64>,
    pub ee_scale: Option<f64>,
    pub usage: UsageHistogram,
    pub setup: Option<SetupSummary>,
}

impl MetricsReport {
    pub fn final_window(&self) -> Option<&WindowRow> {
        self.windows.iter().rev().find(|w| w.sent > 0)
    }

    /// Pooled PDR over the windows starting in `[from_h, to_h)`.
    pub fn pdr_between(&self, from_h: f64, to_h: f64) -> Option<f64> {
        let (s, r) = self
            .windows
            .iter()
            .filter(|w| w.start_h >= from_h && w.start_h < to_h)
            .fold((0, 0), |(s, r), w| (s + w.sent, r + w.received));
        compute_pdr(s, r).ok().flatten()
    }

    pub fn usage_between(&self, from_h: f64, to_h: f64) -> UsageHistogram {
        let mut total = UsageHistogram::new(self.usage.channel.len(), self.usage.sf.len(), self.usage.tp.len());
        for w in self.windows.iter().filter(|w| w.start_h >= from_h && w.start_h < to_h) {
            total.add(&w.usage);
        }
        total
    }

    /// Buckets every node has fully contributed to.
    fn complete_steps(&self) -> impl Iterator<Item = &StepBucket> {
        let full = self.per_node.len() as u64 * self.step_bucket;
        self.step_series.iter().take_while(move |b| b.sent == full && full > 0)
    }

    /// Success ratio per complete step bucket.
    pub fn step_pdr(&self) -> Vec<f64> {
        self.complete_steps().map(|b| b.received as f64 / b.sent as f64).collect()
    }

    /// Mean credited reward per complete step bucket.
    pub fn step_reward(&self) -> Vec<f64> {
        self.complete_steps().map(|b| b.reward / b.sent as f64).collect()
    }

    pub fn check_invariants(&self) -> Result<()> {
        let mut received = 0;
        for (i, n) in self.per_node.iter().enumerate() {
            if n.sent != n.received + n.collision_lost + n.signal_lost {
                return Err(Error::Invariant(format!("node {i} tallies do not add up")));
            }
            received += n.received;
        }
        if received != self.gateway_received {
            return Err(Error::Invariant("gateway tally differs from node tallies".into()));
        }
        for w in &self.windows {
            if let Some(p) = w.pdr {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Invariant("pdr outside [0, 1]".into()));
                }
            }
            if w.ee.is_some_and(|e| e < 0.0) {
                return Err(Error::Invariant("negative ee".into()));
            }
        }
        Ok(())
    }

    /// CSV time series with a versioned comment header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# lora-mab timeseries v1\ntime_h,sent,received,pdr,ee,utility,regret\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for w in &self.windows {
            out.push_str(&format!(
                "{:.3},{},{},{},{},{},{}\n",
                w.time_h,
                w.sent,
                w.received,
                opt(w.pdr),
                opt(w.ee),
                opt(w.utility),
                opt(w.regret)
            ));
        }
        out
    }
}

/// Accumulates per-packet results during a run.
#[derive(Debug, Clone)]
pub(crate) struct Collector {
    window_h: f64,
    step_bucket: u64,
    n_nodes: usize,
    dims: (usize, usize, usize),
    windows: Vec<WindowRow>,
    steps: Vec<StepBucket>,
    per_node: Vec<NodeTally>,
}

pub(crate) struct PacketRecord<'a> {
    pub node: usize,
    pub params: &'a LoRaParams,
    pub sf_index: usize,
    pub tp_index: usize,
    pub start_s: f64,
    pub payload_bits: u64,
    pub energy_mj: f64,
    pub collided: bool,
    pub signal_lost: bool,
    /// Per-node learning step, absent for setup packets.
    pub step: Option<u64>,
    pub reward: f64,
}

impl Collector {
    pub fn new(n_nodes: usize, window_h: f64, step_bucket: u64, dims: (usize, usize, usize)) -> Self {
        Self {
            window_h,
            step_bucket,
            n_nodes,
            dims,
            windows: Vec::new(),
            steps: Vec::new(),
            per_node: vec![NodeTally::default(); n_nodes],
        }
    }

    pub fn record(&mut self, p: PacketRecord<'_>) {
        let received = !p.collided && !p.signal_lost;
        let tally = &mut self.per_node[p.node];
        tally.sent += 1;
        tally.energy_mj += p.energy_mj;
        if p.collided {
            tally.collision_lost += 1;
        } else if p.signal_lost {
            tally.signal_lost += 1;
        } else {
            tally.received += 1;
        }

        let w = (p.start_s / 3600.0 / self.window_h) as usize;
        while self.windows.len() <= w {
            let k = self.windows.len();
            let (c, s, t) = self.dims;
            self.windows.push(WindowRow {
                start_h: k as f64 * self.window_h,
                time_h: (k + 1) as f64 * self.window_h,
                sent: 0,
                received: 0,
                payload_bits: 0,
                energy_mj: 0.0,
                pdr: None,
                ee: None,
                utility: None,
                regret: None,
                usage: UsageHistogram::new(c, s, t),
            });
        }
        let row = &mut self.windows[w];
        row.sent += 1;
        row.energy_mj += p.energy_mj;
        if received {
            row.received += 1;
            row.payload_bits += p.payload_bits;
        }
        row.usage.channel[p.params.channel as usize] += 1;
        row.usage.sf[p.sf_index] += 1;
        row.usage.tp[p.tp_index] += 1;

        if let Some(step) = p.step {
            let b = (step / self.step_bucket) as usize;
            if self.steps.len() <= b {
                self.steps.resize(b + 1, StepBucket::default());
            }
            self.steps[b].sent += 1;
            self.steps[b].received += received as u64;
            self.steps[b].reward += p.reward;
        }
    }

    pub fn finish(
        mut self,
        agent: &str,
        duration_h: f64,
        weights: (f64, f64),
        ee_scale: Option<f64>,
        regret_reference: Option<f64>,
        setup: Option<SetupSummary>,
    ) -> Result<MetricsReport> {
        // Pad to the full horizon so quiet trailing windows still show up.
        let n_windows = (duration_h / self.window_h).ceil() as usize;
        while self.windows.len() < n_windows {
            let k = self.windows.len();
            let (c, s, t) = self.dims;
            self.windows.push(WindowRow {
                start_h: k as f64 * self.window_h,
                time_h: (k + 1) as f64 * self.window_h,
                sent: 0,
                received: 0,
                payload_bits: 0,
                energy_mj: 0.0,
                pdr: None,
                ee: None,
                utility: None,
                regret: None,
                usage: UsageHistogram::new(c, s, t),
            });
        }
        for w in &mut self.windows {
            w.time_h = w.time_h.min(duration_h);
            w.pdr = compute_pdr(w.sent, w.received)?;
            w.ee = compute_ee(w.payload_bits, w.energy_mj)?;
        }
        let scale = ee_scale.or_else(|| {
            self.windows.iter().filter_map(|w| w.ee).filter(|&e| e > 0.0).max_by(f64::total_cmp)
        });
        let (mut cum_sent, mut cum_received) = (0u64, 0u64);
        for w in &mut self.windows {
            if let (Some(pdr), Some(ee), Some(scale)) = (w.pdr, w.ee, scale) {
                w.utility = Some(compute_utility(pdr, ee, weights.0, weights.1, scale));
            }
            cum_sent += w.sent;
            cum_received += w.received;
            if let Some(r_star) = regret_reference {
                w.regret = Some((cum_sent as f64 * r_star - cum_received as f64) / self.n_nodes as f64);
            }
        }

        let (c, s, t) = self.dims;
        let mut usage = UsageHistogram::new(c, s, t);
        for w in &self.windows {
            usage.add(&w.usage);
        }
        let total_sent: u64 = self.per_node.iter().map(|n| n.sent).sum();
        let gateway_received: u64 = self.per_node.iter().map(|n| n.received).sum();
        let total_energy_mj: f64 = self.per_node.iter().map(|n| n.energy_mj).sum();
        let payload_bits_received: u64 = self.windows.iter().map(|w| w.payload_bits).sum();
        let report = MetricsReport {
            agent: agent.to_string(),
            duration_h,
            window_h: self.window_h,
            step_bucket: self.step_bucket,
            windows: self.windows,
            step_series: self.steps,
            per_node: self.per_node,
            gateway_received,
            total_sent,
            total_energy_mj,
            payload_bits_received,
            pdr: compute_pdr(total_sent, gateway_received)?,
            ee: compute_ee(payload_bits_received, total_energy_mj)?,
            ee_scale: scale,
            usage,
            setup,
        };
        report.check_invariants()?;
        Ok(report)
    }
}
