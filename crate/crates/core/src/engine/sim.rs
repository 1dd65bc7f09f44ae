use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use super::config::{AgentKind, AgentSpec, ChannelProfile, RunConfig, ScenarioConfig};
use super::metrics::{Collector, MetricsReport, PacketRecord, SetupSummary};
use crate::baselines::{RandomPolicy, StaticPolicy};
use crate::bandit::{CdLora, DLora, NaiveMab, Policy, TransmissionOutcome};
use crate::caasi::{self, CaasiOutcome, ChannelPlan, LinkProbe};
use crate::collision::{CollisionModel, Transmission};
use crate::error::{Error, Result};
use crate::phy::{self, LoRaParams, RadioConstants};

/// Closest distance to the gateway used by the path loss model.
const MIN_DISTANCE_M: f64 = 1.0;

/// Area-uniform placement on a disk centered on the gateway.
pub fn place_nodes(n: usize, radius_m: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = radius_m * rng.random::<f64>().sqrt();
            let theta = 2.0 * PI * rng.random::<f64>();
            (r * theta.cos(), r * theta.sin())
        })
        .collect()
}

/// Propagation state shared by the setup phase and the main loop.
struct Channel<'a> {
    profiles: &'a [ChannelProfile],
    radio: &'a RadioConstants,
    distances: &'a [f64],
    noise: Normal<f64>,
    rng: ChaCha8Rng,
}

impl Channel<'_> {
    /// Samples (rssi, noise) for one packet.
    fn sample(&mut self, node: usize, params: LoRaParams, start_s: f64) -> (f64, f64) {
        let pl = self.profiles[params.channel as usize].active_at(start_s / 3600.0);
        let shadow = pl.shadow_sigma_db * self.rng.sample::<f64, _>(rand_distr::StandardNormal);
        let rssi = params.tp_dbm as f64 - pl.mean_loss_db(self.distances[node]) - shadow;
        let noise = self.noise.sample(&mut self.rng);
        (rssi, noise)
    }
}

impl LinkProbe for Channel<'_> {
    fn probe(&mut self, node: usize, params: LoRaParams, start_s: f64) -> Option<f64> {
        let (rssi, noise) = self.sample(node, params, start_s);
        let sf = params.sf;
        let sensitivity = phy::receiver_sensitivity_dbm(sf, self.radio.bandwidth_hz).ok()?;
        let ok = rssi >= sensitivity && rssi - noise >= phy::sinr_threshold_db(sf).ok()?;
        ok.then_some(rssi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    End(u64),
    Start(usize),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl Event {
    fn rank(&self) -> u8 {
        match self.kind {
            EventKind::End(_) => 0,
            EventKind::Start(_) => 1,
        }
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so that BinaryHeap pops the earliest event; ends precede
    // starts at equal times so an outcome is learned before the next choice.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.rank().cmp(&self.rank()))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct OnAir {
    id: u64,
    tx: Transmission,
    noise_dbm: f64,
    resolved: bool,
}

struct Node {
    distance_m: f64,
    policy: Box<dyn Policy>,
    rng: ChaCha8Rng,
    next_gen_s: f64,
    steps: u64,
}

fn build_policies(cfg: &ScenarioConfig, agent: &AgentSpec, plan: Option<&ChannelPlan>) -> Result<Vec<Box<dyn Policy>>> {
    let sets = &cfg.action_sets;
    (0..cfg.n_nodes)
        .map(|i| -> Result<Box<dyn Policy>> {
            Ok(match agent.kind {
                AgentKind::Random => Box::new(RandomPolicy::new(sets)),
                AgentKind::NaiveMab => Box::new(NaiveMab::new(sets, &agent.learning)),
                AgentKind::DLora => Box::new(DLora::new(sets, &agent.learning)),
                AgentKind::Static => Box::new(StaticPolicy::new(agent.fixed.expect("validated"))),
                AgentKind::CdLora => {
                    let plan = plan.expect("caasi plan");
                    Box::new(CdLora::new(sets, &agent.learning, plan.assignment[i], &plan.pruned_sf[i])?)
                }
                AgentKind::CaasiMaxSf => {
                    let plan = plan.expect("caasi plan");
                    Box::new(StaticPolicy::new(LoRaParams {
                        channel: plan.assignment[i],
                        sf: sets.max_sf(),
                        tp_dbm: sets.max_tp(),
                    }))
                }
            })
        })
        .collect()
}

/// Packet-level record handed to a run observer.
#[derive(Debug, Clone, PartialEq)]
pub struct TxRecord {
    pub tx: Transmission,
    /// `false` for CAASI setup packets.
    pub learning: bool,
}

/// Runs one scenario to completion.
pub fn run(scenario: &ScenarioConfig, agent: &AgentSpec) -> Result<MetricsReport> {
    run_with_observer(scenario, agent, &mut |_| {}).map(|(report, _)| report)
}

pub fn run_config(cfg: &RunConfig) -> Result<MetricsReport> {
    run(&cfg.scenario, &cfg.agent)
}

/// Runs one scenario and reports every resolved packet to `observer`.
/// Also returns the CAASI outcome when the agent needed a setup phase.
pub fn run_with_observer(
    scenario: &ScenarioConfig,
    agent: &AgentSpec,
    observer: &mut dyn FnMut(&TxRecord),
) -> Result<(MetricsReport, Option<CaasiOutcome>)> {
    scenario.validate()?;
    agent.validate(scenario)?;

    let sets = &scenario.action_sets;
    let radio = &scenario.radio;
    let profiles = scenario.resolved_profiles();
    let positions = scenario
        .node_positions
        .clone()
        .unwrap_or_else(|| place_nodes(scenario.n_nodes, scenario.radius_m, scenario.topology_seed));
    let distances: Vec<f64> = positions.iter().map(|(x, y)| x.hypot(*y).max(MIN_DISTANCE_M)).collect();
    let noise = Normal::new(radio.noise_floor_dbm(), radio.awgn_sigma_db)
        .map_err(|e| Error::Config(format!("noise model: {e}")))?;
    let mut channel = Channel {
        profiles: &profiles,
        radio,
        distances: &distances,
        noise,
        rng: ChaCha8Rng::seed_from_u64(scenario.channel_seed),
    };
    let toa: Vec<f64> = sets.sf.iter().map(|&sf| phy::time_on_air_s(scenario.payload_bytes, sf, radio)).collect();
    let payload_bits = 8 * scenario.payload_bytes as u64;
    let energy = |p: &LoRaParams, toa_s: f64| phy::tx_energy_mj(p.tp_dbm as f64, toa_s, scenario.energy_convention);
    let dims = (sets.n_channels(), sets.sf.len(), sets.tp_dbm.len());
    let mut collector = Collector::new(scenario.n_nodes, scenario.window_h, scenario.step_bucket, dims);
    let duration_s = scenario.duration_h * 3600.0;

    // Centralized setup, if the agent needs a channel plan.
    let mut setup = None;
    let mut caasi_outcome = None;
    let mut learning_start_s = 0.0;
    let plan = if agent.kind.uses_caasi() {
        match &agent.plan {
            Some(saved) => Some(saved.clone()),
            None => {
                let outcome = caasi::run_caasi(
                    scenario.n_nodes,
                    sets,
                    radio,
                    scenario.payload_bytes,
                    &agent.caasi,
                    0.0,
                    &mut channel,
                );
                let counted = agent.include_setup_in_metrics;
                for p in &outcome.packets {
                    let tx = Transmission {
                        node: p.node,
                        params: p.params,
                        payload_bytes: scenario.payload_bytes,
                        start_s: p.start_s,
                        toa_s: p.toa_s,
                        rssi_dbm: f64::NAN,
                        collided: false,
                        signal_lost: !p.received,
                    };
                    observer(&TxRecord { tx, learning: false });
                    if counted && p.start_s < duration_s {
                        collector.record(PacketRecord {
                            node: p.node,
                            params: &p.params,
                            sf_index: sets.sf_index(p.params.sf).expect("sf in set"),
                            tp_index: sets.tp_index(p.params.tp_dbm).expect("tp in set"),
                            start_s: p.start_s,
                            payload_bits,
                            energy_mj: energy(&p.params, p.toa_s),
                            collided: false,
                            signal_lost: !p.received,
                            step: None,
                            reward: 0.0,
                        });
                    }
                }
                setup = Some(SetupSummary {
                    packets: outcome.packets.len() as u64,
                    received: outcome.packets.iter().filter(|p| p.received).count() as u64,
                    energy_mj: outcome.energy_mj(scenario.energy_convention),
                    duration_s: outcome.duration_s,
                    counted_in_metrics: counted,
                });
                learning_start_s = outcome.duration_s;
                let plan = outcome.plan.clone();
                caasi_outcome = Some(outcome);
                Some(plan)
            }
        }
    } else {
        None
    };

    let policies = build_policies(scenario, agent, plan.as_ref())?;
    let inter_arrival = Exp::new(1.0 / scenario.mean_interval_s).map_err(|e| Error::Config(format!("traffic: {e}")))?;
    let mut traffic_rng = ChaCha8Rng::seed_from_u64(scenario.traffic_seed);
    let mut nodes: Vec<Node> = policies
        .into_iter()
        .enumerate()
        .map(|(i, policy)| Node {
            distance_m: distances[i],
            policy,
            rng: ChaCha8Rng::seed_from_u64(scenario.traffic_seed ^ (i as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)),
            next_gen_s: learning_start_s + inter_arrival.sample(&mut traffic_rng),
            steps: 0,
        })
        .collect();

    let mut queue = BinaryHeap::new();
    let mut seq = 0u64;
    for (i, node) in nodes.iter().enumerate() {
        if node.next_gen_s < duration_s {
            queue.push(Event { time: node.next_gen_s, seq, kind: EventKind::Start(i) });
            seq += 1;
        }
    }

    let model = CollisionModel::new(scenario.collision, *radio);
    let mut on_air: Vec<OnAir> = Vec::new();
    let mut next_id = 0u64;
    let mut prune_at = 32usize;

    while let Some(event) = queue.pop() {
        match event.kind {
            EventKind::Start(i) => {
                let node = &mut nodes[i];
                let params = node.policy.select(&mut node.rng);
                let sf_index = sets.sf_index(params.sf).expect("policy chose an sf outside the set");
                let toa_s = toa[sf_index];
                let (rssi, noise_dbm) = channel.sample(i, params, event.time);
                debug_assert_eq!(channel.distances[i], node.distance_m);
                let id = next_id;
                next_id += 1;
                on_air.push(OnAir {
                    id,
                    tx: Transmission {
                        node: i,
                        params,
                        payload_bytes: scenario.payload_bytes,
                        start_s: event.time,
                        toa_s,
                        rssi_dbm: rssi,
                        collided: false,
                        signal_lost: false,
                    },
                    noise_dbm,
                    resolved: false,
                });
                queue.push(Event { time: event.time + toa_s, seq, kind: EventKind::End(id) });
                seq += 1;

                // Poisson generation; a packet generated while busy waits for the radio.
                node.next_gen_s += inter_arrival.sample(&mut traffic_rng);
                let next_start = node.next_gen_s.max(event.time + toa_s);
                if next_start < duration_s {
                    queue.push(Event { time: next_start, seq, kind: EventKind::Start(i) });
                    seq += 1;
                }
            }
            EventKind::End(id) => {
                let j = on_air.iter().position(|a| a.id == id).expect("ended packet is on air");
                let (collided, signal_lost) = {
                    let me = &on_air[j];
                    let others = || on_air.iter().filter(move |a| a.id != id).map(|a| &a.tx);
                    (
                        model.is_collided(&me.tx, others()),
                        model.is_signal_lost(&me.tx, others(), me.noise_dbm),
                    )
                };
                let entry = &mut on_air[j];
                entry.resolved = true;
                entry.tx.collided = collided;
                entry.tx.signal_lost = signal_lost;
                let tx = &entry.tx;
                let node = &mut nodes[tx.node];
                let success = tx.received();
                let reward = node.policy.observe(&TransmissionOutcome { success, params: tx.params });
                collector.record(PacketRecord {
                    node: tx.node,
                    params: &tx.params,
                    sf_index: sets.sf_index(tx.params.sf).expect("sf in set"),
                    tp_index: sets.tp_index(tx.params.tp_dbm).expect("tp in set"),
                    start_s: tx.start_s,
                    payload_bits,
                    energy_mj: energy(&tx.params, tx.toa_s),
                    collided,
                    signal_lost,
                    step: Some(node.steps),
                    reward,
                });
                node.steps += 1;
                observer(&TxRecord { tx: tx.clone(), learning: true });

                // A resolved packet matters only while some unresolved one started before it ended.
                // Stale entries never overlap later packets, so pruning can be batched.
                if on_air.len() >= prune_at {
                    let horizon = on_air
                        .iter()
                        .filter(|a| !a.resolved)
                        .map(|a| a.tx.start_s)
                        .fold(f64::INFINITY, f64::min);
                    on_air.retain(|a| !a.resolved || a.tx.end_s() > horizon);
                    prune_at = (2 * on_air.len()).max(32);
                }
            }
        }
    }

    let report = collector.finish(
        agent.kind.label(),
        scenario.duration_h,
        scenario.utility_weights,
        scenario.ee_scale,
        scenario.regret_reference,
        setup,
    )?;
    Ok((report, caasi_outcome))
}
