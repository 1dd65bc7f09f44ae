//! Acceptance criteria, one test each.
//!
//! Every test writes a single `ACCEPTANCE <id> PASS|FAIL ...` line straight
//! to stderr so the verdicts show up even when output capture is on. A
//! global lock keeps the heavy runs from overlapping so the reported
//! runtimes are per criterion.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use lora_mab::bandit::{
    cucb_select, reward_cf, reward_sf, reward_tp, update_mean, AgentConfig, ArmStats, TransmissionOutcome,
};
use lora_mab::caasi::{
    allocate_channels, channel_quality, collection_schedule, group_sizes, node_vulnerability, prune_sf_actions,
    LinkQualityMatrix,
};
use lora_mab::collision::{CollisionModel, Transmission};
use lora_mab::engine::{
    nonstationary_profiles, run, run_with_observer, settling_index, AgentKind, AgentSpec, ChannelProfile,
    MetricsReport, ScenarioConfig, NONSTATIONARY_BEFORE_DB,
};
use lora_mab::frozen::{run_frozen, FrozenLink};
use lora_mab::phy::{
    receiver_sensitivity_dbm, sinr_threshold_db, time_on_air_s, ActionSets, LoRaParams, PathLossParams,
    RadioConstants,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static LOCK: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: &str, name: &str, pass: bool, elapsed: Duration, budget: Duration, detail: &str) {
    let in_time = elapsed < budget;
    let ok = pass && in_time;
    let line = format!(
        "\nACCEPTANCE {id} {} {name}: {detail}; runtime {:.1}s (budget {}s){}\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if in_time { "" } else { " over budget" },
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "{line}");
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

// ---------------------------------------------------------------- C1

/// Airtime from the symbol-count formula evaluated in floating point.
fn toa_oracle(payload: f64, sf: f64) -> f64 {
    let t_sym = 2f64.powf(sf) / 125_000.0;
    let (crc, h, de, cr) = (1.0, 0.0, 0.0, 1.0);
    let inner = ((8.0 * payload - 4.0 * sf + 28.0 + 16.0 * crc - 20.0 * h) / (4.0 * (sf - 2.0 * de))).ceil();
    let n_pay = 8.0 + (inner * (cr + 4.0)).max(0.0);
    (8.0 + 4.25) * t_sym + n_pay * t_sym
}

#[test]
fn c1_unit_oracles() {
    let _g = serial();
    let t0 = Instant::now();
    let radio = RadioConstants::default();
    let mut failures = Vec::new();

    if time_on_air_s(50, 7, &radio) != 0.097536 {
        failures.push("ToA SF7".to_string());
    }
    if time_on_air_s(50, 12, &radio) != 2.138112 {
        failures.push("ToA SF12".to_string());
    }
    for sf in 7..=12u8 {
        let got = time_on_air_s(50, sf, &radio);
        if (got - toa_oracle(50.0, sf as f64)).abs() > 1e-12 {
            failures.push(format!("ToA oracle SF{sf}"));
        }
    }

    let rs: [(u32, [f64; 6]); 3] = [
        (125_000, [-123.0, -126.0, -129.0, -132.0, -133.0, -136.0]),
        (250_000, [-120.0, -123.0, -125.0, -128.0, -130.0, -133.0]),
        (500_000, [-116.0, -119.0, -122.0, -125.0, -128.0, -130.0]),
    ];
    let mut rs_ok = 0;
    for (bw, row) in rs {
        for (i, want) in row.iter().enumerate() {
            let sf = 7 + i as u8;
            if receiver_sensitivity_dbm(sf, bw).ok() == Some(*want) {
                rs_ok += 1;
            } else {
                failures.push(format!("RS SF{sf}/{bw}"));
            }
        }
    }
    let thr = [-7.5, -10.0, -12.5, -15.0, -17.5, -20.0];
    let mut thr_ok = 0;
    for (i, want) in thr.iter().enumerate() {
        let sf = 7 + i as u8;
        if sinr_threshold_db(sf).ok() == Some(*want) {
            thr_ok += 1;
        } else {
            failures.push(format!("SINR thr SF{sf}"));
        }
    }

    let detail = format!(
        "ToA(50B,SF7)={}s ToA(50B,SF12)={}s, sensitivity {rs_ok}/18, SINR thresholds {thr_ok}/6{}",
        time_on_air_s(50, 7, &radio),
        time_on_air_s(50, 12, &radio),
        if failures.is_empty() { String::new() } else { format!(", mismatches {failures:?}") }
    );
    verdict("C1", "unit oracles", failures.is_empty(), t0.elapsed(), Duration::from_secs(1), &detail);
}

// ---------------------------------------------------------------- C2

#[test]
fn c2_bandit_correctness() {
    let _g = serial();
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    // Incremental mean against the batch mean.
    let mut worst_mean_err: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..500);
        let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
        let folded = rewards.iter().fold(ArmStats::default(), |s, &r| update_mean(s, r));
        worst_mean_err = worst_mean_err.max((folded.mean - mean(&rewards)).abs());
        assert_eq!(folded.pulls, n as u64);
    }
    let mean_ok = worst_mean_err <= 1e-12;

    // CUCB against the exhaustive argmax over all 336 combinations.
    let mut cucb_mismatch = 0;
    for table in 0..1000 {
        // Coarse values on some tables to exercise ties.
        let coarse = table % 4 == 0;
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    if coarse {
                        rng.random_range(0..3) as f64
                    } else {
                        rng.random_range(0.0..4.0)
                    }
                })
                .collect()
        };
        let (cf, sf, tp) = (draw(8), draw(6), draw(7));
        let mut best = (0, 0, 0);
        let mut best_v = f64::NEG_INFINITY;
        for (i, a) in cf.iter().enumerate() {
            for (j, b) in sf.iter().enumerate() {
                for (k, c) in tp.iter().enumerate() {
                    let v = a + b + c;
                    if v > best_v {
                        best_v = v;
                        best = (i, j, k);
                    }
                }
            }
        }
        let got = cucb_select(&cf, &sf, &tp);
        let got_v = cf[got.0] + sf[got.1] + tp[got.2];
        if got != best && got_v != best_v {
            cucb_mismatch += 1;
        }
        if coarse && got != best {
            cucb_mismatch += 1;
        }
    }

    // Reward examples evaluated by hand.
    let sets = ActionSets::default();
    let cfg = AgentConfig::default();
    let p = |sf: u8, tp: i8| LoRaParams { channel: 0, sf, tp_dbm: tp };
    let ok = |params| TransmissionOutcome { success: true, params };
    let bad = |params| TransmissionOutcome { success: false, params };
    let norm = 7.0 / 128.0 + 8.0 / 256.0 + 9.0 / 512.0 + 10.0 / 1024.0 + 11.0 / 2048.0 + 12.0 / 4096.0;
    let cases = [
        (reward_sf(&ok(p(7, 14)), cfg.sf_metric_factor, &sets.sf), 1.0 + (7.0 / 128.0) / norm),
        (reward_sf(&bad(p(12, 14)), cfg.sf_metric_factor, &sets.sf), (12.0 / 4096.0) / norm),
        (reward_sf(&ok(p(9, 14)), 0.0, &sets.sf), 1.0),
        (reward_tp(&ok(p(7, 2)), cfg.tp_metric_factor, &sets.tp_dbm), 1.0 + 1.8 * 54.0 / 56.0),
        (reward_tp(&ok(p(7, 14)), cfg.tp_metric_factor, &sets.tp_dbm), 2.35),
        (reward_tp(&bad(p(7, 8)), 0.0, &sets.tp_dbm), 0.0),
        (reward_cf(&ok(p(7, 2))), 1.0),
        (reward_cf(&bad(p(7, 2))), 0.0),
    ];
    let worst_reward_err = cases.iter().map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    let literal_ok = (cases[0].0 - 1.44980).abs() < 1e-5 && (cases[1].0 - 0.024096).abs() < 1e-6;
    let reward_ok = worst_reward_err <= 1e-9 && literal_ok;

    let detail = format!(
        "incremental-vs-batch max err {worst_mean_err:.1e}, CUCB mismatches {cucb_mismatch}/1000, reward max err {worst_reward_err:.1e}"
    );
    verdict(
        "C2",
        "bandit correctness",
        mean_ok && cucb_mismatch == 0 && reward_ok,
        t0.elapsed(),
        Duration::from_secs(10),
        &detail,
    );
}

// ---------------------------------------------------------------- C3

#[test]
fn c3_regret_sublinearity() {
    let _g = serial();
    let t0 = Instant::now();
    // One node at the reference distance under the heterogeneous pre-change profiles.
    let link = FrozenLink {
        distance_m: 1000.0,
        channels: NONSTATIONARY_BEFORE_DB
            .iter()
            .map(|&l| PathLossParams { ref_loss_db: l, ..Default::default() })
            .collect(),
        radio: RadioConstants::default(),
    };
    let sets = ActionSets::default();
    let (early, late) = (1_000usize, 100_000usize);
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [AgentKind::NaiveMab, AgentKind::DLora, AgentKind::CdLora] {
        let spec = AgentSpec::new(kind);
        let (mut e, mut l) = (Vec::new(), Vec::new());
        for seed in 0..20 {
            let trace = run_frozen(&link, &sets, &spec, late, 1000 + seed).unwrap();
            e.push(trace.pseudo[early - 1] / early as f64);
            l.push(trace.pseudo[late - 1] / late as f64);
        }
        let (e, l) = (mean(&e), mean(&l));
        let fall = 1.0 - l / e;
        pass &= fall >= 0.5;
        parts.push(format!("{} R/t {e:.4} -> {l:.4} (fall {:.1}%)", kind.label(), 100.0 * fall));
    }
    verdict("C3", "regret sublinearity", pass, t0.elapsed(), Duration::from_secs(60), &parts.join(", "));
}

// ---------------------------------------------------------------- C4

#[test]
fn c4_convergence_ordering() {
    let _g = serial();
    let t0 = Instant::now();
    let kinds = [AgentKind::CdLora, AgentKind::DLora, AgentKind::NaiveMab];
    let mut medians = Vec::new();
    for kind in kinds {
        let mut steps = Vec::new();
        for seed in 1..=10 {
            let cfg = ScenarioConfig { n_nodes: 20, duration_h: 500.0, ..Default::default() }.with_seed(seed);
            let report = run(&cfg, &AgentSpec::new(kind)).unwrap();
            let series = report.step_reward();
            let idx = settling_index(&series, 0.05).expect("non-empty step series");
            steps.push((idx as u64 * report.step_bucket) as f64);
        }
        medians.push(median(steps));
    }
    let pass = medians[0] <= medians[1] && medians[1] <= medians[2];
    let detail = format!(
        "median steps to settle within 5% of final reward: cd-lora {}, d-lora {}, naive-mab {}",
        medians[0], medians[1], medians[2]
    );
    verdict("C4", "convergence ordering", pass, t0.elapsed(), Duration::from_secs(300), &detail);
}

// ---------------------------------------------------------------- C5

#[test]
fn c5_density_trend() {
    let _g = serial();
    let t0 = Instant::now();
    let densities = [50usize, 150, 250];
    let kinds = [AgentKind::Random, AgentKind::NaiveMab, AgentKind::DLora, AgentKind::CdLora];
    // [kind][density] -> (final-window PDR, EE) averaged over seeds.
    let mut pdr = [[0.0; 3]; 4];
    let mut ee = [[0.0; 3]; 4];
    let seeds = 5;
    for (di, &n) in densities.iter().enumerate() {
        for (ki, &kind) in kinds.iter().enumerate() {
            for seed in 1..=seeds {
                let cfg = ScenarioConfig { n_nodes: n, duration_h: 500.0, ..Default::default() }.with_seed(seed);
                let r = run(&cfg, &AgentSpec::new(kind)).unwrap();
                pdr[ki][di] += r.final_window().and_then(|w| w.pdr).unwrap() / seeds as f64;
                ee[ki][di] += r.ee.unwrap() / seeds as f64;
            }
        }
    }
    let (random, naive, dlora, cdlora) = (0, 1, 2, 3);
    let gaps: Vec<f64> = (0..3).map(|d| pdr[dlora][d] - pdr[random][d]).collect();
    let a = gaps.iter().all(|&g| g >= 0.08);
    let ratio_d = ee[dlora][0] / ee[naive][0];
    let ratio_cd = ee[cdlora][0] / ee[naive][0];
    let b = ratio_d >= 1.5 && ratio_cd >= 1.5;
    let c = (0..4).all(|k| (0..2).all(|d| pdr[k][d + 1] <= pdr[k][d] + 0.02));

    let table: Vec<String> = kinds
        .iter()
        .enumerate()
        .map(|(k, kind)| format!("{} PDR {:.3}/{:.3}/{:.3}", kind.label(), pdr[k][0], pdr[k][1], pdr[k][2]))
        .collect();
    let detail = format!(
        "(a) {} D-LoRa minus Random {:+.1}/{:+.1}/{:+.1} pp at 50/150/250 nodes; (b) {} EE ratio vs NaiveMAB d-lora {ratio_d:.2} cd-lora {ratio_cd:.2}; (c) {} {}",
        if a { "ok" } else { "failed" },
        100.0 * gaps[0],
        100.0 * gaps[1],
        100.0 * gaps[2],
        if b { "ok" } else { "failed" },
        if c { "ok" } else { "failed" },
        table.join(", ")
    );
    verdict("C5", "density trend", a && b && c, t0.elapsed(), Duration::from_secs(900), &detail);
}

// ---------------------------------------------------------------- C6

fn max_tp_share(kind: AgentKind) -> f64 {
    let (mut top, mut total) = (0u64, 0u64);
    for seed in 1..=3 {
        let cfg = ScenarioConfig { n_nodes: 50, duration_h: 2000.0, ..Default::default() }.with_seed(seed);
        let r = run(&cfg, &AgentSpec::new(kind)).unwrap();
        let u = &r.final_window().unwrap().usage;
        top += *u.tp.last().unwrap();
        total += u.total();
    }
    top as f64 / total as f64
}

#[test]
fn c6_transmit_power_preference() {
    let _g = serial();
    let t0 = Instant::now();
    let d = max_tp_share(AgentKind::DLora);
    let n = max_tp_share(AgentKind::NaiveMab);
    let detail = format!(
        "share of final-window transmissions at maximum TP: d-lora {d:.3}, naive-mab {n:.3} (ratio {:.2}, need <= 0.50)",
        d / n
    );
    verdict("C6", "transmit power preference", d <= 0.5 * n, t0.elapsed(), Duration::from_secs(600), &detail);
}

// ---------------------------------------------------------------- C7

/// Window PDRs averaged over seeds.
fn flip_series(kind: AgentKind, flip_h: f64, horizon_h: f64, window_h: f64) -> (Vec<f64>, Vec<MetricsReport>) {
    let mut reports = Vec::new();
    for seed in 1..=5 {
        let cfg = ScenarioConfig {
            n_nodes: 50,
            duration_h: horizon_h,
            window_h,
            channel_profiles: nonstationary_profiles(flip_h),
            ..Default::default()
        }
        .with_seed(seed);
        reports.push(run(&cfg, &AgentSpec::new(kind)).unwrap());
    }
    let n = reports[0].windows.len();
    let series = (0..n)
        .map(|i| mean(&reports.iter().map(|r| r.windows[i].pdr.unwrap()).collect::<Vec<_>>()))
        .collect();
    (series, reports)
}

/// First window index at or after `from` from which every window stays at or above `floor`.
fn recovered_from(series: &[f64], from: usize, floor: f64) -> Option<usize> {
    let last_below = series[from..].iter().rposition(|&p| p < floor).map(|i| from + i);
    match last_below {
        None => Some(from),
        Some(i) if i + 1 < series.len() => Some(i + 1),
        Some(_) => None,
    }
}

#[test]
fn c7_nonstationary_recovery() {
    let _g = serial();
    let t0 = Instant::now();
    let (flip_h, horizon_h, window_h) = (500.0, 1000.0, 10.0);
    let flip = (flip_h / window_h) as usize;
    let pre_from = ((0.8 * flip_h) / window_h) as usize;
    let post_from = ((0.8 * horizon_h) / window_h) as usize;
    let budget_windows = ((0.3 * (horizon_h - flip_h)) / window_h) as usize;

    let (d, d_reports) = flip_series(AgentKind::DLora, flip_h, horizon_h, window_h);
    let d_pre = mean(&d[pre_from..flip]);
    let d_pre_min = d[pre_from..flip].iter().copied().fold(f64::INFINITY, f64::min);
    let d_drop = d[flip] < d_pre_min;
    let d_rec = recovered_from(&d, flip, d_pre - 0.05);
    let a = d_drop && d_rec.is_some_and(|k| k - flip <= budget_windows);

    let (cd, _) = flip_series(AgentKind::CdLora, flip_h, horizon_h, window_h);
    let cd_pre = mean(&cd[pre_from..flip]);
    let cd_post = mean(&cd[post_from..]);
    let cd_rec = recovered_from(&cd, flip + 1, cd_pre - 0.05);
    let b = cd_post <= cd_pre - 0.05 && cd_rec.is_none();

    let (mut good, mut all) = (0u64, 0u64);
    for r in &d_reports {
        let u = r.usage_between(flip_h, horizon_h);
        good += u.channel[..4].iter().sum::<u64>();
        all += u.total();
    }
    let share = good as f64 / all as f64;
    let c = share > 0.5;

    let detail = format!(
        "(a) {} d-lora pre {d_pre:.3}, first post-flip window {:.3}, recovered after {} h (limit {} h); (b) {} cd-lora pre {cd_pre:.3} late post-flip {cd_post:.3} ({:+.1} pp), recovery {}; (c) {} d-lora post-flip share on channels 1-4 {share:.3}",
        if a { "ok" } else { "failed" },
        d[flip],
        d_rec.map_or("never".to_string(), |k| format!("{}", (k - flip) as f64 * window_h)),
        budget_windows as f64 * window_h,
        if b { "ok" } else { "failed" },
        100.0 * (cd_post - cd_pre),
        cd_rec.map_or("none".to_string(), |k| format!("after {} h", (k - flip) as f64 * window_h)),
        if c { "ok" } else { "failed" },
    );
    verdict("C7", "nonstationary recovery", a && b && c, t0.elapsed(), Duration::from_secs(900), &detail);
}

// ---------------------------------------------------------------- C8

/// Pairwise collision definition evaluated without the library.
fn collided_oracle(window: &[Transmission], i: usize) -> bool {
    let v = &window[i];
    window.iter().enumerate().any(|(j, o)| {
        j != i
            && o.params.channel == v.params.channel
            && o.params.sf == v.params.sf
            && o.start_s < v.start_s + v.toa_s
            && v.start_s < o.start_s + o.toa_s
            && v.rssi_dbm < o.rssi_dbm + 6.0
    })
}

fn random_window(rng: &mut ChaCha8Rng, radio: &RadioConstants) -> Vec<Transmission> {
    let n = rng.random_range(1..=5);
    (0..n)
        .map(|node| {
            let params = LoRaParams {
                channel: rng.random_range(0..2),
                sf: rng.random_range(7..=8),
                tp_dbm: 14,
            };
            Transmission {
                node,
                params,
                payload_bytes: 50,
                start_s: rng.random_range(0..8) as f64 * 0.05,
                toa_s: time_on_air_s(50, params.sf, radio),
                rssi_dbm: -120.0 + rng.random_range(0..12) as f64,
                collided: false,
                signal_lost: false,
            }
        })
        .collect()
}

#[test]
fn c8_simulator_invariants() {
    let _g = serial();
    let t0 = Instant::now();
    let mut notes = Vec::new();

    // Conservation on a contended network.
    let cfg = ScenarioConfig { n_nodes: 100, duration_h: 20.0, ..Default::default() }.with_seed(8);
    let report = run(&cfg, &AgentSpec::new(AgentKind::DLora)).unwrap();
    let conserved = report.check_invariants().is_ok()
        && report.per_node.iter().all(|n| n.sent == n.received + n.collision_lost + n.signal_lost)
        && report.gateway_received == report.per_node.iter().map(|n| n.received).sum::<u64>()
        && report.total_sent == report.per_node.iter().map(|n| n.sent).sum::<u64>();
    notes.push(format!("conservation {} over {} packets", conserved, report.total_sent));

    // Determinism.
    let again = run(&cfg, &AgentSpec::new(AgentKind::DLora)).unwrap();
    let deterministic = serde_json::to_string(&report).unwrap() == serde_json::to_string(&again).unwrap();
    notes.push(format!("bit-identical rerun {deterministic}"));

    // Lone node with maximum parameters close to the gateway.
    let quiet = PathLossParams { shadow_sigma_db: 0.0, ..Default::default() };
    let lone = ScenarioConfig {
        n_nodes: 1,
        duration_h: 200.0,
        node_positions: Some(vec![(100.0, 0.0)]),
        channel_profiles: vec![ChannelProfile::constant(quiet); 8],
        ..Default::default()
    };
    let fixed = AgentSpec::fixed(LoRaParams { channel: 0, sf: 12, tp_dbm: 14 });
    let lone_report = run(&lone, &fixed).unwrap();
    let lone_ok = lone_report.pdr == Some(1.0) && lone_report.total_sent > 0;
    notes.push(format!("lone node PDR {:?} over {} packets", lone_report.pdr, lone_report.total_sent));

    // Collision flags against the pairwise oracle, on small windows and on a full run.
    let radio = RadioConstants::default();
    let model = CollisionModel::new(Default::default(), radio);
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut window_mismatch = 0;
    for _ in 0..5000 {
        let mut w = random_window(&mut rng, &radio);
        model.resolve_collisions(&mut w);
        window_mismatch += (0..w.len()).filter(|&i| w[i].collided != collided_oracle(&w, i)).count();
    }
    let mut log = Vec::new();
    let dense = ScenarioConfig { n_nodes: 60, duration_h: 3.0, ..Default::default() }.with_seed(9);
    run_with_observer(&dense, &AgentSpec::new(AgentKind::Random), &mut |r| {
        if r.learning {
            log.push(r.tx.clone());
        }
    })
    .unwrap();
    log.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    let mut run_mismatch = 0;
    for i in 0..log.len() {
        // Every overlapping packet starts before this one ends and within the longest airtime before it.
        let lo = log.partition_point(|t| t.start_s < log[i].start_s - 2.2);
        let hi = log.partition_point(|t| t.start_s < log[i].start_s + log[i].toa_s);
        let local: Vec<Transmission> = log[lo..hi].to_vec();
        let k = i - lo;
        if local[k].collided != collided_oracle(&local, k) {
            run_mismatch += 1;
        }
    }
    let oracle_ok = window_mismatch == 0 && run_mismatch == 0;
    notes.push(format!(
        "collision oracle mismatches {window_mismatch} on 5000 windows, {run_mismatch} on {} simulated packets",
        log.len()
    ));

    verdict(
        "C8",
        "simulator invariants",
        conserved && deterministic && lone_ok && oracle_ok,
        t0.elapsed(),
        Duration::from_secs(60),
        &notes.join(", "),
    );
}

// ---------------------------------------------------------------- C9

#[test]
fn c9_caasi_properties() {
    let _g = serial();
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut notes = Vec::new();

    // Order preservation and load balance on random link matrices.
    let (mut order_viol, mut balance_viol) = (0, 0);
    for _ in 0..300 {
        let n = rng.random_range(1..60);
        let c = rng.random_range(1..9);
        let mut m = LinkQualityMatrix::new(n, c);
        for node in 0..n {
            for ch in 0..c {
                for _ in 0..rng.random_range(0..3) {
                    m.record(node, ch, -rng.random_range(90..140) as f64);
                }
            }
        }
        let assignment = allocate_channels(&m);
        for u in 0..n {
            for v in 0..n {
                let (vu, vv) = (node_vulnerability(&m, u), node_vulnerability(&m, v));
                if vu > vv && channel_quality(&m, assignment[u]) < channel_quality(&m, assignment[v]) {
                    order_viol += 1;
                }
            }
        }
        let mut load = vec![0usize; c];
        assignment.iter().for_each(|&ch| load[ch] += 1);
        if load.iter().max().unwrap() - load.iter().min().unwrap() > 1 {
            balance_viol += 1;
        }
        assert_eq!(group_sizes(n, c).iter().sum::<usize>(), n);
    }
    notes.push(format!("order violations {order_viol}, load imbalance cases {balance_viol}"));

    // Collection schedule: one transmission per (slot, channel), every node on every channel.
    let mut sched_viol = 0;
    for n in 1..40 {
        for c in 1..=8 {
            let s = collection_schedule(n, c);
            let mut seen = std::collections::HashSet::new();
            let mut covered = std::collections::HashSet::new();
            for slot in &s {
                sched_viol += usize::from(!seen.insert((slot.slot, slot.channel)));
                covered.insert((slot.node, slot.channel));
            }
            sched_viol += usize::from(covered.len() != n * c);
        }
    }
    notes.push(format!("schedule violations {sched_viol}"));

    // Pruning: a stricter threshold never yields more SFs, and outside the
    // max-SF fallback it keeps a subset.
    let mut prune_viol = 0;
    for _ in 0..2000 {
        let pdr: Vec<(u8, f64)> = (7..=12).map(|sf| (sf, rng.random_range(0.0..1.0))).collect();
        let lo: f64 = rng.random_range(0.0..1.0);
        let hi = lo + rng.random_range(0.0..(1.0 - lo));
        let (a, b) = (prune_sf_actions(&pdr, lo), prune_sf_actions(&pdr, hi));
        let fallback = pdr.iter().all(|(_, p)| *p < hi);
        if b.len() > a.len() || (!fallback && !b.iter().all(|sf| a.contains(sf))) {
            prune_viol += 1;
        }
    }
    notes.push(format!("pruning violations {prune_viol}"));

    // CD-LoRa keeps its assigned channel for the whole run.
    let cfg = ScenarioConfig { n_nodes: 40, duration_h: 50.0, ..Default::default() }.with_seed(19);
    let mut per_node: Vec<std::collections::BTreeSet<u8>> = vec![Default::default(); 40];
    let (_, outcome) = run_with_observer(&cfg, &AgentSpec::new(AgentKind::CdLora), &mut |r| {
        if r.learning {
            per_node[r.tx.node].insert(r.tx.params.channel);
        }
    })
    .unwrap();
    let plan = outcome.expect("setup ran").plan;
    let cf_ok = per_node
        .iter()
        .enumerate()
        .all(|(i, s)| s.len() == 1 && s.contains(&plan.assignment[i]));
    notes.push(format!("constant channel per CD-LoRa node {cf_ok}"));

    verdict(
        "C9",
        "CAASI properties",
        order_viol == 0 && balance_viol == 0 && sched_viol == 0 && prune_viol == 0 && cf_ok,
        t0.elapsed(),
        Duration::from_secs(60),
        &notes.join(", "),
    );
}
