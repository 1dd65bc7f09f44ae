use lora_mab::engine::{run, AgentKind, AgentSpec, ScenarioConfig};
use lora_mab::phy::{
    path_loss_db, payload_symbols, sinr_db, time_on_air_s, tx_energy_mj, ActionSets, EnergyConvention,
    LoRaParams, PathLossParams, RadioConstants,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn airtime_grows_with_sf_and_payload(payload in 1u32..=255, sf in 7u8..12) {
        let radio = RadioConstants::default();
        prop_assert!(time_on_air_s(payload, sf + 1, &radio) > time_on_air_s(payload, sf, &radio));
        if payload < 255 {
            prop_assert!(time_on_air_s(payload + 1, sf, &radio) >= time_on_air_s(payload, sf, &radio));
        }
    }

    #[test]
    fn payload_symbols_are_whole_blocks(payload in 0u32..=255, sf in 7u8..=12, cr in 1u8..=4, ldro: bool, crc: bool) {
        let radio = RadioConstants { coding_rate: cr, low_data_rate_opt: ldro, crc, ..Default::default() };
        let n = payload_symbols(payload, sf, &radio);
        prop_assert!(n >= 8);
        prop_assert_eq!((n - 8) % (cr as u32 + 4), 0);
    }

    #[test]
    fn sinr_without_interferers_is_a_difference(signal in -150.0f64..20.0, noise in -140.0f64..-80.0) {
        let got = sinr_db(signal, std::iter::empty(), noise);
        prop_assert!((got - (signal - noise)).abs() < 1e-9);
    }

    #[test]
    fn physical_energy_is_monotone(tp in -10.0f64..20.0, toa in 0.01f64..3.0, dtp in 0.1f64..5.0, dtoa in 0.01f64..1.0) {
        let e = |p, t| tx_energy_mj(p, t, EnergyConvention::PhysicalMilliwatt);
        prop_assert!(e(tp + dtp, toa) > e(tp, toa));
        prop_assert!(e(tp, toa + dtoa) > e(tp, toa));
    }
}

#[test]
fn path_loss_at_reference_distance_is_reference_loss() {
    let p = PathLossParams::default();
    assert_eq!(path_loss_db(p.ref_distance_m, &p, 0.0).unwrap(), p.ref_loss_db);
}

fn lone_node(distance_m: f64, hours: f64) -> ScenarioConfig {
    ScenarioConfig {
        n_nodes: 1,
        node_positions: Some(vec![(distance_m, 0.0)]),
        duration_h: hours,
        ..Default::default()
    }
    .with_seed(11)
}

#[test]
fn raising_tp_never_lowers_a_lone_nodes_pdr() {
    let sets = ActionSets::default();
    for &sf in &[7u8, 9, 12] {
        let mut last = -1.0;
        let mut pdrs = Vec::new();
        for &tp in &sets.tp_dbm {
            let params = LoRaParams { channel: 0, sf, tp_dbm: tp };
            let cfg = lone_node(2500.0, 200.0);
            let pdr = run(&cfg, &AgentSpec::fixed(params)).unwrap().pdr.unwrap();
            assert!(pdr >= last, "sf {sf}: pdr {pdr} after {last} at tp {tp}");
            last = pdr;
            pdrs.push(pdr);
        }
        assert!(pdrs.last() > pdrs.first() || pdrs[0] == 1.0, "sf {sf}: {pdrs:?}");
    }
}

#[test]
fn d_lora_spreads_sf_less_than_caasi_max_sf() {
    let cfg = ScenarioConfig { n_nodes: 200, duration_h: 50.0, ..Default::default() }.with_seed(3);
    let d = run(&cfg, &AgentSpec::new(AgentKind::DLora)).unwrap();
    let m = run(&cfg, &AgentSpec::new(AgentKind::CaasiMaxSf)).unwrap();
    let (ds, ms) = (d.usage.max_sf_share(), m.usage.max_sf_share());
    assert!(ds < ms, "d-lora max sf share {ds} vs caasi-max-sf {ms}");
}
