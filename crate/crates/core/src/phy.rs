//! Physical-layer model of a LoRa uplink.
//!
//! Log-distance path loss with log-normal shadowing, receiver sensitivity and
//! SINR threshold tables, time-on-air and transmit energy. Everything here is
//! a pure function of its arguments; random samples (shadowing, noise) are
//! drawn by the caller and passed in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spreading factors supported by the sensitivity and SINR tables.
pub const SPREADING_FACTORS: [u8; 6] = [7, 8, 9, 10, 11, 12];

/// One (channel, SF, TP) configuration for a single uplink.
///
/// `channel` indexes into [`ActionSets::channels_mhz`]. The derived ordering
/// is lexicographic over (channel, sf, tp), which is the tie-break order used
/// by every argmax in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LoRaParams {
    pub channel: u8,
    pub sf: u8,
    pub tp_dbm: i8,
}

/// The finite parameter sets a node may choose from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSets {
    pub channels_mhz: Vec<f64>,
    pub sf: Vec<u8>,
    pub tp_dbm: Vec<i8>,
}

impl Default for ActionSets {
    fn default() -> Self {
        Self {
            channels_mhz: vec![868.1, 868.3, 868.5, 868.7, 868.9, 869.1, 869.3, 869.5],
            sf: SPREADING_FACTORS.to_vec(),
            tp_dbm: vec![2, 4, 6, 8, 10, 12, 14],
        }
    }
}

impl ActionSets {
    pub fn n_channels(&self) -> usize {
        self.channels_mhz.len()
    }

    pub fn max_sf(&self) -> u8 {
        self.sf.iter().copied().max().unwrap_or(12)
    }

    pub fn max_tp(&self) -> i8 {
        self.tp_dbm.iter().copied().max().unwrap_or(14)
    }

    pub fn sf_index(&self, sf: u8) -> Option<usize> {
        self.sf.iter().position(|&s| s == sf)
    }

    pub fn tp_index(&self, tp: i8) -> Option<usize> {
        self.tp_dbm.iter().position(|&t| t == tp)
    }

    /// Number of super arms, |CF|·|SF|·|TP|.
    pub fn n_super_arms(&self) -> usize {
        self.channels_mhz.len() * self.sf.len() * self.tp_dbm.len()
    }

    /// All super arms in lexicographic (channel, sf, tp) order.
    pub fn super_arms(&self) -> Vec<LoRaParams> {
        let mut arms = Vec::with_capacity(self.n_super_arms());
        for ch in 0..self.channels_mhz.len() {
            for &sf in &self.sf {
                for &tp in &self.tp_dbm {
                    arms.push(LoRaParams { channel: ch as u8, sf, tp_dbm: tp });
                }
            }
        }
        arms
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels_mhz.is_empty() || self.sf.is_empty() || self.tp_dbm.is_empty() {
            return Err(Error::Config("every action set must be non-empty".into()));
        }
        if self.channels_mhz.len() > u8::MAX as usize {
            return Err(Error::Config("too many channels".into()));
        }
        for &sf in &self.sf {
            if !SPREADING_FACTORS.contains(&sf) {
                return Err(Error::Config(format!("unsupported spreading factor {sf}")));
            }
        }
        for w in self.sf.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Config("sf set must be strictly increasing".into()));
            }
        }
        for w in self.tp_dbm.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Config("tp set must be strictly increasing".into()));
            }
        }
        if self.tp_dbm.iter().map(|&t| t as i32).sum::<i32>() <= 0 {
            return Err(Error::Config("tp set must have a positive sum".into()));
        }
        Ok(())
    }
}

/// Log-distance path loss parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams {
    /// Mean path loss at the reference distance (dB).
    pub ref_loss_db: f64,
    pub ref_distance_m: f64,
    pub exponent: f64,
    /// Standard deviation of the per-packet shadowing term (dB).
    pub shadow_sigma_db: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            ref_loss_db: 128.95,
            ref_distance_m: 1000.0,
            exponent: 1.0,
            shadow_sigma_db: 7.8,
        }
    }
}

impl PathLossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ref_distance_m > 0.0) {
            return Err(Error::Config("ref_distance_m must be positive".into()));
        }
        if !(self.shadow_sigma_db >= 0.0) {
            return Err(Error::Config("shadow_sigma_db must be non-negative".into()));
        }
        Ok(())
    }

    /// Deterministic part of the loss at `distance_m` (no shadowing).
    pub fn mean_loss_db(&self, distance_m: f64) -> f64 {
        self.ref_loss_db + 10.0 * self.exponent * (distance_m / self.ref_distance_m).log10()
    }
}

/// Radio settings shared by all nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConstants {
    pub bandwidth_hz: u32,
    /// CR in 1..=4, i.e. coding rate 4/(4+CR).
    pub coding_rate: u8,
    pub preamble_symbols: u32,
    pub crc: bool,
    /// H flag; `false` means the explicit header is present.
    pub implicit_header: bool,
    pub low_data_rate_opt: bool,
    pub noise_figure_db: f64,
    /// Standard deviation of the per-packet noise-floor fluctuation (dB).
    pub awgn_sigma_db: f64,
}

impl Default for RadioConstants {
    fn default() -> Self {
        Self {
            bandwidth_hz: 125_000,
            coding_rate: 1,
            preamble_symbols: 8,
            crc: true,
            implicit_header: false,
            low_data_rate_opt: false,
            noise_figure_db: 6.0,
            awgn_sigma_db: 1.0,
        }
    }
}

impl RadioConstants {
    pub fn validate(&self) -> Result<()> {
        if ![125_000, 250_000, 500_000].contains(&self.bandwidth_hz) {
            return Err(Error::Config(format!("unsupported bandwidth {}", self.bandwidth_hz)));
        }
        if !(1..=4).contains(&self.coding_rate) {
            return Err(Error::Config("coding_rate must be in 1..=4".into()));
        }
        if !(self.awgn_sigma_db >= 0.0) {
            return Err(Error::Config("awgn_sigma_db must be non-negative".into()));
        }
        Ok(())
    }

    /// Thermal noise floor, -174 + 10·log10(BW) + NF, in dBm.
    pub fn noise_floor_dbm(&self) -> f64 {
        -174.0 + 10.0 * (self.bandwidth_hz as f64).log10() + self.noise_figure_db
    }

    pub fn symbol_time_s(&self, sf: u8) -> f64 {
        (1u64 << sf) as f64 / self.bandwidth_hz as f64
    }
}

/// How the transmit energy of a packet is computed from TP and airtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyConvention {
    /// TP converted to milliwatts, times airtime in seconds, giving mJ.
    #[default]
    PhysicalMilliwatt,
    /// The raw dBm figure multiplied by airtime.
    PaperLiteral,
}

pub fn path_loss_db(distance_m: f64, p: &PathLossParams, shadow_sample_db: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {distance_m}")));
    }
    Ok(p.mean_loss_db(distance_m) + shadow_sample_db)
}

pub fn rssi_dbm(tp_dbm: f64, distance_m: f64, p: &PathLossParams, shadow_sample_db: f64) -> Result<f64> {
    Ok(tp_dbm - path_loss_db(distance_m, p, shadow_sample_db)?)
}

const SENSITIVITY_125K: [f64; 6] = [-123.0, -126.0, -129.0, -132.0, -133.0, -136.0];
const SENSITIVITY_250K: [f64; 6] = [-120.0, -123.0, -125.0, -128.0, -130.0, -133.0];
const SENSITIVITY_500K: [f64; 6] = [-116.0, -119.0, -122.0, -125.0, -128.0, -130.0];
const SINR_THRESHOLDS: [f64; 6] = [-7.5, -10.0, -12.5, -15.0, -17.5, -20.0];

fn sf_slot(sf: u8) -> Result<usize> {
    if (7..=12).contains(&sf) {
        Ok((sf - 7) as usize)
    } else {
        Err(Error::Domain(format!("spreading factor {sf} outside 7..=12")))
    }
}

/// Receiver sensitivity in dBm for a (SF, BW) pair.
pub fn receiver_sensitivity_dbm(sf: u8, bandwidth_hz: u32) -> Result<f64> {
    let row = match bandwidth_hz {
        125_000 => &SENSITIVITY_125K,
        250_000 => &SENSITIVITY_250K,
        500_000 => &SENSITIVITY_500K,
        _ => return Err(Error::Domain(format!("unsupported bandwidth {bandwidth_hz} Hz"))),
    };
    Ok(row[sf_slot(sf)?])
}

/// Minimum SINR in dB for decoding at a given SF.
pub fn sinr_threshold_db(sf: u8) -> Result<f64> {
    Ok(SINR_THRESHOLDS[sf_slot(sf)?])
}

/// Number of payload symbols, including the 8 fixed header symbols.
pub fn payload_symbols(payload_bytes: u32, sf: u8, consts: &RadioConstants) -> u32 {
    let de = consts.low_data_rate_opt as i64;
    let num = 8 * payload_bytes as i64 - 4 * sf as i64 + 28 + 16 * consts.crc as i64
        - 20 * consts.implicit_header as i64;
    let den = 4 * (sf as i64 - 2 * de);
    debug_assert!(den > 0);
    let blocks = if num <= 0 { 0 } else { (num + den - 1) / den };
    8 + (blocks * (consts.coding_rate as i64 + 4)) as u32
}

/// Airtime of a packet in seconds.
///
/// Computed as a single quotient of exact integers (quarter-symbols times
/// 2^SF over 4·BW) so that the result is the correctly rounded value.
pub fn time_on_air_s(payload_bytes: u32, sf: u8, consts: &RadioConstants) -> f64 {
    let n_pay = payload_symbols(payload_bytes, sf, consts) as u64;
    let quarters = 4 * consts.preamble_symbols as u64 + 17 + 4 * n_pay;
    (quarters * (1u64 << sf)) as f64 / (4 * consts.bandwidth_hz as u64) as f64
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Energy spent transmitting one packet, in mJ.
pub fn tx_energy_mj(tp_dbm: f64, toa_s: f64, convention: EnergyConvention) -> f64 {
    match convention {
        EnergyConvention::PhysicalMilliwatt => dbm_to_mw(tp_dbm) * toa_s,
        EnergyConvention::PaperLiteral => tp_dbm * toa_s,
    }
}

/// SINR in dB, evaluated in the linear power domain.
///
/// The caller passes only interferers that overlap in time on the same
/// channel with a different SF.
pub fn sinr_db<I>(signal_rssi_dbm: f64, interferer_rssis_dbm: I, noise_power_dbm: f64) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let interference: f64 = interferer_rssis_dbm.into_iter().map(dbm_to_mw).sum();
    mw_to_dbm(dbm_to_mw(signal_rssi_dbm) / (interference + dbm_to_mw(noise_power_dbm)))
}
