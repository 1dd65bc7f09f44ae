//! Reception outcome of temporally overlapping transmissions.
//!
//! A packet is lost to collision when another packet overlaps it in time on
//! the same channel with the same SF and it is not strong enough to capture
//! the receiver. Inter-SF interference on the same channel does not cause a
//! collision; it lowers the SINR checked by [`assign_signal_flags`].

use serde::{Deserialize, Serialize};

use crate::phy::{self, LoRaParams};

/// A packet in flight, as seen by the gateway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transmission {
    pub node: usize,
    pub params: LoRaParams,
    pub payload_bytes: u32,
    pub start_s: f64,
    pub toa_s: f64,
    pub rssi_dbm: f64,
    /// Lost due to an intra-SF collision.
    pub collided: bool,
    /// Lost due to weak signal or insufficient SINR.
    pub signal_lost: bool,
}

impl Transmission {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.toa_s
    }

    pub fn received(&self) -> bool {
        !self.collided && !self.signal_lost
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollisionTiming {
    /// Any overlap of the two airtime intervals counts.
    #[default]
    AnyOverlap,
    /// The interferer must still be on air when the victim reaches its
    /// last five preamble symbols.
    CriticalSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollisionConfig {
    pub capture_threshold_db: f64,
    pub timing: CollisionTiming,
}

impl Default for CollisionConfig {
    fn default() -> Self {
        Self {
            capture_threshold_db: 6.0,
            timing: CollisionTiming::AnyOverlap,
        }
    }
}

/// Half-open interval intersection of the two airtimes.
pub fn overlaps(a: &Transmission, b: &Transmission) -> bool {
    a.start_s < b.end_s() && b.start_s < a.end_s()
}

fn overlaps_critical(victim: &Transmission, other: &Transmission, critical_offset_s: f64) -> bool {
    overlaps(victim, other) && other.end_s() > victim.start_s + critical_offset_s
}

/// Collision evaluator for one radio configuration.
#[derive(Debug, Clone, Copy)]
pub struct CollisionModel {
    pub config: CollisionConfig,
    pub radio: phy::RadioConstants,
}

impl CollisionModel {
    pub fn new(config: CollisionConfig, radio: phy::RadioConstants) -> Self {
        Self { config, radio }
    }

    fn critical_offset_s(&self, sf: u8) -> f64 {
        let lead = self.radio.preamble_symbols.saturating_sub(5) as f64;
        lead * self.radio.symbol_time_s(sf)
    }

    /// Whether `other` threatens `victim` in time under the configured timing rule.
    pub fn time_conflict(&self, victim: &Transmission, other: &Transmission) -> bool {
        match self.config.timing {
            CollisionTiming::AnyOverlap => overlaps(victim, other),
            CollisionTiming::CriticalSection => {
                overlaps_critical(victim, other, self.critical_offset_s(victim.params.sf))
            }
        }
    }

    /// `victim` survives `other` by the capture effect.
    pub fn captures(&self, victim: &Transmission, other: &Transmission) -> bool {
        victim.rssi_dbm >= other.rssi_dbm + self.config.capture_threshold_db
    }

    /// Collision flag of `victim` against `others` (which must not contain it).
    pub fn is_collided<'a, I>(&self, victim: &Transmission, others: I) -> bool
    where
        I: IntoIterator<Item = &'a Transmission>,
    {
        others.into_iter().any(|k| {
            k.params.channel == victim.params.channel
                && k.params.sf == victim.params.sf
                && self.time_conflict(victim, k)
                && !self.captures(victim, k)
        })
    }

    /// Signal-loss flag of `victim`: below sensitivity or below the SINR
    /// threshold given same-channel, different-SF overlapping packets.
    pub fn is_signal_lost<'a, I>(&self, victim: &Transmission, others: I, noise_dbm: f64) -> bool
    where
        I: IntoIterator<Item = &'a Transmission>,
    {
        let sf = victim.params.sf;
        let sensitivity = phy::receiver_sensitivity_dbm(sf, self.radio.bandwidth_hz)
            .expect("sf validated by configuration");
        if victim.rssi_dbm < sensitivity {
            return true;
        }
        let interferers = others
            .into_iter()
            .filter(|k| {
                k.params.channel == victim.params.channel && k.params.sf != sf && overlaps(victim, k)
            })
            .map(|k| k.rssi_dbm);
        let sinr = phy::sinr_db(victim.rssi_dbm, interferers, noise_dbm);
        sinr < phy::sinr_threshold_db(sf).expect("sf validated by configuration")
    }

    /// Assigns `collided` for every packet of the window.
    pub fn resolve_collisions(&self, window: &mut [Transmission]) {
        let flags: Vec<bool> = (0..window.len())
            .map(|j| {
                let others = window.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, t)| t);
                self.is_collided(&window[j], others)
            })
            .collect();
        for (tx, flag) in window.iter_mut().zip(flags) {
            tx.collided = flag;
        }
    }

    /// Assigns `signal_lost` for every packet of the window against a common noise power.
    pub fn assign_signal_flags(&self, window: &mut [Transmission], noise_dbm: f64) {
        let flags: Vec<bool> = (0..window.len())
            .map(|j| {
                let others = window.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, t)| t);
                self.is_signal_lost(&window[j], others, noise_dbm)
            })
            .collect();
        for (tx, flag) in window.iter_mut().zip(flags) {
            tx.signal_lost = flag;
        }
    }
}

impl Default for CollisionModel {
    fn default() -> Self {
        Self::new(CollisionConfig::default(), phy::RadioConstants::default())
    }
}
