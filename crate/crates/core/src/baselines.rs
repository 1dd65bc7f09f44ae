//! Non-learning reference policies.

use rand::{Rng, RngCore};

use crate::bandit::{Policy, TransmissionOutcome};
use crate::phy::{ActionSets, LoRaParams};

/// Independent uniform draw per dimension per transmission.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    sets: ActionSets,
}

impl RandomPolicy {
    pub fn new(sets: &ActionSets) -> Self {
        Self { sets: sets.clone() }
    }
}

pub fn random_select(sets: &ActionSets, rng: &mut dyn RngCore) -> LoRaParams {
    LoRaParams {
        channel: rng.random_range(0..sets.channels_mhz.len()) as u8,
        sf: sets.sf[rng.random_range(0..sets.sf.len())],
        tp_dbm: sets.tp_dbm[rng.random_range(0..sets.tp_dbm.len())],
    }
}

impl Policy for RandomPolicy {
    fn select(&mut self, rng: &mut dyn RngCore) -> LoRaParams {
        random_select(&self.sets, rng)
    }

    fn observe(&mut self, outcome: &TransmissionOutcome) -> f64 {
        if outcome.success {
            1.0
        } else {
            0.0
        }
    }
}

/// Always transmits with the same parameters.
#[derive(Debug, Clone, Copy)]
pub struct StaticPolicy {
    fixed: LoRaParams,
}

impl StaticPolicy {
    pub fn new(fixed: LoRaParams) -> Self {
        Self { fixed }
    }
}

pub fn static_oracle_select(fixed: LoRaParams) -> LoRaParams {
    fixed
}

impl Policy for StaticPolicy {
    fn select(&mut self, _rng: &mut dyn RngCore) -> LoRaParams {
        static_oracle_select(self.fixed)
    }

    fn observe(&mut self, outcome: &TransmissionOutcome) -> f64 {
        if outcome.success {
            1.0
        } else {
            0.0
        }
    }
}

/// Monte Carlo mean of `sample` over `n` draws.
pub fn monte_carlo_mean<R: Rng + ?Sized>(n: usize, rng: &mut R, mut sample: impl FnMut(&mut R) -> f64) -> f64 {
    assert!(n > 0);
    (0..n).map(|_| sample(rng)).sum::<f64>() / n as f64
}
