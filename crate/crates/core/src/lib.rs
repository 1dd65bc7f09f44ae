//! LoRaWAN uplink simulator with online-learning resource allocation.
//!
//! The crate is layered bottom-up:
//!
//! * [`phy`]: path loss, sensitivity and SINR tables, airtime and energy.
//! * [`collision`]: intra-SF collisions with capture, and the SINR check.
//! * [`bandit`]: NaiveMAB, D-LoRa and CD-LoRa agents.
//! * [`caasi`]: centralized channel allocation and SF pruning for CD-LoRa.
//! * [`baselines`]: random and fixed-parameter reference policies.
//! * [`engine`]: the discrete-event network simulation and its metrics.
//! * [`frozen`]: a single-node, contention-free link for regret studies.

// Negated comparisons are the NaN-rejecting form used by validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit;
pub mod baselines;
pub mod caasi;
pub mod collision;
pub mod engine;
pub mod error;
pub mod frozen;
pub mod phy;

pub use error::{Error, Result};
