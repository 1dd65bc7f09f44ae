//! Discrete-event network simulation.
//!
//! Nodes generate Poisson traffic, ask their policy for parameters, and the
//! gateway resolves every packet at the end of its airtime against all
//! packets that overlapped it. Outcomes are fed straight back to the sender.

mod config;
mod metrics;
mod sim;

pub use config::{
    apply_channel_schedule, nonstationary_profiles, AgentKind, AgentSpec, ChannelProfile, ProfileSwitch, RunConfig,
    ScenarioConfig, NONSTATIONARY_AFTER_DB, NONSTATIONARY_BEFORE_DB,
};
pub use metrics::{
    compute_ee, compute_pdr, compute_utility, settling_index, MetricsReport, NodeTally, SetupSummary, StepBucket,
    UsageHistogram, WindowRow,
};
pub use sim::{place_nodes, run, run_config, run_with_observer, TxRecord};
