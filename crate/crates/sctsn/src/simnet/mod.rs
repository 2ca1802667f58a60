//! Deterministic discrete-event simulation of the self-configuring
//! controller loop and its a-priori baseline.
//!
//! The world is a classified topology: hosts behind edge switches, strict
//! non-preemptive priority queues on every output port, a controller that
//! installs per-stream forwarding rules. In self-configuring mode, frames
//! of a new stream travel low priority along utilization-adaptive default
//! paths while the ingress edge switch learns the stream's period; streams
//! classified periodic are placed by the optimizer and migrated with an
//! ordered rule update (new-path switches first, ingress repointed last).
//! In the baseline mode every periodic demand is known and placed before
//! the first frame.
//!
//! Reproducibility: events are ordered by (time, sequence number) and all
//! randomness derives from per-stream ChaCha8 generators seeded from the
//! scenario seed, so a (scenario, seed) pair fully determines the report,
//! byte for byte.

mod engine;
mod metrics;
mod scenario;

pub use metrics::{
    compute_metrics, ClassStats, FrameRecord, LatencyStats, MetricsAccumulator, MetricsReport,
    StreamSummary, UtilRow,
};
pub use scenario::{Mode, Ns, Scenario, MS, SEC, US};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error("optimizer: {0}")]
    Tsor(String),
    #[error("learner: {0}")]
    Learner(String),
    #[error("internal: {0}")]
    Internal(String),
}

/// Executes one scenario to its horizon and returns the collected metrics.
pub fn run(scenario: &Scenario) -> Result<MetricsReport, SimError> {
    engine::Engine::new(scenario)?.run()
}
