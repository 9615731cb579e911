//! flysafe - deterministic discrete-event simulation of UAV swarms
//! running a resilient location-sharing protocol with a false-location
//! defense, plus the metrics pipeline for its spatial-awareness
//! evaluation.
//!
//! The crate is organized around the life of a run:
//!
//! - [`model`]: shared domain types and geometric primitives
//! - [`mobility`]: 2D random-walk movement with reflective boundaries
//! - [`protocol`]: the per-node neighbor discovery / maintenance /
//!   guard state machine
//! - [`adversary`]: false-location strategies and the claim detector
//! - [`kernel`]: the event scheduler and range-gated radio
//! - [`trace`]: the immutable record a run leaves behind
//! - [`metrics`]: awareness, freshness, and error measures over a trace
//! - [`harness`]: scenario files, seeded campaigns, and result files

pub mod adversary;
pub mod harness;
pub mod kernel;
pub mod metrics;
pub mod mobility;
pub mod model;
pub mod protocol;
pub mod trace;

pub use adversary::{DetectorConfig, DetectorMode, FalsifyStrategy, Verdict};
pub use harness::{load_config, run_campaign, CampaignSummary, ScenarioConfig};
pub use kernel::{LatencyRule, Placement, RadioConfig, Simulation, SimulationConfig};
pub use metrics::{compute_run_metrics, MetricsOptions, RunMetrics};
pub use model::{Location3D, UavId};
pub use trace::SimTrace;
