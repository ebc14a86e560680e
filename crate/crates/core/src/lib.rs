//! Deterministic discrete-event simulator of real-time task offloading from
//! wireless clients to edge workers.
//!
//! The central piece is [`scheduler::PartitionedScheduler`], a partitioned
//! EDF scheduler that tightens each task's deadline by the expected network
//! delay before admitting it. [`baseline::GlobalEdfScheduler`] is the global
//! EDF reference it is compared against. [`harness`] builds whole
//! deployments, runs the evaluation scenarios and writes CSV/SVG results.

pub mod baseline;
pub mod client;
pub mod error;
pub mod harness;
pub mod model;
pub mod netsim;
pub mod scheduler;
pub mod sim;
pub mod worker;

pub use error::SimError;
pub use harness::{run_scenario, RunMetrics, ScenarioConfig};
pub use model::{ClientId, Micros, SimTime, Task, TaskId, TaskOutcome, Verdict, WorkerId};
pub use scheduler::{Decision, Heuristic, SchedulerConfig, SchedulerKind};
