//! Discrete-event simulation of a single HPC cluster shared by rigid, on-demand
//! and malleable jobs.
//!
//! The crate is organised around the life of one simulation:
//!
//! * [`workload`] ingests SWF traces and turns them into annotated hybrid
//!   workloads ([`JobSpec`]).
//! * [`cluster`] keeps node-count accounting for allocations and on-demand
//!   reservations.
//! * [`policy`] is the FCFS + EASY backfilling queue discipline.
//! * [`mechanisms`] plans what happens on advance notice, arrival, completion and
//!   reservation timeout of on-demand jobs.
//! * [`engine`] is the deterministic event loop that ties the above together.
//! * [`metrics`] folds an event log into a [`MetricsReport`].
//! * [`oracle`] is an independent per-second simulator for tiny instances.
//! * [`sweep`] runs many simulations, in parallel when the `parallel` feature is on.

pub mod cluster;
pub mod config;
pub mod engine;
pub mod error;
pub mod mechanisms;
pub mod metrics;
pub mod oracle;
pub mod policy;
pub mod sweep;
pub mod workload;

pub use config::{ArrivalStrategy, Mechanism, NoticeStrategy, SystemConfig};
pub use engine::{run, LogRecord, SimOutput};
pub use error::{Error, Result};
pub use metrics::MetricsReport;
pub use workload::{JobKind, JobSpec, NoticeCategory, NoticeProfile, RawTraceJob, WorkloadConfig};

/// Simulation time in whole seconds.
pub type Secs = i64;

/// Job identifier, unique within a workload.
pub type JobId = u64;
