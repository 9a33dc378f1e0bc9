//! Planning and simulation toolkit for inference servers built from
//! reconfigurable GPU partitions.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs and seeds: profile tables, batch-size
//! distributions and query traces, heterogeneous partition plans, the
//! ELSA and FIFS dispatch policies, a discrete-event engine, and the
//! tail-latency metrics built on top of it. File formats, configuration
//! and the command line live in the `migsim` companion crate.
//!
//! ```text
//!  profile ──► paris ──► PartitionPlan ─┐
//!     │                                 ▼
//!  workload ──► QueryTrace ──────────► engine ◄── sched (elsa | fifs)
//!                                       │
//!                                    SimReport ──► metrics
//! ```

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod engine;
pub mod error;
pub mod metrics;
pub mod paris;
pub mod profile;
pub mod sched;
pub mod workload;

pub use engine::{run, QueryRecord, SimOptions, SimReport};
pub use error::{Error, Result};
pub use metrics::{tail_latency, DesignPoint, LbtOutcome, LoadSearch};
pub use paris::{PartitionPlan, ServerSpec};
pub use profile::{PartitionSize, ProfileTable, SyntheticProfileParams};
pub use sched::{Dispatch, DispatchKind, PartitionState, Policy, SlaConfig};
pub use workload::{BatchDistribution, Query, QueryTrace};
