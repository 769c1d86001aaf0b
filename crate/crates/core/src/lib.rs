//! Reliability-aware high-level synthesis.
//!
//! Given a data-flow graph, a library with several versions of each resource
//! type (differing in area, delay and soft-error reliability) and latency and
//! area bounds, pick a version per operation, schedule and bind so that the
//! product of operation reliabilities is maximized. Modular redundancy (NMR)
//! is available as a baseline and as a post-pass.

pub mod binder;
pub mod charlib;
pub mod cli;
pub mod error;
pub mod model;
pub mod oracle;
pub mod redundancy;
pub mod scheduler;
pub mod synthesizer;

pub use error::{Error, Result};
pub use model::{Assignment, Dfg, DfgNode, OpClass, ResourceLibrary, ResourceVersion};
pub use synthesizer::{find_design, Bounds, Design, Infeasible, InfeasibleReason, Outcome};
