//! Proactive content caching at the network edge.
//!
//! The crate builds random edge topologies and caching instances, writes the
//! placement problem as a linearised mixed-integer program, solves it exactly
//! with a hand-written branch-and-bound, and speeds it up by letting a bank
//! of small convolutional classifiers prune candidate edge clouds first.

pub mod bench;
pub mod config;
pub mod error;
pub mod features;
pub mod greedy;
pub mod model;
pub mod neural;
pub mod pipeline;
pub mod scenario;
pub mod solver;
pub mod topology;

pub use error::{Error, Result};
