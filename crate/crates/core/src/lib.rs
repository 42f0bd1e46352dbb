//! Online ride-sharing dispatch: road networks, insertion planning with
//! search-area pruning, an exhaustive baseline, and an epoch simulator.

// Range checks are written as `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod insertion;
pub mod model;
pub mod roadnet;
pub mod scheduler;
pub mod simulator;
pub mod util;
pub mod workload;

pub use error::{Error, Result};
