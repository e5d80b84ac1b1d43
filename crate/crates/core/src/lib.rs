//! Fairness-aware EV charging, V2G and V2V scheduling.

// Dense numeric loops index several arrays at once; `!(x > 0.0)` also rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod domain;
pub mod metrics;
pub mod model;
pub mod run;
pub mod scenario;
pub mod solver;
pub mod sparse;
