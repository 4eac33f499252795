//! Conflict-aware multi-xApp radio resource control: a small cellular
//! simulator, DQN xApps, conflict mitigation, policy distillation and the
//! staged evaluation pipeline.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod config;
pub mod distill;
pub mod env;
pub mod error;
pub mod io;
pub mod metrics;
pub mod mitigation;
pub mod nn;
pub mod parallel;
pub mod pipeline;

pub use error::{Error, Result};
