//! Multi-zone building thermal simulator with a deep-Q-network VAV controller,
//! a rule-based schedule baseline and an experiment harness.

pub mod agent;
pub mod baseline;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod plant;
pub mod reward;
pub mod thermal;
pub mod units;
pub mod weather;

pub use error::{Error, Result};
