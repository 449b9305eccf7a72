//! Seeded simulator and detection library for sampled smart-grid
//! aggregation.
//!
//! Consumers report per-period usage to a regional aggregator, which sums the
//! reports, measures the leakage against the region's actual consumption and
//! forwards one randomly sampled `(consumer, report)` pair per period. Over a
//! measurement window the sampled reports of each consumer are correlated
//! with the leakage to expose consumers that falsify their reports.

pub mod aggregation;
pub mod billing;
pub mod cli;
pub mod config;
pub mod detection;
pub mod error;
pub mod export;
pub mod grid;
pub mod harness;
pub mod manifest;
pub mod rng;

pub use error::{Error, Result};
