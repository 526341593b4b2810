//! Multi-type TASEP on rings and on windows of `Z`: configurations, priority
//! queues, the multiline process, exact stationary weights, simulation and
//! statistical checks.

pub mod codec;
pub mod config;
pub mod error;
pub mod exact;
pub mod multiline;
pub mod queueing;
pub mod simulate;
pub mod stats;

pub use config::{ClassValue, Configuration, Counts, RingConfig, WindowConfig};
pub use error::{Error, Result};
pub use multiline::{MultiLineConfig, MultiTypeConfig};
pub use queueing::QueueState;

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctests;
