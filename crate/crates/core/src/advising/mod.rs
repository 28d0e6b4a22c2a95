//! Budgeted teacher advising with imitation-based advice reuse.

mod cloner;
mod config;
mod dataset;
mod pipeline;


pub use cloner::BehavioralCloner;
pub use config::{AdvisingConfig, AdvisingMode};
pub use dataset::{AdviceDataset, AdvicePair};
pub use pipeline::{ActionSource, AdvisingCounters, Advisor, Decision};
