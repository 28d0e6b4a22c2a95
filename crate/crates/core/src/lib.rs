//! Teacher-student action advising with advice reuse.
//!
//! A DQN student collects a budgeted stream of teacher advice, fits a
//! dropout-regularized behavioural cloner to it, and reuses the cloner's
//! advice on exploration steps where the cloner is confident.

pub mod advising;
pub mod dqn;
pub mod env;
pub mod harness;
pub mod error;
pub(crate) mod kv;
pub mod nn;
pub mod rng;
pub mod teacher;

pub use error::{Error, Result};
