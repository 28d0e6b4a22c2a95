//! The student's task-level learner.

mod agent;
mod replay;
mod schedule;

pub use agent::{parse_agent_checkpoint, AgentCheckpoint, DqnConfig, StudentAgent, REFERENCE_T_MAX};
pub use replay::{ReplayMemory, Transition};
pub use schedule::EpsilonSchedule;
