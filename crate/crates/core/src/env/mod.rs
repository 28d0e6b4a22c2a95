//! Episodic gridworld MDPs with random starts and sticky actions.

mod grid;
mod spec;
mod states;

pub use grid::{GridEnv, SimState};
pub use spec::{Cell, Dynamics, EnvSpec, Rewards};
pub use states::{StateSpace, Transition as ModelTransition};

/// Number of actions in every gridworld: up, right, down, left.
pub const NUM_ACTIONS: usize = 4;

/// Fixed-length real vector fed to every network.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for Observation {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    /// Goal or hazard reached.
    pub terminal: bool,
    /// Time limit reached without a terminal event.
    pub truncated: bool,
}

#[cfg(test)]
mod tests;
