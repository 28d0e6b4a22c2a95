use std::sync::Arc;

use rand::Rng;

use super::{EnvSpec, Observation, StepResult, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Full simulator state. The previous executed action drives stickiness
/// but is not part of the observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SimState {
    pub pos: usize,
    pub prev_action: usize,
}

/// A live episode of an [`EnvSpec`].
#[derive(Debug, Clone)]
pub struct GridEnv {
    spec: Arc<EnvSpec>,
    state: SimState,
    steps: usize,
    active: bool,
}

impl GridEnv {
    pub fn new(spec: Arc<EnvSpec>) -> Self {
        let start = spec.start_cell();
        Self {
            spec,
            state: SimState {
                pos: start,
                prev_action: 0,
            },
            steps: 0,
            active: false,
        }
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn state(&self) -> SimState {
        self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    /// Starts an episode: the previous action is drawn uniformly, then a
    /// uniform number of drift moves from `[noop_min, noop_max]` is applied.
    /// Each drift move picks a uniform direction and only enters free cells.
    pub fn reset(&mut self, rng: &mut SeededRng) -> Observation {
        let spec = &self.spec;
        let prev_action = rng.gen_range(0..NUM_ACTIONS);
        let noops = rng.gen_range(spec.noop_min..=spec.noop_max);
        let mut pos = spec.start_cell();
        for _ in 0..noops {
            pos = spec.drift_target(pos, rng.gen_range(0..NUM_ACTIONS));
        }
        self.state = SimState { pos, prev_action };
        self.steps = 0;
        self.active = true;
        spec.observation(pos)
    }

    pub fn observation(&self) -> Observation {
        self.spec.observation(self.state.pos)
    }

    pub fn step(&mut self, action: usize, rng: &mut SeededRng) -> Result<StepResult> {
        if !self.active {
            return Err(Error::contract("step called on a finished or unstarted episode"));
        }
        if action >= NUM_ACTIONS {
            return Err(Error::contract(format!("action {action} out of range")));
        }
        let sticky: f64 = rng.gen();
        let executed = if sticky < self.spec.sticky_p {
            self.state.prev_action
        } else {
            action
        };
        let pos = self.spec.target(self.state.pos, executed);
        let (reward, terminal) = self.spec.arrival(pos);
        self.state = SimState {
            pos,
            prev_action: executed,
        };
        self.steps += 1;
        let truncated = !terminal && self.steps >= self.spec.max_steps;
        self.active = !(terminal || truncated);
        Ok(StepResult {
            observation: self.spec.observation(pos),
            reward,
            terminal,
            truncated,
        })
    }
}
