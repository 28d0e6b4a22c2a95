use serde::{Deserialize, Serialize};

/// Linear ε decay from `initial` to `final_value` over `decay_steps`, then
/// constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub final_value: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.final_value;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.initial + frac * (self.final_value - self.initial)
    }

    pub fn constant(eps: f64) -> Self {
        Self {
            initial: eps,
            final_value: eps,
            decay_steps: 0,
        }
    }
}
