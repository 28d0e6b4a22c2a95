use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which advising strategy the student follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AdvisingMode {
    /// No teacher at all.
    None,
    /// Early advising: the first `b` steps follow the teacher.
    EarlyAdvising,
    /// Early advising plus reuse of imitated advice on exploration steps.
    AdviceReuse,
}

impl AdvisingMode {
    pub fn name(self) -> &'static str {
        match self {
            AdvisingMode::None => "none",
            AdvisingMode::EarlyAdvising => "ea",
            AdvisingMode::AdviceReuse => "ar",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Some(AdvisingMode::None),
            "ea" => Some(AdvisingMode::EarlyAdvising),
            "ar" => Some(AdvisingMode::AdviceReuse),
            _ => None,
        }
    }

    pub fn collects(self) -> bool {
        self != AdvisingMode::None
    }
}

impl std::fmt::Display for AdvisingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisingConfig {
    pub mode: AdvisingMode,
    /// Advising budget `b`.
    pub budget: u64,
    /// Dataset size that triggers cloner training.
    pub dataset_trigger: usize,
    /// Cloner training iterations.
    pub bc_iterations: u64,
    /// Reuse happens only when uncertainty is strictly below this.
    pub reuse_threshold: f64,
    /// Per-episode probability that reuse is enabled.
    pub reuse_probability: f64,
    /// Stochastic forward passes per uncertainty estimate.
    pub uncertainty_passes: usize,
    pub bc_minibatch: usize,
    pub bc_learning_rate: f64,
    pub dropout_rate: f64,
    pub bc_hidden: Vec<usize>,
}

impl AdvisingConfig {
    /// Reference values for a 3M-step session.
    pub fn reference(mode: AdvisingMode) -> Self {
        Self {
            mode,
            budget: 10_000,
            dataset_trigger: 10_000,
            bc_iterations: 50_000,
            reuse_threshold: 0.01,
            reuse_probability: 0.5,
            uncertainty_passes: 100,
            bc_minibatch: 32,
            bc_learning_rate: 1e-4,
            dropout_rate: 0.2,
            bc_hidden: vec![128, 128],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == AdvisingMode::AdviceReuse && self.dataset_trigger == 0 {
            return Err(Error::config("dataset_trigger must be positive"));
        }
        if self.mode.collects() && self.dataset_trigger as u64 > self.budget && self.budget > 0 {
            return Err(Error::config(format!(
                "dataset_trigger ({}) exceeds the budget ({}); the cloner would never train",
                self.dataset_trigger, self.budget
            )));
        }
        if !(self.reuse_threshold > 0.0) {
            return Err(Error::config("reuse_threshold must be positive"));
        }
        if !(0.0..=1.0).contains(&self.reuse_probability) {
            return Err(Error::config("reuse_probability must lie in [0, 1]"));
        }
        if self.uncertainty_passes < 2 {
            return Err(Error::config("uncertainty_passes must be at least 2"));
        }
        if self.bc_minibatch == 0 {
            return Err(Error::config("bc_minibatch must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("dropout_rate must lie in [0, 1)"));
        }
        if !(self.bc_learning_rate > 0.0) {
            return Err(Error::config("bc_learning_rate must be positive"));
        }
        Ok(())
    }
}
