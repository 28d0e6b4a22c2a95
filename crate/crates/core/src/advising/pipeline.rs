use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cloner::BehavioralCloner;
use super::config::{AdvisingConfig, AdvisingMode};
use super::dataset::{AdviceDataset, AdvicePair};
use crate::env::Observation;
use crate::error::{Error, Result};
use crate::rng::{combine, stream, SeededRng};
use crate::teacher::Teacher;

/// Where the executed action came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionSource {
    Teacher,
    Imitation,
    Student,
}

impl ActionSource {
    pub fn name(self) -> &'static str {
        match self {
            ActionSource::Teacher => "teacher",
            ActionSource::Imitation => "imitation",
            ActionSource::Student => "student",
        }
    }
}

/// Outcome of arbitration for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: usize,
    pub source: ActionSource,
    /// Set whenever the uncertainty was actually computed this step.
    pub uncertainty: Option<f64>,
    /// Teacher action on a reuse step, queried for bookkeeping only.
    pub shadow_action: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvisingCounters {
    pub budget_remaining: u64,
    pub advice_collected: u64,
    pub reuses: u64,
    pub reuses_correct: u64,
    pub exploration_steps: u64,
    pub uncertainty_evals: u64,
    pub episodes: u64,
    pub reuse_episodes: u64,
    pub cloner_trained_at: Option<u64>,
}

/// Per-session advising state: budget, dataset, cloner and the episodic
/// reuse coin. Drives the teacher / imitation / student arbitration.
#[derive(Debug, Clone)]
pub struct Advisor {
    cfg: AdvisingConfig,
    dataset: AdviceDataset,
    cloner: BehavioralCloner,
    counters: AdvisingCounters,
    reuse_allowed: bool,
    coin_rng: SeededRng,
    bc_rng: SeededRng,
    uncertainty_seed: u64,
}

impl Advisor {
    pub fn new(cfg: AdvisingConfig, obs_len: usize, num_actions: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut init_rng = stream(seed, "bc-init");
        let cloner = BehavioralCloner::new(obs_len, num_actions, &cfg, &mut init_rng)?;
        let budget = if cfg.mode.collects() { cfg.budget } else { 0 };
        Ok(Self {
            dataset: AdviceDataset::new(),
            cloner,
            counters: AdvisingCounters {
                budget_remaining: budget,
                ..AdvisingCounters::default()
            },
            reuse_allowed: false,
            coin_rng: stream(seed, "advising"),
            bc_rng: stream(seed, "bc"),
            uncertainty_seed: combine(&[seed, 0x756e_6365_7274]),
            cfg,
        })
    }

    pub fn config(&self) -> &AdvisingConfig {
        &self.cfg
    }

    pub fn dataset(&self) -> &AdviceDataset {
        &self.dataset
    }

    pub fn cloner(&self) -> &BehavioralCloner {
        &self.cloner
    }

    pub fn counters(&self) -> &AdvisingCounters {
        &self.counters
    }

    pub fn reuse_allowed(&self) -> bool {
        self.reuse_allowed
    }

    /// The uncertainty arbitration would see for `obs` at `step`.
    pub fn uncertainty_at(&self, obs: &[f64], step: u64) -> Result<f64> {
        self.cloner
            .uncertainty(obs, self.cfg.uncertainty_passes, self.uncertainty_seed, step)
    }

    /// Flips the episodic reuse coin.
    pub fn on_episode_start(&mut self) {
        let u: f64 = self.coin_rng.gen();
        self.reuse_allowed = u < self.cfg.reuse_probability;
        self.counters.episodes += 1;
        if self.reuse_allowed {
            self.counters.reuse_episodes += 1;
        }
    }

    /// Trains the cloner once the dataset has reached its trigger size.
    /// Called at the top of each step; returns whether training ran.
    pub fn begin_step(&mut self, step: u64) -> Result<bool> {
        if self.cfg.mode != AdvisingMode::AdviceReuse
            || self.cloner.is_trained()
            || self.dataset.len() != self.cfg.dataset_trigger
        {
            return Ok(false);
        }
        self.cloner.train(&self.dataset, &self.cfg, &mut self.bc_rng)?;
        self.counters.cloner_trained_at = Some(step);
        Ok(true)
    }

    /// Spends one unit of budget on a genuine teacher query, if any is left,
    /// and stores the pair while the dataset is below its trigger size.
    pub fn maybe_collect(&mut self, step: u64, obs: &Observation, teacher: &mut Teacher) -> Result<Option<usize>> {
        if self.counters.budget_remaining == 0 {
            return Ok(None);
        }
        let action = teacher.advise(step, obs, false)?;
        self.counters.budget_remaining -= 1;
        self.counters.advice_collected += 1;
        if self.dataset.len() < self.cfg.dataset_trigger {
            self.dataset.push(AdvicePair {
                state: obs.clone(),
                action,
            });
        }
        Ok(Some(action))
    }

    /// Picks the executed action: teacher advice first, then imitated advice
    /// on a confident exploration step, otherwise the student's own choice.
    pub fn arbitrate(
        &mut self,
        step: u64,
        obs: &Observation,
        student_action: usize,
        explorative: bool,
        teacher_action: Option<usize>,
    ) -> Result<Decision> {
        if explorative {
            self.counters.exploration_steps += 1;
        }
        if let Some(action) = teacher_action {
            return Ok(Decision {
                action,
                source: ActionSource::Teacher,
                uncertainty: None,
                shadow_action: None,
            });
        }
        let student = Decision {
            action: student_action,
            source: ActionSource::Student,
            uncertainty: None,
            shadow_action: None,
        };
        if self.cfg.mode != AdvisingMode::AdviceReuse
            || !explorative
            || !self.cloner.is_trained()
            || !self.reuse_allowed
        {
            return Ok(student);
        }
        let u = self.uncertainty_at(obs, step)?;
        self.counters.uncertainty_evals += 1;
        if u < self.cfg.reuse_threshold {
            self.counters.reuses += 1;
            Ok(Decision {
                action: self.cloner.generate(obs)?,
                source: ActionSource::Imitation,
                uncertainty: Some(u),
                shadow_action: None,
            })
        } else {
            Ok(Decision {
                uncertainty: Some(u),
                ..student
            })
        }
    }

    /// Records the teacher's shadow answer for a reuse step.
    pub fn record_shadow(&mut self, decision: &mut Decision, teacher_action: usize) -> Result<()> {
        if decision.source != ActionSource::Imitation {
            return Err(Error::contract("shadow queries belong to imitation steps"));
        }
        decision.shadow_action = Some(teacher_action);
        if teacher_action == decision.action {
            self.counters.reuses_correct += 1;
        }
        Ok(())
    }

    /// Full advising pipeline for one step, after the student has acted.
    pub fn decide(
        &mut self,
        step: u64,
        obs: &Observation,
        student_action: usize,
        explorative: bool,
        teacher: &mut Teacher,
    ) -> Result<Decision> {
        let advice = self.maybe_collect(step, obs, teacher)?;
        let mut decision = self.arbitrate(step, obs, student_action, explorative, advice)?;
        if decision.source == ActionSource::Imitation {
            let shadow = teacher.advise(step, obs, true)?;
            self.record_shadow(&mut decision, shadow)?;
        }
        Ok(decision)
    }
}
