use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::advising::{AdvisingConfig, AdvisingMode};
use crate::dqn::{DqnConfig, EpsilonSchedule, REFERENCE_T_MAX};
use crate::error::{Error, Result};
use crate::kv;

/// Session length used when a config does not set `t_max`.
pub const DEFAULT_T_MAX: u64 = 30_000;

/// Everything a session depends on. A run is a pure function of this value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// `builtin:<name>` or a path to an environment spec file.
    pub env: String,
    pub t_max: u64,
    pub seed: u64,
    pub eval_period: u64,
    pub eval_episodes: usize,
    /// `oracle` or a path to a Q-network checkpoint.
    pub teacher: String,
    /// Write an agent checkpoint at every evaluation point.
    pub checkpoints: bool,
    pub out: Option<PathBuf>,
    pub dqn: DqnConfig,
    pub advising: AdvisingConfig,
}

fn scale(t_max: u64, reference: f64) -> u64 {
    ((reference * t_max as f64 / REFERENCE_T_MAX as f64).round() as u64).max(1)
}

impl RunConfig {
    /// Desk-scale defaults. Budget, evaluation period and ε decay follow the
    /// reference proportions of a 3M-step session. Networks are smaller and
    /// learning rates larger so that tens of thousands of steps suffice on
    /// gridworlds; the replay memory holds the whole session and the target
    /// network syncs every 500 steps, since proportional scaling of those two
    /// makes learning unstable at this length.
    pub fn scaled(t_max: u64) -> Self {
        let mut dqn = DqnConfig::scaled(t_max);
        dqn.hidden = vec![64, 64];
        dqn.stream_hidden = 32;
        dqn.learning_rate = 5e-4;
        dqn.replay_capacity = t_max as usize;
        dqn.target_sync_period = 500;
        let budget = scale(t_max, 10_000.0);
        let advising = AdvisingConfig {
            mode: AdvisingMode::AdviceReuse,
            budget,
            dataset_trigger: budget as usize,
            bc_iterations: 2_000,
            bc_learning_rate: 1e-3,
            bc_hidden: vec![64, 64],
            ..AdvisingConfig::reference(AdvisingMode::AdviceReuse)
        };
        Self {
            env: "builtin:hazard-lane".into(),
            t_max,
            seed: 0,
            eval_period: scale(t_max, 25_000.0),
            eval_episodes: 10,
            teacher: "oracle".into(),
            checkpoints: false,
            out: None,
            dqn,
            advising,
        }
    }

    pub fn mode(&self) -> AdvisingMode {
        self.advising.mode
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 {
            return Err(Error::config("t_max must be positive"));
        }
        if self.eval_period == 0 {
            return Err(Error::config("eval_period must be positive"));
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("eval_episodes must be positive"));
        }
        self.dqn.validate()?;
        self.advising.validate()
    }

    /// Parses a config file. `t_max` is read first because the defaults of
    /// every other key scale with it.
    pub fn parse(text: &str) -> Result<Self> {
        let entries = kv::parse(text)?;
        let mut cfg = Self::scaled(DEFAULT_T_MAX);
        if let Some(e) = entries.iter().rev().find(|e| e.key == "t_max") {
            cfg = Self::scaled(e.parse()?);
        }
        for e in &entries {
            cfg.set(&e.key, &e.value)
                .map_err(|err| Error::config(format!("line {}: {}", e.line, message(err))))?;
        }
        if !entries.iter().any(|e| e.key == "dataset_trigger") {
            cfg.advising.dataset_trigger = cfg.advising.budget.max(1) as usize;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Sets one key from its text value. Errors name the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::config(format!("invalid value `{value}` for key `{key}`")))
        }
        fn list(key: &str, value: &str) -> Result<Vec<usize>> {
            value
                .split(',')
                .map(|v| num(key, v.trim()))
                .collect()
        }
        let d = &mut self.dqn;
        let a = &mut self.advising;
        match key {
            "env" => self.env = value.to_string(),
            "mode" => {
                a.mode = AdvisingMode::parse(value)
                    .ok_or_else(|| Error::config(format!("invalid value `{value}` for key `mode`")))?
            }
            "t_max" => self.t_max = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "eval_period" => self.eval_period = num(key, value)?,
            "eval_episodes" => self.eval_episodes = num(key, value)?,
            "teacher" => self.teacher = value.to_string(),
            "checkpoints" => self.checkpoints = num(key, value)?,
            "out" => self.out = (!value.is_empty()).then(|| PathBuf::from(value)),
            "hidden" => d.hidden = list(key, value)?,
            "stream_hidden" => d.stream_hidden = num(key, value)?,
            "learning_rate" => d.learning_rate = num(key, value)?,
            "minibatch" => d.minibatch = num(key, value)?,
            "train_period" => d.train_period = num(key, value)?,
            "target_sync_period" => d.target_sync_period = num(key, value)?,
            "gamma" => d.gamma = num(key, value)?,
            "replay_capacity" => d.replay_capacity = num(key, value)?,
            "replay_initial" => d.replay_initial = num(key, value)?,
            "epsilon_initial" => d.epsilon.initial = num(key, value)?,
            "epsilon_final" => d.epsilon.final_value = num(key, value)?,
            "epsilon_decay_steps" => d.epsilon.decay_steps = num(key, value)?,
            "budget" => a.budget = num(key, value)?,
            "dataset_trigger" => a.dataset_trigger = num(key, value)?,
            "bc_iterations" => a.bc_iterations = num(key, value)?,
            "reuse_threshold" => a.reuse_threshold = num(key, value)?,
            "reuse_probability" => a.reuse_probability = num(key, value)?,
            "uncertainty_passes" => a.uncertainty_passes = num(key, value)?,
            "bc_minibatch" => a.bc_minibatch = num(key, value)?,
            "bc_learning_rate" => a.bc_learning_rate = num(key, value)?,
            "dropout_rate" => a.dropout_rate = num(key, value)?,
            "bc_hidden" => a.bc_hidden = list(key, value)?,
            _ => return Err(Error::config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Canonical text form; [`RunConfig::parse`] reads it back unchanged.
    pub fn to_text(&self) -> String {
        let mut s = self.fingerprint();
        writeln!(s, "seed = {}", self.seed).unwrap();
        if let Some(out) = &self.out {
            writeln!(s, "out = {}", out.display()).unwrap();
        }
        s
    }

    /// Canonical text of every key except `seed` and `out`; runs that agree
    /// on it differ only in their seed.
    pub fn fingerprint(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let d = &self.dqn;
        let a = &self.advising;
        let EpsilonSchedule {
            initial,
            final_value,
            decay_steps,
        } = d.epsilon;
        let pairs: Vec<(&str, String)> = vec![
            ("env", self.env.clone()),
            ("mode", a.mode.name().into()),
            ("t_max", self.t_max.to_string()),
            ("eval_period", self.eval_period.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
            ("teacher", self.teacher.clone()),
            ("checkpoints", self.checkpoints.to_string()),
            ("hidden", join(&d.hidden)),
            ("stream_hidden", d.stream_hidden.to_string()),
            ("learning_rate", d.learning_rate.to_string()),
            ("minibatch", d.minibatch.to_string()),
            ("train_period", d.train_period.to_string()),
            ("target_sync_period", d.target_sync_period.to_string()),
            ("gamma", d.gamma.to_string()),
            ("replay_capacity", d.replay_capacity.to_string()),
            ("replay_initial", d.replay_initial.to_string()),
            ("epsilon_initial", initial.to_string()),
            ("epsilon_final", final_value.to_string()),
            ("epsilon_decay_steps", decay_steps.to_string()),
            ("budget", a.budget.to_string()),
            ("dataset_trigger", a.dataset_trigger.to_string()),
            ("bc_iterations", a.bc_iterations.to_string()),
            ("reuse_threshold", a.reuse_threshold.to_string()),
            ("reuse_probability", a.reuse_probability.to_string()),
            ("uncertainty_passes", a.uncertainty_passes.to_string()),
            ("bc_minibatch", a.bc_minibatch.to_string()),
            ("bc_learning_rate", a.bc_learning_rate.to_string()),
            ("dropout_rate", a.dropout_rate.to_string()),
            ("bc_hidden", join(&a.bc_hidden)),
        ];
        let mut s = String::new();
        for (k, v) in pairs {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }
}

fn message(err: Error) -> String {
    match err {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}
