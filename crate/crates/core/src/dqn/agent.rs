use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EpsilonSchedule, ReplayMemory, Transition};
use crate::error::{Error, Result};
use crate::nn::{argmax, read_network, fmt_f64, network_to_string, AdamConfig, Lines, Network, OptimizerState};
use crate::rng::SeededRng;

/// Student DQN hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub stream_hidden: usize,
    pub learning_rate: f64,
    pub minibatch: usize,
    pub train_period: u64,
    pub target_sync_period: u64,
    pub gamma: f64,
    pub replay_capacity: usize,
    pub replay_initial: usize,
    pub epsilon: EpsilonSchedule,
}

/// Session length the reference schedule was designed for.
pub const REFERENCE_T_MAX: u64 = 3_000_000;

impl DqnConfig {
    /// The reference hyperparameters for a 3M-step session.
    pub fn reference() -> Self {
        Self {
            hidden: vec![128, 128],
            stream_hidden: 64,
            learning_rate: 625e-7,
            minibatch: 32,
            train_period: 4,
            target_sync_period: 7500,
            gamma: 0.99,
            replay_capacity: 500_000,
            replay_initial: 50_000,
            epsilon: EpsilonSchedule {
                initial: 1.0,
                final_value: 0.01,
                decay_steps: 500_000,
            },
        }
    }

    /// Reference schedule with step-denominated quantities (replay sizes,
    /// sync period, ε decay) scaled by `t_max / 3M`.
    pub fn scaled(t_max: u64) -> Self {
        let r = t_max as f64 / REFERENCE_T_MAX as f64;
        let scale = |x: f64| ((x * r).round() as u64).max(1);
        let mut c = Self::reference();
        c.replay_capacity = scale(500_000.0) as usize;
        c.replay_initial = (scale(50_000.0) as usize).max(c.minibatch);
        c.target_sync_period = scale(7500.0);
        c.epsilon.decay_steps = scale(500_000.0);
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.minibatch == 0 || self.train_period == 0 || self.target_sync_period == 0 {
            return Err(Error::config("minibatch, train_period and target_sync_period must be positive"));
        }
        if self.replay_capacity == 0 {
            return Err(Error::config("replay_capacity must be positive"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("gamma must lie in [0, 1]"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        Ok(())
    }
}

/// Dueling double-DQN learner with replay and a periodically synced target
/// network.
#[derive(Debug, Clone)]
pub struct StudentAgent {
    config: DqnConfig,
    online: Network,
    target: Network,
    optimizer: OptimizerState,
    replay: ReplayMemory,
    num_actions: usize,
    step: u64,
    last_sync: u64,
}

impl StudentAgent {
    pub fn new(config: DqnConfig, obs_len: usize, num_actions: usize, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let online = Network::dueling(obs_len, &config.hidden, config.stream_hidden, num_actions, rng)?;
        let target = online.clone();
        let optimizer = OptimizerState::new(AdamConfig::with_learning_rate(config.learning_rate), &online);
        let replay = ReplayMemory::new(config.replay_capacity, config.replay_initial);
        Ok(Self {
            config,
            online,
            target,
            optimizer,
            replay,
            num_actions,
            step: 0,
            last_sync: 0,
        })
    }

    /// An agent around explicit networks (any Q-value head).
    pub fn with_networks(config: DqnConfig, online: Network, target: Network) -> Result<Self> {
        config.validate()?;
        if online.head() == crate::nn::HeadKind::ActionLogits || online.param_count() != target.param_count() {
            return Err(Error::config("online and target must be matching Q-value networks"));
        }
        let optimizer = OptimizerState::new(AdamConfig::with_learning_rate(config.learning_rate), &online);
        let replay = ReplayMemory::new(config.replay_capacity, config.replay_initial);
        Ok(Self {
            num_actions: online.output_dim(),
            config,
            online,
            target,
            optimizer,
            replay,
            step: 0,
            last_sync: 0,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn online(&self) -> &Network {
        &self.online
    }

    pub fn target(&self) -> &Network {
        &self.target
    }

    pub fn replay(&self) -> &ReplayMemory {
        &self.replay
    }

    /// Environment steps seen so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn last_sync(&self) -> u64 {
        self.last_sync
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.value(self.step)
    }

    pub fn q_values(&self, obs: &[f64]) -> Vec<f64> {
        self.online.predict(obs)
    }

    pub fn greedy(&self, obs: &[f64]) -> usize {
        argmax(&self.online.predict(obs))
    }

    /// ε-greedy action and whether the uniform branch was taken.
    pub fn act(&self, obs: &[f64], rng: &mut SeededRng) -> (usize, bool) {
        let u: f64 = rng.gen();
        if u < self.epsilon() {
            (rng.gen_range(0..self.num_actions), true)
        } else {
            (self.greedy(obs), false)
        }
    }

    pub fn observe(&mut self, t: Transition) {
        self.replay.push(t);
    }

    /// `r` for terminal transitions, else `r + γ Q̄(s', argmax_a Q(s', a))`.
    pub fn compute_double_q_targets(&self, batch: &[&Transition]) -> Vec<f64> {
        batch
            .iter()
            .map(|t| {
                if t.terminal {
                    t.reward
                } else {
                    let a = argmax(&self.online.predict(&t.next_state));
                    t.reward + self.config.gamma * self.target.predict(&t.next_state)[a]
                }
            })
            .collect()
    }

    /// Advances the step counter; trains every `train_period` steps once the
    /// replay memory is ready, and syncs the target network every
    /// `target_sync_period` steps. Returns the loss when a minibatch was used.
    pub fn train_step(&mut self, rng: &mut SeededRng) -> Result<Option<f64>> {
        self.step += 1;
        let mut loss = None;
        if self.step % self.config.train_period == 0 && self.replay.is_ready() {
            let batch = self.replay.sample(self.config.minibatch, rng);
            let targets = self.compute_double_q_targets(&batch);
            let samples: Vec<(&[f64], usize, f64)> = batch
                .iter()
                .zip(&targets)
                .map(|(t, &y)| (t.state.as_slice(), t.action, y))
                .collect();
            let (l, grads) = self.online.td_loss_and_grad(&samples)?;
            if !l.is_finite() {
                return Err(Error::Numerical(format!("non-finite TD loss at step {}", self.step)));
            }
            self.optimizer.apply(&mut self.online, &grads)?;
            if !self.online.params_finite() {
                return Err(Error::Numerical(format!("non-finite parameters at step {}", self.step)));
            }
            loss = Some(l);
        }
        if self.step % self.config.target_sync_period == 0 {
            self.sync_target();
        }
        Ok(loss)
    }

    pub fn sync_target(&mut self) {
        self.target.copy_params_from(&self.online);
        self.last_sync = self.step;
    }

    /// Both networks plus the scalar training state.
    pub fn checkpoint_to_string(&self) -> String {
        let mut out = String::new();
        out.push_str("agent\n");
        writeln!(out, "step {}", self.step).unwrap();
        writeln!(out, "last_sync {}", self.last_sync).unwrap();
        out.push_str("epsilon ");
        fmt_f64(&mut out, self.epsilon());
        out.push('\n');
        writeln!(out, "epsilon_schedule {} {} {}", self.config.epsilon.initial, self.config.epsilon.final_value, self.config.epsilon.decay_steps).unwrap();
        out.push_str("online\n");
        out.push_str(&network_to_string(&self.online));
        out.push_str("target\n");
        out.push_str(&network_to_string(&self.target));
        out
    }
}

/// Contents of an agent checkpoint.
#[derive(Debug, Clone)]
pub struct AgentCheckpoint {
    pub step: u64,
    pub last_sync: u64,
    pub epsilon: f64,
    pub online: Network,
    pub target: Network,
}

fn scalar<T: std::str::FromStr>(lines: &mut Lines<'_>, key: &str) -> Result<T> {
    let (n, line) = lines.next_line()?;
    line.strip_prefix(key)
        .and_then(|rest| rest.trim().parse().ok())
        .ok_or_else(|| Error::Parse {
            line: n,
            msg: format!("expected `{key} <value>`"),
        })
}

/// Parses [`StudentAgent::checkpoint_to_string`] output.
pub fn parse_agent_checkpoint(text: &str) -> Result<AgentCheckpoint> {
    let mut lines = Lines::new(text);
    lines.expect("agent")?;
    let step = scalar(&mut lines, "step")?;
    let last_sync = scalar(&mut lines, "last_sync")?;
    let epsilon = scalar(&mut lines, "epsilon")?;
    lines.next_line()?; // epsilon_schedule
    lines.expect("online")?;
    let online = read_network(&mut lines)?;
    lines.expect("target")?;
    let target = read_network(&mut lines)?;
    Ok(AgentCheckpoint {
        step,
        last_sync,
        epsilon,
        online,
        target,
    })
}
