use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dqn::StudentAgent;
use crate::env::{EnvSpec, GridEnv, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::teacher::Teacher;

/// Anything that picks an action for an observation during evaluation.
pub trait Policy {
    fn action(&self, obs: &[f64], rng: &mut SeededRng) -> Result<usize>;
}

/// The student's greedy policy (ε = 0, no advising).
pub struct Greedy<'a>(pub &'a StudentAgent);

impl Policy for Greedy<'_> {
    fn action(&self, obs: &[f64], _rng: &mut SeededRng) -> Result<usize> {
        Ok(self.0.greedy(obs))
    }
}

impl Policy for Teacher {
    fn action(&self, obs: &[f64], _rng: &mut SeededRng) -> Result<usize> {
        self.policy(obs)
    }
}

/// Uniformly random actions.
pub struct UniformRandom;

impl Policy for UniformRandom {
    fn action(&self, _obs: &[f64], rng: &mut SeededRng) -> Result<usize> {
        Ok(rng.gen_range(0..NUM_ACTIONS))
    }
}

/// Evaluation result at one training step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: u64,
    pub mean_return: f64,
    pub std_return: f64,
    pub returns: Vec<f64>,
}

/// Runs `episodes` complete episodes of `policy` in a fresh environment and
/// reports the undiscounted returns. `rng` drives both the environment and
/// the policy; nothing else is touched.
pub fn evaluate(
    policy: &dyn Policy,
    spec: &Arc<EnvSpec>,
    episodes: usize,
    step: u64,
    rng: &mut SeededRng,
) -> Result<EvalPoint> {
    if episodes == 0 {
        return Err(Error::config("evaluation needs at least one episode"));
    }
    let mut env = GridEnv::new(spec.clone());
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset(rng);
        let mut total = 0.0;
        loop {
            let a = policy.action(&obs, rng)?;
            let r = env.step(a, rng)?;
            total += r.reward;
            if r.terminal || r.truncated {
                break;
            }
            obs = r.observation;
        }
        returns.push(total);
    }
    let (mean_return, std_return) = mean_std(&returns);
    Ok(EvalPoint {
        step,
        mean_return,
        std_return,
        returns,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
