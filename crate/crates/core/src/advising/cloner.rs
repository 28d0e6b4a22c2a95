use rand::Rng;

use super::config::AdvisingConfig;
use super::dataset::AdviceDataset;
use crate::error::{Error, Result};
use crate::nn::{argmax, softmax, AdamConfig, DropoutMasks, DropoutMode, HeadKind, Network, OptimizerState};
use crate::rng::{indexed_stream, SeededRng};

/// Behavioural cloner `G`: an action-logits network with dropout, trained
/// once on the advice dataset and then queried for imitated advice and its
/// MC-dropout uncertainty.
#[derive(Debug, Clone)]
pub struct BehavioralCloner {
    net: Network,
    optimizer: OptimizerState,
    trained: bool,
    last_loss: Option<f64>,
}

impl BehavioralCloner {
    pub fn new(obs_len: usize, num_actions: usize, cfg: &AdvisingConfig, rng: &mut SeededRng) -> Result<Self> {
        let net = Network::mlp(
            HeadKind::ActionLogits,
            obs_len,
            &cfg.bc_hidden,
            num_actions,
            Some(cfg.dropout_rate),
            rng,
        )?;
        Ok(Self::from_network(net, cfg.bc_learning_rate))
    }

    pub fn from_network(net: Network, learning_rate: f64) -> Self {
        let optimizer = OptimizerState::new(AdamConfig::with_learning_rate(learning_rate), &net);
        Self {
            net,
            optimizer,
            trained: false,
            last_loss: None,
        }
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    /// Mean minibatch loss of the final training iteration.
    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }

    /// Runs `bc_iterations` Adam steps on minibatches drawn uniformly with
    /// replacement from `data`. Every sample gets a fresh dropout mask.
    pub fn train(&mut self, data: &AdviceDataset, cfg: &AdvisingConfig, rng: &mut SeededRng) -> Result<()> {
        if self.trained {
            return Err(Error::contract("the cloner is trained only once"));
        }
        if data.is_empty() {
            return Err(Error::contract("cannot train the cloner on an empty dataset"));
        }
        let pairs = data.pairs();
        let mut batch: Vec<(&[f64], usize)> = Vec::with_capacity(cfg.bc_minibatch);
        for _ in 0..cfg.bc_iterations {
            batch.clear();
            for _ in 0..cfg.bc_minibatch {
                let p = &pairs[rng.gen_range(0..pairs.len())];
                batch.push((p.state.as_slice(), p.action));
            }
            let (loss, grads) = self.net.nll_loss_and_grad(&batch, DropoutMode::Stochastic(rng))?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("cloner loss became {loss}")));
            }
            self.optimizer.apply(&mut self.net, &grads)?;
            self.last_loss = Some(loss);
        }
        self.trained = true;
        Ok(())
    }

    /// Imitated advice: argmax of the deterministic logits, lowest index on ties.
    pub fn generate(&self, state: &[f64]) -> Result<usize> {
        self.require_trained()?;
        Ok(argmax(&self.net.forward(state, DropoutMode::Deterministic)?))
    }

    /// MC-dropout uncertainty at `state`. Pass `i` draws its masks from a
    /// stream keyed by `(seed, step, i)`, so the estimate is a pure function
    /// of its arguments.
    pub fn uncertainty(&self, state: &[f64], passes: usize, seed: u64, step: u64) -> Result<f64> {
        self.require_trained()?;
        let masks: Vec<DropoutMasks> = (0..passes as u64)
            .map(|i| self.net.sample_masks(&mut indexed_stream(seed, "uncertainty", &[step, i])))
            .collect();
        self.uncertainty_with_masks(state, &masks)
    }

    /// Uncertainty over an explicit list of mask sets: the per-action
    /// population variance of the softmax probabilities across passes,
    /// averaged over actions.
    pub fn uncertainty_with_masks(&self, state: &[f64], masks: &[DropoutMasks]) -> Result<f64> {
        self.require_trained()?;
        if masks.len() < 2 {
            return Err(Error::config("uncertainty needs at least two passes"));
        }
        let probs: Vec<Vec<f64>> = self
            .net
            .forward_many(state, masks)?
            .iter()
            .map(|logits| softmax(logits))
            .collect();
        Ok(probability_spread(&probs))
    }

    /// Fraction of dataset pairs whose label matches [`Self::generate`].
    pub fn accuracy(&self, data: &AdviceDataset) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut hits = 0usize;
        for p in data.pairs() {
            if self.generate(&p.state)? == p.action {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.len() as f64)
    }

    fn require_trained(&self) -> Result<()> {
        if self.trained {
            Ok(())
        } else {
            Err(Error::contract("the cloner has not been trained yet"))
        }
    }
}

/// Mean over actions of the population variance across rows. Deviations
/// are taken from the first row, so identical rows give exactly zero.
pub(crate) fn probability_spread(probs: &[Vec<f64>]) -> f64 {
    let m = probs.len() as f64;
    let actions = probs[0].len();
    let mut total = 0.0;
    for a in 0..actions {
        let pivot = probs[0][a];
        let (sum, sum_sq) = probs.iter().fold((0.0, 0.0), |(s, q), p| {
            let d = p[a] - pivot;
            (s + d, q + d * d)
        });
        let mean = sum / m;
        total += (sum_sq / m - mean * mean).max(0.0);
    }
    total / actions as f64
}
