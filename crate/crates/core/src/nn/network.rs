use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layer::{Activation, DenseLayer, LayerGrad};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// What the final layer(s) of a network compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadKind {
    QValues,
    /// Parallel value (1 unit) and advantage (|A| units) streams,
    /// aggregated as `Q = V + A - mean(A)`.
    DuelingQValues,
    ActionLogits,
}

impl HeadKind {
    pub fn name(self) -> &'static str {
        match self {
            HeadKind::QValues => "q_values",
            HeadKind::DuelingQValues => "dueling_q_values",
            HeadKind::ActionLogits => "action_logits",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "q_values" => Some(HeadKind::QValues),
            "dueling_q_values" => Some(HeadKind::DuelingQValues),
            "action_logits" => Some(HeadKind::ActionLogits),
            _ => None,
        }
    }
}

/// Dropout on the inputs of selected trunk layers.
///
/// `rate` is the probability of dropping a unit. `placement` lists the trunk
/// layer indices whose input is masked; placing it on every layer but the
/// first means "after every hidden layer".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub rate: f64,
    pub placement: Vec<usize>,
}

impl DropoutSpec {
    fn applies_to(&self, layer: usize) -> bool {
        self.placement.contains(&layer)
    }
}

/// One keep-mask (`true` = kept) per trunk layer that has dropout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DropoutMasks(pub Vec<Option<Vec<bool>>>);

/// How dropout behaves during a forward pass.
pub enum DropoutMode<'a> {
    /// Dropped inputs are scaled by `1 - rate`, the expectation over masks.
    Deterministic,
    /// A fresh Bernoulli mask per pass.
    Stochastic(&'a mut SeededRng),
    /// Caller-supplied masks.
    Pinned(&'a DropoutMasks),
}

#[derive(Debug, Clone, Default)]
struct LayerRecord {
    input: Vec<f64>,
    pre: Vec<f64>,
}

/// Everything backprop needs from one forward pass.
#[derive(Debug, Clone, Default)]
struct Trace {
    trunk: Vec<LayerRecord>,
    value: Vec<LayerRecord>,
    advantage: Vec<LayerRecord>,
    /// Per trunk layer, the multiplier applied to each input unit.
    input_scale: Vec<Option<Vec<f64>>>,
    output: Vec<f64>,
}

/// Dense feed-forward network with one of three heads.
///
/// For [`HeadKind::QValues`] and [`HeadKind::ActionLogits`] the last trunk
/// layer is the output layer. For [`HeadKind::DuelingQValues`] the trunk ends
/// in a hidden representation that feeds the two streams.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    head: HeadKind,
    trunk: Vec<DenseLayer>,
    value: Vec<DenseLayer>,
    advantage: Vec<DenseLayer>,
    dropout: Option<DropoutSpec>,
}

/// Per-parameter partial derivatives, layer for layer congruent with a
/// [`Network`] (trunk, then value stream, then advantage stream).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<LayerGrad>,
}

impl GradientSet {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net.layers().map(LayerGrad::zeros_like).collect(),
        }
    }

    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
    }

    pub fn flat(&self) -> Vec<f64> {
        self.slices().flatten().copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().flatten().all(|g| g.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.slices().flatten().fold(0.0, |m, g| m.max(g.abs()))
    }

    fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            for g in s {
                *g *= factor;
            }
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `log Σ exp(x)`.
fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln()
}

/// Index of the maximum; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl Network {
    /// Plain MLP: `hidden` ReLU layers then a linear output layer.
    pub fn mlp(
        head: HeadKind,
        input: usize,
        hidden: &[usize],
        outputs: usize,
        dropout: Option<f64>,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if head == HeadKind::DuelingQValues {
            return Err(Error::config("use Network::dueling for a dueling head"));
        }
        let mut trunk = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input;
        for &h in hidden {
            trunk.push(DenseLayer::new(prev, h, Activation::Relu, rng));
            prev = h;
        }
        trunk.push(DenseLayer::new(prev, outputs, Activation::Identity, rng));
        let dropout = dropout.map(|rate| DropoutSpec {
            rate,
            placement: (1..trunk.len()).collect(),
        });
        Self::from_layers(head, trunk, Vec::new(), Vec::new(), dropout)
    }

    /// Dueling Q-network: ReLU trunk, then value and advantage streams with
    /// one ReLU hidden layer of `stream_hidden` units each.
    pub fn dueling(
        input: usize,
        hidden: &[usize],
        stream_hidden: usize,
        actions: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let mut trunk = Vec::with_capacity(hidden.len());
        let mut prev = input;
        for &h in hidden {
            trunk.push(DenseLayer::new(prev, h, Activation::Relu, rng));
            prev = h;
        }
        let value = vec![
            DenseLayer::new(prev, stream_hidden, Activation::Relu, rng),
            DenseLayer::new(stream_hidden, 1, Activation::Identity, rng),
        ];
        let advantage = vec![
            DenseLayer::new(prev, stream_hidden, Activation::Relu, rng),
            DenseLayer::new(stream_hidden, actions, Activation::Identity, rng),
        ];
        Self::from_layers(HeadKind::DuelingQValues, trunk, value, advantage, None)
    }

    /// Assembles a network from explicit layers, checking every dimension.
    pub fn from_layers(
        head: HeadKind,
        trunk: Vec<DenseLayer>,
        value: Vec<DenseLayer>,
        advantage: Vec<DenseLayer>,
        dropout: Option<DropoutSpec>,
    ) -> Result<Self> {
        let chain_ok = |layers: &[DenseLayer]| {
            layers.windows(2).all(|w| w[0].out_dim() == w[1].in_dim())
        };
        if !chain_ok(&trunk) || !chain_ok(&value) || !chain_ok(&advantage) {
            return Err(Error::config("consecutive layer dimensions do not chain"));
        }
        match head {
            HeadKind::QValues | HeadKind::ActionLogits => {
                if trunk.is_empty() || !value.is_empty() || !advantage.is_empty() {
                    return Err(Error::config(format!(
                        "{} head needs a non-empty trunk and no streams",
                        head.name()
                    )));
                }
            }
            HeadKind::DuelingQValues => {
                if value.is_empty() || advantage.is_empty() {
                    return Err(Error::config("dueling head needs both streams"));
                }
                let feat = trunk.last().map(|l| l.out_dim());
                if let Some(f) = feat {
                    if value[0].in_dim() != f || advantage[0].in_dim() != f {
                        return Err(Error::config("stream inputs must match trunk output"));
                    }
                } else if value[0].in_dim() != advantage[0].in_dim() {
                    return Err(Error::config("stream inputs differ"));
                }
                if value.last().unwrap().out_dim() != 1 {
                    return Err(Error::config("value stream must end in one unit"));
                }
            }
        }
        if let Some(d) = &dropout {
            if !(0.0..=1.0).contains(&d.rate) {
                return Err(Error::config(format!("dropout rate {} outside [0,1]", d.rate)));
            }
            if d.placement.iter().any(|&i| i >= trunk.len()) {
                return Err(Error::config("dropout placement beyond the trunk"));
            }
        }
        Ok(Self {
            head,
            trunk,
            value,
            advantage,
            dropout,
        })
    }

    pub fn head(&self) -> HeadKind {
        self.head
    }

    pub fn dropout(&self) -> Option<&DropoutSpec> {
        self.dropout.as_ref()
    }

    pub fn trunk(&self) -> &[DenseLayer] {
        &self.trunk
    }

    pub fn value_stream(&self) -> &[DenseLayer] {
        &self.value
    }

    pub fn advantage_stream(&self) -> &[DenseLayer] {
        &self.advantage
    }

    /// All layers in canonical order: trunk, value stream, advantage stream.
    pub fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.trunk.iter().chain(&self.value).chain(&self.advantage)
    }

    pub fn input_dim(&self) -> usize {
        self.trunk
            .first()
            .or_else(|| self.value.first())
            .map(|l| l.in_dim())
            .unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        match self.head {
            HeadKind::DuelingQValues => self.advantage.last().unwrap().out_dim(),
            _ => self.trunk.last().unwrap().out_dim(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(DenseLayer::param_count).sum()
    }

    pub fn param_slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers().flat_map(|l| {
            let (w, b) = l.params();
            [w, b]
        })
    }

    pub fn param_slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.trunk
            .iter_mut()
            .chain(self.value.iter_mut())
            .chain(self.advantage.iter_mut())
            .flat_map(|l| {
                let (w, b) = l.params_mut();
                [w, b]
            })
    }

    /// Copies all parameters of `other`, which must have the same shape.
    pub fn copy_params_from(&mut self, other: &Network) {
        for (dst, src) in self.param_slices_mut().zip(other.param_slices()) {
            dst.copy_from_slice(src);
        }
    }

    pub fn params_finite(&self) -> bool {
        self.param_slices().flatten().all(|p| p.is_finite())
    }

    /// Draws a keep-mask for every dropout site.
    pub fn sample_masks(&self, rng: &mut SeededRng) -> DropoutMasks {
        let mut masks = vec![None; self.trunk.len()];
        if let Some(d) = &self.dropout {
            for (i, layer) in self.trunk.iter().enumerate() {
                if d.applies_to(i) {
                    let keep = 1.0 - d.rate;
                    masks[i] = Some(
                        (0..layer.in_dim())
                            .map(|_| rng.gen::<f64>() < keep)
                            .collect(),
                    );
                }
            }
        }
        DropoutMasks(masks)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::config(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn check_masks(&self, masks: &DropoutMasks) -> Result<()> {
        let ok = masks.0.len() == self.trunk.len()
            && self.trunk.iter().enumerate().all(|(i, layer)| {
                let wanted = self.dropout.as_ref().is_some_and(|d| d.applies_to(i));
                match &masks.0[i] {
                    Some(m) => wanted && m.len() == layer.in_dim(),
                    None => !wanted,
                }
            });
        if ok {
            Ok(())
        } else {
            Err(Error::config("dropout masks do not match the network"))
        }
    }

    /// Per-input multipliers at trunk layer `i` for this mode.
    fn input_scale(&self, i: usize, mode: &mut DropoutMode<'_>) -> Option<Vec<f64>> {
        let d = self.dropout.as_ref().filter(|d| d.applies_to(i))?;
        let n = self.trunk[i].in_dim();
        Some(match mode {
            DropoutMode::Deterministic => vec![1.0 - d.rate; n],
            DropoutMode::Stochastic(rng) => {
                let keep = 1.0 - d.rate;
                (0..n)
                    .map(|_| if rng.gen::<f64>() < keep { 1.0 } else { 0.0 })
                    .collect()
            }
            DropoutMode::Pinned(masks) => masks.0[i]
                .as_ref()
                .expect("masks checked against network")
                .iter()
                .map(|&k| if k { 1.0 } else { 0.0 })
                .collect(),
        })
    }

    fn validate_mode(&self, mode: &DropoutMode<'_>) -> Result<()> {
        match mode {
            DropoutMode::Deterministic => Ok(()),
            DropoutMode::Stochastic(_) if self.dropout.is_none() => Err(Error::config(
                "stochastic dropout requested on a network without dropout",
            )),
            DropoutMode::Stochastic(_) => Ok(()),
            DropoutMode::Pinned(m) => self.check_masks(m),
        }
    }

    /// Runs the trunk from layer `start` with input `h`.
    fn run_trunk(
        &self,
        start: usize,
        mut h: Vec<f64>,
        mode: &mut DropoutMode<'_>,
        trace: Option<&mut Trace>,
    ) -> Vec<f64> {
        let mut trace = trace;
        let mut z = Vec::new();
        for (i, layer) in self.trunk.iter().enumerate().skip(start) {
            let scale = self.input_scale(i, mode);
            if let Some(s) = &scale {
                for (hj, sj) in h.iter_mut().zip(s) {
                    *hj *= sj;
                }
            }
            layer.pre_activation(&h, &mut z);
            let act = layer.activation();
            let out: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
            if let Some(t) = trace.as_deref_mut() {
                t.input_scale.push(scale);
                t.trunk.push(LayerRecord {
                    input: std::mem::take(&mut h),
                    pre: z.clone(),
                });
            }
            h = out;
        }
        h
    }

    fn run_stream(
        layers: &[DenseLayer],
        mut h: Vec<f64>,
        mut records: Option<&mut Vec<LayerRecord>>,
    ) -> Vec<f64> {
        let mut z = Vec::new();
        for layer in layers {
            layer.pre_activation(&h, &mut z);
            let act = layer.activation();
            let out: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
            if let Some(r) = records.as_deref_mut() {
                r.push(LayerRecord {
                    input: std::mem::take(&mut h),
                    pre: z.clone(),
                });
            }
            h = out;
        }
        h
    }

    fn run_head(&self, features: Vec<f64>, trace: Option<&mut Trace>) -> Vec<f64> {
        if self.head != HeadKind::DuelingQValues {
            return features;
        }
        let (v, a) = match trace {
            Some(t) => (
                Self::run_stream(&self.value, features.clone(), Some(&mut t.value)),
                Self::run_stream(&self.advantage, features, Some(&mut t.advantage)),
            ),
            None => (
                Self::run_stream(&self.value, features.clone(), None),
                Self::run_stream(&self.advantage, features, None),
            ),
        };
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        a.iter().map(|&ai| v[0] + ai - mean).collect()
    }

    /// Head output (Q-values or logits) for one observation.
    pub fn forward(&self, x: &[f64], mut mode: DropoutMode<'_>) -> Result<Vec<f64>> {
        self.check_input(x)?;
        self.validate_mode(&mode)?;
        let features = self.run_trunk(0, x.to_vec(), &mut mode, None);
        Ok(self.run_head(features, None))
    }

    /// Deterministic forward without the result wrapper; panics on a
    /// dimension mismatch. For hot loops whose shapes are fixed at build time.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim(), "observation size mismatch");
        let features = self.run_trunk(0, x.to_vec(), &mut DropoutMode::Deterministic, None);
        self.run_head(features, None)
    }

    /// One output per mask set. Layers before the first dropout site do not
    /// depend on the mask, so they are evaluated once and shared.
    pub fn forward_many(&self, x: &[f64], masks: &[DropoutMasks]) -> Result<Vec<Vec<f64>>> {
        self.check_input(x)?;
        for m in masks {
            self.check_masks(m)?;
        }
        let first_site = self
            .dropout
            .as_ref()
            .and_then(|d| d.placement.iter().min().copied())
            .unwrap_or(self.trunk.len());
        let prefix = self.run_trunk_range(0, first_site, x.to_vec());
        Ok(masks
            .iter()
            .map(|m| {
                let mut mode = DropoutMode::Pinned(m);
                let features = self.run_trunk(first_site, prefix.clone(), &mut mode, None);
                self.run_head(features, None)
            })
            .collect())
    }

    fn run_trunk_range(&self, start: usize, end: usize, mut h: Vec<f64>) -> Vec<f64> {
        let mut z = Vec::new();
        for layer in &self.trunk[start..end] {
            layer.pre_activation(&h, &mut z);
            let act = layer.activation();
            h = z.iter().map(|&v| act.apply(v)).collect();
        }
        h
    }

    fn forward_traced(&self, x: &[f64], mode: &mut DropoutMode<'_>) -> Trace {
        let mut trace = Trace::default();
        let features = self.run_trunk(0, x.to_vec(), mode, Some(&mut trace));
        trace.output = self.run_head(features, Some(&mut trace));
        trace
    }

    fn backprop_stream(
        layers: &[DenseLayer],
        records: &[LayerRecord],
        grads: &mut [LayerGrad],
        mut d_out: Vec<f64>,
        need_input_grad: bool,
    ) -> Vec<f64> {
        for i in (0..layers.len()).rev() {
            let layer = &layers[i];
            let rec = &records[i];
            let act = layer.activation();
            let delta: Vec<f64> = d_out
                .iter()
                .zip(&rec.pre)
                .map(|(&d, &z)| d * act.derivative(z))
                .collect();
            if i > 0 || need_input_grad {
                let mut dx = vec![0.0; layer.in_dim()];
                layer.backward(&rec.input, &delta, &mut grads[i], Some(&mut dx));
                d_out = dx;
            } else {
                layer.backward(&rec.input, &delta, &mut grads[i], None);
                d_out = Vec::new();
            }
        }
        d_out
    }

    /// Accumulates `∂(d_out · output)/∂θ` for one traced sample.
    fn backprop(&self, trace: &Trace, d_out: &[f64], grads: &mut GradientSet) {
        let nt = self.trunk.len();
        let nv = self.value.len();
        let (trunk_g, rest) = grads.layers.split_at_mut(nt);
        let mut d_h = if self.head == HeadKind::DuelingQValues {
            let (value_g, adv_g) = rest.split_at_mut(nv);
            let n = d_out.len() as f64;
            let total: f64 = d_out.iter().sum();
            let d_adv: Vec<f64> = d_out.iter().map(|&g| g - total / n).collect();
            let dv = Self::backprop_stream(&self.value, &trace.value, value_g, vec![total], true);
            let da = Self::backprop_stream(&self.advantage, &trace.advantage, adv_g, d_adv, true);
            dv.iter().zip(&da).map(|(a, b)| a + b).collect()
        } else {
            d_out.to_vec()
        };
        for i in (0..nt).rev() {
            let layer = &self.trunk[i];
            let rec = &trace.trunk[i];
            let act = layer.activation();
            let delta: Vec<f64> = d_h
                .iter()
                .zip(&rec.pre)
                .map(|(&d, &z)| d * act.derivative(z))
                .collect();
            if i == 0 {
                layer.backward(&rec.input, &delta, &mut trunk_g[i], None);
            } else {
                let mut dx = vec![0.0; layer.in_dim()];
                layer.backward(&rec.input, &delta, &mut trunk_g[i], Some(&mut dx));
                if let Some(scale) = &trace.input_scale[i] {
                    for (g, s) in dx.iter_mut().zip(scale) {
                        *g *= s;
                    }
                }
                d_h = dx;
            }
        }
    }

    /// Mean negative log-likelihood of `actions` under the softmax of the
    /// logits, and its gradient. Each sample gets its own mask in
    /// [`DropoutMode::Stochastic`]; the gradient flows through that mask.
    pub fn nll_loss_and_grad(
        &self,
        batch: &[(&[f64], usize)],
        mut mode: DropoutMode<'_>,
    ) -> Result<(f64, GradientSet)> {
        if self.head != HeadKind::ActionLogits {
            return Err(Error::config("NLL loss needs an action-logits head"));
        }
        if batch.is_empty() {
            return Err(Error::config("empty batch"));
        }
        self.validate_mode(&mode)?;
        let n_actions = self.output_dim();
        let mut grads = GradientSet::zeros_like(self);
        let mut loss = 0.0;
        for &(x, a) in batch {
            self.check_input(x)?;
            if a >= n_actions {
                return Err(Error::config(format!(
                    "action {a} out of range for {n_actions} logits"
                )));
            }
            let trace = self.forward_traced(x, &mut mode);
            loss += log_sum_exp(&trace.output) - trace.output[a];
            let mut d = softmax(&trace.output);
            d[a] -= 1.0;
            self.backprop(&trace, &d, &mut grads);
        }
        let n = batch.len() as f64;
        grads.scale(1.0 / n);
        Ok((loss / n, grads))
    }

    /// Mean squared TD error `(Q(s,a) - y)²`; only the chosen action's
    /// Q-value receives gradient.
    pub fn td_loss_and_grad(&self, batch: &[(&[f64], usize, f64)]) -> Result<(f64, GradientSet)> {
        if self.head == HeadKind::ActionLogits {
            return Err(Error::config("TD loss needs a Q-value head"));
        }
        if batch.is_empty() {
            return Err(Error::config("empty batch"));
        }
        let n_actions = self.output_dim();
        let n = batch.len() as f64;
        let mut grads = GradientSet::zeros_like(self);
        let mut loss = 0.0;
        let mut mode = DropoutMode::Deterministic;
        for &(x, a, y) in batch {
            self.check_input(x)?;
            if a >= n_actions {
                return Err(Error::config(format!("action {a} out of range")));
            }
            let trace = self.forward_traced(x, &mut mode);
            let residual = trace.output[a] - y;
            loss += residual * residual;
            let mut d = vec![0.0; n_actions];
            d[a] = 2.0 * residual / n;
            self.backprop(&trace, &d, &mut grads);
        }
        Ok((loss / n, grads))
    }
}
