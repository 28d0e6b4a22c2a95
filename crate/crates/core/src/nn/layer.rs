use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// A fully connected layer `y = f(W x + b)`.
///
/// `W` is conceptually `out_dim × in_dim`. It is stored input-major
/// (`weights[j * out_dim + i]` is the weight from input `j` to output `i`) so
/// that both the forward pass and the weight gradient are contiguous
/// `axpy`s over the output dimension, and zero inputs can be skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseLayer {
    /// Glorot-uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        Self {
            in_dim,
            out_dim,
            activation,
            weights,
            bias: vec![0.0; out_dim],
        }
    }

    /// Builds a layer from an `out_dim × in_dim` row-major weight matrix.
    pub fn from_rows(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rows: &[f64],
        bias: Vec<f64>,
    ) -> Result<Self> {
        if rows.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::config(format!(
                "layer {in_dim}->{out_dim}: got {} weights and {} biases",
                rows.len(),
                bias.len()
            )));
        }
        let mut weights = vec![0.0; in_dim * out_dim];
        for i in 0..out_dim {
            for j in 0..in_dim {
                weights[j * out_dim + i] = rows[i * in_dim + j];
            }
        }
        Ok(Self {
            in_dim,
            out_dim,
            activation,
            weights,
            bias,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Weight from input `j` to output `i`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[j * self.out_dim + i]
    }

    /// Weights as an `out_dim × in_dim` row-major matrix.
    pub fn weight_rows(&self) -> Vec<f64> {
        let mut rows = vec![0.0; self.in_dim * self.out_dim];
        for j in 0..self.in_dim {
            for i in 0..self.out_dim {
                rows[i * self.in_dim + j] = self.weights[j * self.out_dim + i];
            }
        }
        rows
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.weights, &mut self.bias)
    }

    pub(crate) fn params(&self) -> (&[f64], &[f64]) {
        (&self.weights, &self.bias)
    }

    /// Pre-activation `W x + b` into `z`.
    pub(crate) fn pre_activation(&self, x: &[f64], z: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.in_dim);
        z.clear();
        z.extend_from_slice(&self.bias);
        let out = self.out_dim;
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let col = &self.weights[j * out..(j + 1) * out];
            for (zi, &w) in z.iter_mut().zip(col) {
                *zi += w * xj;
            }
        }
    }

    /// Accumulates parameter gradients for one sample and, when `dx` is
    /// given, writes `Wᵀ δ` into it.
    pub(crate) fn backward(
        &self,
        x: &[f64],
        delta: &[f64],
        grad: &mut LayerGrad,
        dx: Option<&mut [f64]>,
    ) {
        let out = self.out_dim;
        for (b, &d) in grad.bias.iter_mut().zip(delta) {
            *b += d;
        }
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let g = &mut grad.weights[j * out..(j + 1) * out];
            for (gi, &d) in g.iter_mut().zip(delta) {
                *gi += d * xj;
            }
        }
        if let Some(dx) = dx {
            for (j, dxj) in dx.iter_mut().enumerate() {
                let col = &self.weights[j * out..(j + 1) * out];
                *dxj = col.iter().zip(delta).map(|(w, d)| w * d).sum();
            }
        }
    }
}

/// Gradient of one layer, in the layer's own storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerGrad {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        Self {
            weights: vec![0.0; layer.weights.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }
}
