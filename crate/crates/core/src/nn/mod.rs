//! Dense feed-forward networks with hand-derived backprop, dropout and Adam.

mod checkpoint;
mod layer;
mod network;
mod optim;

pub use checkpoint::{network_from_str, network_to_string};
pub(crate) use checkpoint::{fmt_f64, read_network, Lines};
pub use layer::{Activation, DenseLayer, LayerGrad};
pub use network::{
    argmax, softmax, DropoutMasks, DropoutMode, DropoutSpec, GradientSet, HeadKind, Network,
};
pub use optim::{AdamConfig, OptimizerState};

#[cfg(test)]
mod tests;
