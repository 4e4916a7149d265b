//! A small neural-network engine with manual backpropagation.
//!
//! Tensors are `f64` throughout. A [`Network`] is a chain of [`LayerSpec`]s
//! where `Concat` nodes may reach back to one earlier node, which is enough
//! for dense stacks and a one-level UNet. Training minimizes cross-entropy
//! with Adam; [`grad_check`] compares backprop against central differences.

mod arch;
mod gradcheck;
mod layers;
mod network;
mod optim;
pub mod serialize;
mod tensor;

pub use arch::{
    build_feedforward, build_feedforward_with, build_unet, build_unet_with, output_layer,
};
pub use gradcheck::grad_check;
pub use layers::{Activation, LayerSpec, Regularizer, KERNEL, POOL};
pub use network::{cross_entropy, labels_from_probs, Gradients, Layer, Network, PROB_CLAMP};
pub use optim::{adam_step, train, AdamConfig, AdamState, EpochRecord, TrainConfig};
pub use tensor::Tensor;
