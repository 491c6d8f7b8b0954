//! Multi-label BCE training of the network, dataset splitting and gradient checks.

mod config;
mod gradcheck;
mod loss;
mod optim;
mod split;
mod trainer;

pub use config::TrainConfig;
pub use gradcheck::{grad_check, relative_error, LayerKind, ALL_LAYER_KINDS};
pub use loss::{bce_loss, bce_sigmoid_grad, BCE_EPSILON};
pub use optim::{optimizer_step, OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use split::{split_dataset, Partition, Split, SplitSpec};
pub use trainer::{evaluate_loss, train, Labeled, TrainHistory};
