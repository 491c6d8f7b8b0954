//! Skull CT fracture triage: a from-scratch convolutional feature extractor,
//! an ML-KNN multi-label classifier and the evaluation suite around them.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the single-precision types the pipeline runs on.

pub mod data;
pub mod error;
pub mod metrics;
pub mod mlknn;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use mlknn::{apply_threshold, fit_mlknn, MlknnConfig, MlknnModel, Prediction};
pub use nn::{Architecture, ModelParams};
pub use rng::Rng;
pub use scalar::Scalar;
pub use tensor::Tensor;

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type ModelParams32 = ModelParams<f32>;
pub type ModelParams64 = ModelParams<f64>;
pub type MlknnModel32 = MlknnModel<f32>;
pub type MlknnModel64 = MlknnModel<f64>;
