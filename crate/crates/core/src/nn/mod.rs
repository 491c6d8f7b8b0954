//! The baseline convolutional network: layers, architecture and feature extraction.

mod layers;
mod model;

pub use layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_logits, dense_sigmoid_head, flatten,
    leaky_relu, leaky_relu_backward, maxpool2_backward, maxpool2_forward, sigmoid, ConvGrads,
    ConvLayer, DenseGrads, DenseLayer, PoolIndex,
};
pub use model::{
    build_extractor, count_params, extract_features, Architecture, ForwardCache, Gradients,
    ModelParams, DEFAULT_LEAKY_SLOPE,
};
