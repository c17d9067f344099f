//! Layer primitives and fixed-topology networks with exact backward passes.

mod conv;
mod layers;
mod network;

pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvParams};
pub use layers::{concat_channels, relu_backward, relu_forward, split_channels};
pub use network::{
    init_params, network_backward, network_forward, network_infer, Activation, BranchSpec,
    ForwardTrace, Gradients, LayerSpec, ModelParams, NetworkSpec,
};
