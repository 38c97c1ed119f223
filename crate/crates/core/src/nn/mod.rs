//! A small from-scratch CNN stack: tensors, layers with explicit backward
//! passes, Adam, and the hybrid U-net built from them.

mod adam;
mod gemm;
mod gradcheck;
mod layers;
mod network;
mod tensor;

pub use adam::{Adam, Moments};
pub use gradcheck::{gradient_check, BlockReport, GradCheckOptions, GradCheckReport};
pub use layers::{
    concat_channels, mse_loss, split_channels, BatchNorm2d, Conv2d, LayerKind, MaxPool2, Module,
    Param, Relu, Sequential, TConv2,
};
pub use network::{
    build_hybrid_network, quantum_features, ConvBlock, FrontEndKind, HybridNetwork, NetworkConfig,
    UNet, MAIN_WIDTHS,
};
pub use tensor::Tensor;
