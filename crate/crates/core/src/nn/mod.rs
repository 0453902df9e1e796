//! Tensor layers and the conv/dense network built from them.

pub mod layers;
pub mod network;
pub mod params;
pub mod spec;

pub use network::{backward, forward, predict_one, ForwardTrace};
pub use params::{init_params, LayerKind, LayerParams, ParamSet};
pub use spec::{ConvBlock, Head, NetworkSpec};
