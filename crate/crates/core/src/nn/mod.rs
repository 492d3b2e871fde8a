//! Layer operations, network definition and parameter handling.

pub mod activation;
pub mod checkpoint;
pub mod config;
pub mod conv;
pub mod dense;
pub mod network;
pub mod params;
pub mod pool;
pub mod softmax;

pub use activation::{relu_backward, relu_forward};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use config::{LayerSpec, NetworkConfig};
pub use conv::{conv_backward, conv_forward, ConvGrads};
pub use dense::{dense_backward, dense_forward};
pub use network::{network_backward, network_forward, predict_proba, ForwardCache};
pub use params::{init_params, init_params_with_std, sgd_step, Gradients, LayerParams, Parameters};
pub use pool::{avgpool_backward, avgpool_forward, maxpool_backward, maxpool_forward, PoolIndices};
pub use softmax::{softmax, softmax_xent_backward, softmax_xent_forward};
