//! Double-precision network engine with hand-written backpropagation.

mod activation;
pub mod adam;
pub mod container;
pub mod gradcheck;
mod layer;
pub mod loss;
mod network;
pub mod ops;
mod tensor;
mod text_cnn;
mod train;

pub use activation::{sigmoid, Activation, SIGMOID_MARGIN};
pub use adam::{AdamConfig, AdamState};
pub use container::{network_from_container, network_to_container, ModelContainer, NamedArray};
pub use layer::{format_arch, parse_arch, Layer, LayerSpec};
pub use network::{Gradients, Input, InputShape, Network, Trace};
pub use tensor::Tensor;
pub use text_cnn::{text_cnn_arch, train_text_cnn, TextCnnModel, TextCnnShape};
pub use train::{train_network, EpochStats, TrainConfig};
