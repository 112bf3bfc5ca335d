//! Small convolutional networks in `f64`: layers, training and storage.

mod io;
mod layers;
mod network;
mod tensor;
mod train;

use thiserror::Error;

pub use io::{from_bytes, load_network, save_network, to_bytes, MAGIC, VERSION};
pub use layers::{layer_backward, layer_forward, LayerSpec};
pub use network::{
    build_occupancy_net, build_piece_net, cross_entropy, image_to_input, Gradients, Network, Scope, MIN_PROBABILITY,
    OCCUPANCY_INPUT, PIECE_INPUT,
};
pub use tensor::Tensor;
pub use train::{
    accuracy, adam_step, argmax, predict, train, train_augmented, AdamState, Augment, TrainRegimen, TrainStage,
    GRADIENT_CHUNK,
};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("training regimen needs at least one stage and a positive batch size")]
    Regimen,
    #[error("model file is truncated")]
    Truncated,
    #[error("model checksum mismatch")]
    Checksum,
    #[error("model format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
