//! The convolutional, recurrent and attention stack as one network.

mod checkpoint;
mod config;
mod forward;
mod params;

pub use checkpoint::{
    checkpoint_from_container, checkpoint_to_container, load_checkpoint, load_checkpoint_for, save_checkpoint,
    stored_config, Checkpoint,
};
pub use config::{ConvBlockConfig, ModelConfig};
pub use forward::{model_backward, model_backward_from_logits, model_forward, Dropouts, ForwardCache};
pub use params::{build_model, ConvBlock, Gradients, ModelParams, NamedTensor, NamedTensorMut};
