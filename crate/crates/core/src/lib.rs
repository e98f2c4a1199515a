//! Botnet traffic classification with a 1D-CNN, BiLSTM and attention network
//! trained by explicit reverse-mode gradients.

pub mod container;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod recurrent;
pub mod rng;
pub mod tensor;
pub mod training;

pub use error::{Error, ErrorKind, Result};
pub use tensor::{Mode, Tensor};
