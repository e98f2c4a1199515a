use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{pooled_len, Activation, Padding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBlockConfig {
    pub filters: usize,
    pub kernel: usize,
}

/// Layer sizes and regularization of the network. `Default` is the published
/// configuration: three conv blocks (128×5, 256×3, 128×3), a 128-unit
/// BiLSTM, 256-wide attention keys, dense 256 and 128, ten classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_len: usize,
    pub input_channels: usize,
    pub conv_blocks: Vec<ConvBlockConfig>,
    pub padding: Padding,
    pub pool_size: usize,
    pub pool_stride: usize,
    pub conv_dropout: f64,
    pub lstm_hidden: usize,
    pub attention_dk: usize,
    pub dense_units: Vec<usize>,
    pub dense_dropout: f64,
    pub n_classes: usize,
    pub activation: Activation,
    /// Apply batch normalization before the activation instead of after it.
    pub bn_before_activation: bool,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_len: 115,
            input_channels: 1,
            conv_blocks: vec![
                ConvBlockConfig { filters: 128, kernel: 5 },
                ConvBlockConfig { filters: 256, kernel: 3 },
                ConvBlockConfig { filters: 128, kernel: 3 },
            ],
            padding: Padding::Same,
            pool_size: 2,
            pool_stride: 2,
            conv_dropout: 0.3,
            lstm_hidden: 128,
            attention_dk: 256,
            dense_units: vec![256, 128],
            dense_dropout: 0.4,
            n_classes: 10,
            activation: Activation::Relu,
            bn_before_activation: false,
            bn_momentum: crate::tensor::DEFAULT_BN_MOMENTUM,
            bn_epsilon: crate::tensor::DEFAULT_BN_EPSILON,
        }
    }
}

impl ModelConfig {
    /// Sequence length entering each block followed by the length after each
    /// block's pooling; the last entry is the BiLSTM step count. Zero marks a
    /// stage the input cannot survive.
    pub fn derived_lengths(&self) -> Vec<usize> {
        let mut lens = vec![self.input_len];
        let mut len = self.input_len;
        for b in &self.conv_blocks {
            let conv_len = match self.padding {
                Padding::Same => len,
                Padding::Valid => (len + 1).saturating_sub(b.kernel),
            };
            len = if conv_len >= self.pool_size && self.pool_size > 0 && self.pool_stride > 0 {
                pooled_len(conv_len, self.pool_size, self.pool_stride)
            } else {
                0
            };
            lens.push(len);
        }
        lens
    }

    pub fn sequence_len(&self) -> usize {
        *self.derived_lengths().last().unwrap()
    }

    pub fn conv_out_channels(&self) -> usize {
        self.conv_blocks.last().map_or(self.input_channels, |b| b.filters)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_len", self.input_len),
            ("input_channels", self.input_channels),
            ("pool_size", self.pool_size),
            ("pool_stride", self.pool_stride),
            ("lstm_hidden", self.lstm_hidden),
            ("attention_dk", self.attention_dk),
            ("n_classes", self.n_classes),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.conv_blocks.iter().any(|b| b.filters == 0 || b.kernel == 0) || self.dense_units.contains(&0) {
            return Err(Error::Config("layer widths and kernel sizes must be positive".into()));
        }
        for (name, rate) in [("conv_dropout", self.conv_dropout), ("dense_dropout", self.dense_dropout)] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Config(format!("{name} {rate} outside [0, 1)")));
            }
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum < 1.0) || self.bn_epsilon <= 0.0 {
            return Err(Error::Config("bn_momentum must lie in (0,1) and bn_epsilon be positive".into()));
        }
        let lens = self.derived_lengths();
        if lens.contains(&0) {
            return Err(Error::Config(format!(
                "sequence vanishes during pooling; derived lengths {lens:?}"
            )));
        }
        Ok(())
    }
}
