use indexmap::IndexMap;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::recurrent::{AttentionParams, LstmParams};
use crate::rng;
use crate::tensor::{glorot_uniform, BatchNormParams, ConvParams, DenseParams, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    pub conv: ConvParams,
    pub bn: BatchNormParams,
}

/// Every tensor of the network, plus the configuration that fixes their
/// shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub blocks: Vec<ConvBlock>,
    pub bilstm: LstmParams,
    pub attention: AttentionParams,
    pub dense: Vec<DenseParams>,
    pub head: DenseParams,
}

/// A named view of one parameter tensor.
pub struct NamedTensor<'a> {
    pub name: String,
    pub tensor: &'a Tensor,
    /// False for batch-norm running statistics.
    pub trainable: bool,
}

pub struct NamedTensorMut<'a> {
    pub name: String,
    pub tensor: &'a mut Tensor,
    pub trainable: bool,
}

/// Gradients keyed by parameter name, in parameter order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    map: IndexMap<String, Tensor>,
}

impl Gradients {
    pub fn insert(&mut self, name: impl Into<String>, grad: Tensor) {
        self.map.insert(name.into(), grad);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.map.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Largest absolute entry over all tensors.
    pub fn max_abs(&self) -> f64 {
        self.map
            .values()
            .flat_map(|t| t.data().iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn dense_init(n_in: usize, n_out: usize, rng: &mut impl rand::Rng) -> DenseParams {
    DenseParams {
        weight: glorot_uniform(&[n_in, n_out], n_in, n_out, rng),
        bias: Tensor::zeros(&[n_out]),
    }
}

/// Fresh parameters for `cfg`. Weight matrices are Glorot-uniform, biases
/// zero (LSTM forget gate 1), batch-norm at identity. Deterministic in `seed`.
pub fn build_model(cfg: &ModelConfig, seed: u64) -> Result<ModelParams> {
    cfg.validate()?;
    let mut r = rng::stream(seed, "init");
    let mut blocks = Vec::with_capacity(cfg.conv_blocks.len());
    let mut in_ch = cfg.input_channels;
    for b in &cfg.conv_blocks {
        let kernels = glorot_uniform(&[b.filters, in_ch, b.kernel], in_ch * b.kernel, b.filters * b.kernel, &mut r);
        let conv = ConvParams::new(kernels, Tensor::zeros(&[b.filters]), 1, cfg.padding)?;
        let mut bn = BatchNormParams::new(b.filters);
        bn.momentum = cfg.bn_momentum;
        bn.epsilon = cfg.bn_epsilon;
        blocks.push(ConvBlock { conv, bn });
        in_ch = b.filters;
    }
    let bilstm = LstmParams::init(in_ch, cfg.lstm_hidden, &mut r);
    let attention = AttentionParams::init(2 * cfg.lstm_hidden, cfg.attention_dk, &mut r);
    let mut dense = Vec::with_capacity(cfg.dense_units.len());
    let mut width = 2 * cfg.lstm_hidden;
    for &units in &cfg.dense_units {
        dense.push(dense_init(width, units, &mut r));
        width = units;
    }
    let head = dense_init(width, cfg.n_classes, &mut r);
    Ok(ModelParams {
        config: cfg.clone(),
        blocks,
        bilstm,
        attention,
        dense,
        head,
    })
}

impl ModelParams {
    pub fn named(&self) -> Vec<NamedTensor<'_>> {
        let mut v: Vec<NamedTensor<'_>> = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let n = i + 1;
            v.push(NamedTensor { name: format!("conv{n}.kernel"), tensor: &b.conv.kernels, trainable: true });
            v.push(NamedTensor { name: format!("conv{n}.bias"), tensor: &b.conv.bias, trainable: true });
            v.push(NamedTensor { name: format!("bn{n}.gamma"), tensor: &b.bn.gamma, trainable: true });
            v.push(NamedTensor { name: format!("bn{n}.beta"), tensor: &b.bn.beta, trainable: true });
            v.push(NamedTensor { name: format!("bn{n}.running_mean"), tensor: &b.bn.running_mean, trainable: false });
            v.push(NamedTensor { name: format!("bn{n}.running_var"), tensor: &b.bn.running_var, trainable: false });
            v.push(NamedTensor { name: format!("bn{n}.updates"), tensor: &b.bn.updates, trainable: false });
        }
        for (dir, p) in [("forward", &self.bilstm.forward), ("backward", &self.bilstm.backward)] {
            v.push(NamedTensor { name: format!("bilstm.{dir}.w_x"), tensor: &p.w_x, trainable: true });
            v.push(NamedTensor { name: format!("bilstm.{dir}.w_h"), tensor: &p.w_h, trainable: true });
            v.push(NamedTensor { name: format!("bilstm.{dir}.b"), tensor: &p.b, trainable: true });
        }
        v.push(NamedTensor { name: "attention.w_a".into(), tensor: &self.attention.w_a, trainable: true });
        v.push(NamedTensor { name: "attention.q".into(), tensor: &self.attention.q, trainable: true });
        for (i, d) in self.dense.iter().enumerate() {
            let n = i + 1;
            v.push(NamedTensor { name: format!("dense{n}.weight"), tensor: &d.weight, trainable: true });
            v.push(NamedTensor { name: format!("dense{n}.bias"), tensor: &d.bias, trainable: true });
        }
        v.push(NamedTensor { name: "head.weight".into(), tensor: &self.head.weight, trainable: true });
        v.push(NamedTensor { name: "head.bias".into(), tensor: &self.head.bias, trainable: true });
        v
    }

    pub fn named_mut(&mut self) -> Vec<NamedTensorMut<'_>> {
        let mut v: Vec<NamedTensorMut<'_>> = Vec::new();
        for (i, b) in self.blocks.iter_mut().enumerate() {
            let n = i + 1;
            v.push(NamedTensorMut { name: format!("conv{n}.kernel"), tensor: &mut b.conv.kernels, trainable: true });
            v.push(NamedTensorMut { name: format!("conv{n}.bias"), tensor: &mut b.conv.bias, trainable: true });
            v.push(NamedTensorMut { name: format!("bn{n}.gamma"), tensor: &mut b.bn.gamma, trainable: true });
            v.push(NamedTensorMut { name: format!("bn{n}.beta"), tensor: &mut b.bn.beta, trainable: true });
            v.push(NamedTensorMut { name: format!("bn{n}.running_mean"), tensor: &mut b.bn.running_mean, trainable: false });
            v.push(NamedTensorMut { name: format!("bn{n}.running_var"), tensor: &mut b.bn.running_var, trainable: false });
            v.push(NamedTensorMut { name: format!("bn{n}.updates"), tensor: &mut b.bn.updates, trainable: false });
        }
        for (dir, p) in [("forward", &mut self.bilstm.forward), ("backward", &mut self.bilstm.backward)] {
            v.push(NamedTensorMut { name: format!("bilstm.{dir}.w_x"), tensor: &mut p.w_x, trainable: true });
            v.push(NamedTensorMut { name: format!("bilstm.{dir}.w_h"), tensor: &mut p.w_h, trainable: true });
            v.push(NamedTensorMut { name: format!("bilstm.{dir}.b"), tensor: &mut p.b, trainable: true });
        }
        v.push(NamedTensorMut { name: "attention.w_a".into(), tensor: &mut self.attention.w_a, trainable: true });
        v.push(NamedTensorMut { name: "attention.q".into(), tensor: &mut self.attention.q, trainable: true });
        for (i, d) in self.dense.iter_mut().enumerate() {
            let n = i + 1;
            v.push(NamedTensorMut { name: format!("dense{n}.weight"), tensor: &mut d.weight, trainable: true });
            v.push(NamedTensorMut { name: format!("dense{n}.bias"), tensor: &mut d.bias, trainable: true });
        }
        v.push(NamedTensorMut { name: "head.weight".into(), tensor: &mut self.head.weight, trainable: true });
        v.push(NamedTensorMut { name: "head.bias".into(), tensor: &mut self.head.bias, trainable: true });
        v
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.named().into_iter().find(|n| n.name == name).map(|n| n.tensor)
    }

    /// Number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.named().iter().filter(|n| n.trainable).map(|n| n.tensor.len()).sum()
    }

    /// Replace every tensor from `source` by name, requiring identical shapes.
    pub fn assign_from(&mut self, source: &IndexMap<String, Tensor>) -> Result<()> {
        for slot in self.named_mut() {
            let t = source
                .get(&slot.name)
                .ok_or_else(|| Error::Key(format!("no tensor named {}", slot.name)))?;
            if t.shape() != slot.tensor.shape() {
                return Err(Error::Shape(format!(
                    "tensor {} has shape {:?}, configuration expects {:?}",
                    slot.name,
                    t.shape(),
                    slot.tensor.shape()
                )));
            }
            *slot.tensor = t.clone();
        }
        Ok(())
    }
}
