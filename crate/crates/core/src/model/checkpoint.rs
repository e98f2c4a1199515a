use std::path::Path;

use indexmap::IndexMap;

use super::config::ModelConfig;
use super::params::{build_model, ModelParams};
use crate::container::{Container, Kind};
use crate::data::{LabelVocab, MinMaxScaler};
use crate::error::{Error, Result};

/// A trained model with the preprocessing it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub scaler: MinMaxScaler,
    pub vocab: LabelVocab,
}

pub fn checkpoint_to_container(params: &ModelParams, scaler: &MinMaxScaler, vocab: &LabelVocab) -> Result<Container> {
    let cfg = serde_json::to_string(&params.config).map_err(|e| Error::Internal(e.to_string()))?;
    let mut c = Container::new(Kind::Checkpoint);
    c.insert_text("meta/model_config", vec![cfg]);
    c.insert_text("meta/label_vocab", vocab.names().to_vec());
    c.insert_tensor("scaler/min", &crate::Tensor::vector(scaler.min.clone())?);
    c.insert_tensor("scaler/max", &crate::Tensor::vector(scaler.max.clone())?);
    for n in params.named() {
        c.insert_tensor(format!("param/{}", n.name), n.tensor);
    }
    Ok(c)
}

pub fn save_checkpoint(params: &ModelParams, scaler: &MinMaxScaler, vocab: &LabelVocab, path: &Path) -> Result<()> {
    checkpoint_to_container(params, scaler, vocab)?.write(path)
}

/// The model configuration stored in a checkpoint container.
pub fn stored_config(c: &Container) -> Result<ModelConfig> {
    let text = c.text("meta/model_config")?;
    let json = text.first().ok_or_else(|| Error::Format("empty meta/model_config".into()))?;
    serde_json::from_str(json).map_err(|e| Error::Format(format!("meta/model_config: {e}")))
}

/// Rebuild against `cfg`; every stored tensor must match the shape `cfg`
/// implies.
pub fn checkpoint_from_container(c: &Container, cfg: &ModelConfig) -> Result<Checkpoint> {
    let vocab = LabelVocab::new(c.text("meta/label_vocab")?.to_vec())?;
    let scaler = MinMaxScaler {
        min: c.f64s("scaler/min")?.1.to_vec(),
        max: c.f64s("scaler/max")?.1.to_vec(),
    };
    if scaler.min.len() != scaler.max.len() {
        return Err(Error::Format("scaler bounds differ in length".into()));
    }
    let mut params = build_model(cfg, 0)?;
    let mut stored = IndexMap::new();
    for name in c.names().filter_map(|n| n.strip_prefix("param/")) {
        stored.insert(name.to_string(), c.tensor(&format!("param/{name}"))?);
    }
    params.assign_from(&stored)?;
    if vocab.len() != cfg.n_classes {
        return Err(Error::Shape(format!(
            "label vocabulary has {} classes, model has {}",
            vocab.len(),
            cfg.n_classes
        )));
    }
    Ok(Checkpoint { params, scaler, vocab })
}

/// Load using the configuration stored in the file.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let c = Container::read(path, Kind::Checkpoint)?;
    let cfg = stored_config(&c)?;
    checkpoint_from_container(&c, &cfg)
}

/// Load against an externally supplied configuration.
pub fn load_checkpoint_for(path: &Path, cfg: &ModelConfig) -> Result<Checkpoint> {
    checkpoint_from_container(&Container::read(path, Kind::Checkpoint)?, cfg)
}
