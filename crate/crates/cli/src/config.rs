//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use botnet_ids::model::{ConvBlockConfig, ModelConfig};
use botnet_ids::training::TrainConfig;
use botnet_ids::{Error, Result};

/// Everything a command can be configured with. `Default` is the published
/// setup.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data_dir: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub input_csv: Option<PathBuf>,
    pub output_csv: Option<PathBuf>,
    pub out: PathBuf,
    pub per_class: usize,
    pub test_fraction: f64,
    /// Seeds the split, the weight initialization and the training streams.
    pub seed: u64,
    pub devices: Vec<String>,
    pub format: String,
    /// Which dataset partition `eval` scores: `test` or `train`.
    pub split: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            data_dir: None,
            dataset: None,
            checkpoint: None,
            input_csv: None,
            output_csv: None,
            out: PathBuf::from("out"),
            per_class: 10_000,
            test_fraction: 0.2,
            seed: 42,
            devices: Vec::new(),
            format: "all".into(),
            split: "test".into(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key} = {value:?}: {e}")))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let m = &mut self.model;
        let t = &mut self.train;
        match key.trim() {
            "data_dir" => self.data_dir = path(v),
            "dataset" => self.dataset = path(v),
            "checkpoint" => self.checkpoint = path(v),
            "input_csv" => self.input_csv = path(v),
            "output_csv" => self.output_csv = path(v),
            "out" => self.out = PathBuf::from(v),
            "per_class" => self.per_class = parse("per_class", v)?,
            "test_fraction" => self.test_fraction = parse("test_fraction", v)?,
            "seed" => {
                self.seed = parse("seed", v)?;
                t.seed = self.seed;
            }
            "devices" => self.devices = list("devices", v)?,
            "format" => self.format = v.to_ascii_lowercase(),
            "split" => self.split = v.to_ascii_lowercase(),
            "input_len" => m.input_len = parse("input_len", v)?,
            "input_channels" => m.input_channels = parse("input_channels", v)?,
            "conv_filters" | "conv_kernels" => {
                let values: Vec<usize> = list(key, v)?;
                if values.len() != m.conv_blocks.len() {
                    m.conv_blocks.resize(values.len(), ConvBlockConfig { filters: 1, kernel: 1 });
                }
                for (b, x) in m.conv_blocks.iter_mut().zip(values) {
                    if key.trim() == "conv_filters" {
                        b.filters = x;
                    } else {
                        b.kernel = x;
                    }
                }
            }
            "padding" => m.padding = parse("padding", v)?,
            "pool_size" => m.pool_size = parse("pool_size", v)?,
            "pool_stride" => m.pool_stride = parse("pool_stride", v)?,
            "conv_dropout" => m.conv_dropout = parse("conv_dropout", v)?,
            "lstm_hidden" => m.lstm_hidden = parse("lstm_hidden", v)?,
            "attention_dk" => m.attention_dk = parse("attention_dk", v)?,
            "dense_units" => m.dense_units = list("dense_units", v)?,
            "dense_dropout" => m.dense_dropout = parse("dense_dropout", v)?,
            "n_classes" => m.n_classes = parse("n_classes", v)?,
            "activation" => m.activation = parse("activation", v)?,
            "bn_before_activation" => m.bn_before_activation = parse("bn_before_activation", v)?,
            "bn_momentum" => m.bn_momentum = parse("bn_momentum", v)?,
            "bn_epsilon" => m.bn_epsilon = parse("bn_epsilon", v)?,
            "batch_size" => t.batch_size = parse("batch_size", v)?,
            "epochs" => t.epochs = parse("epochs", v)?,
            "patience" => t.early_stop_patience = parse("patience", v)?,
            "min_delta" => t.min_delta = parse("min_delta", v)?,
            "shuffle" => t.shuffle = parse("shuffle", v)?,
            "validation_fraction" => t.validation_fraction = parse("validation_fraction", v)?,
            "learning_rate" => t.learning_rate = parse("learning_rate", v)?,
            "eval_batch_size" => t.eval_batch_size = parse("eval_batch_size", v)?,
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Apply `key = value` lines; blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {line:?}", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, file: &Path) -> Result<()> {
        let text = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
        self.apply_text(&text)
    }

    /// Every key with its current value, in a fixed order that
    /// [`RunConfig::apply_text`] reads back to an equal config.
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let t = &self.train;
        let pairs: Vec<(&str, String)> = vec![
            ("data_dir", show(&self.data_dir)),
            ("dataset", show(&self.dataset)),
            ("checkpoint", show(&self.checkpoint)),
            ("input_csv", show(&self.input_csv)),
            ("output_csv", show(&self.output_csv)),
            ("out", self.out.display().to_string()),
            ("per_class", self.per_class.to_string()),
            ("test_fraction", self.test_fraction.to_string()),
            ("seed", self.seed.to_string()),
            ("devices", self.devices.join(",")),
            ("format", self.format.clone()),
            ("split", self.split.clone()),
            ("input_len", m.input_len.to_string()),
            ("input_channels", m.input_channels.to_string()),
            ("conv_filters", join(m.conv_blocks.iter().map(|b| b.filters))),
            ("conv_kernels", join(m.conv_blocks.iter().map(|b| b.kernel))),
            ("padding", m.padding.to_string()),
            ("pool_size", m.pool_size.to_string()),
            ("pool_stride", m.pool_stride.to_string()),
            ("conv_dropout", m.conv_dropout.to_string()),
            ("lstm_hidden", m.lstm_hidden.to_string()),
            ("attention_dk", m.attention_dk.to_string()),
            ("dense_units", join(&m.dense_units)),
            ("dense_dropout", m.dense_dropout.to_string()),
            ("n_classes", m.n_classes.to_string()),
            ("activation", m.activation.to_string()),
            ("bn_before_activation", m.bn_before_activation.to_string()),
            ("bn_momentum", m.bn_momentum.to_string()),
            ("bn_epsilon", m.bn_epsilon.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("epochs", t.epochs.to_string()),
            ("patience", t.early_stop_patience.to_string()),
            ("min_delta", t.min_delta.to_string()),
            ("shuffle", t.shuffle.to_string()),
            ("validation_fraction", t.validation_fraction.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("eval_batch_size", t.eval_batch_size.to_string()),
        ];
        let mut out = String::from("# resolved run configuration\n");
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Defaults, then `file`, then `overrides` in order.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(f) = file {
            cfg.apply_file(f)?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("epochs = 3\nconv_filters = 4, 8\nconv_kernels = 3,3\ndense_units=16\n# note\nseed=9").unwrap();
        assert_eq!(cfg.model.conv_blocks, vec![ConvBlockConfig { filters: 4, kernel: 3 }, ConvBlockConfig { filters: 8, kernel: 3 }]);
        assert_eq!(cfg.train.seed, 9);
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(RunConfig::default().to_text().lines().count(), 38);
    }

    #[test]
    fn unknown_key_is_config_error() {
        let err = RunConfig::default().apply_text("epoch = 3").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
