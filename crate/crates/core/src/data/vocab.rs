use std::collections::HashMap;

use crate::error::{Error, Result};

/// The ten traffic classes in model output order.
pub const NBAIOT_CLASSES: [&str; 10] = [
    "benign",
    "gafgyt_combo",
    "gafgyt_junk",
    "gafgyt_scan",
    "gafgyt_udp",
    "mirai_ack",
    "mirai_scan",
    "mirai_syn",
    "mirai_udp",
    "mirai_udpplain",
];

/// Bijective map between class names and ids `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVocab {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelVocab {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Config("label vocabulary is empty".into()));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || index.insert(n.clone(), i).is_some() {
                return Err(Error::Config(format!("label {n:?} is empty or repeated")));
            }
        }
        Ok(LabelVocab { names, index })
    }

    pub fn nbaiot() -> Self {
        Self::new(NBAIOT_CLASSES.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl Default for LabelVocab {
    fn default() -> Self {
        Self::nbaiot()
    }
}
