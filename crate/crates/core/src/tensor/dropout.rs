use rand::Rng;

use super::{Mode, Tensor};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

/// Inverted dropout with its own random stream. The most recent train-mode
/// mask is kept for the backward pass.
#[derive(Debug, Clone)]
pub struct DropoutState {
    rate: f64,
    seed: u64,
    rng: StreamRng,
    pub mask: Option<Tensor>,
}

impl DropoutState {
    pub fn new(rate: f64, seed: u64, stream: &str) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(DropoutState {
            rate,
            seed,
            rng: rng::stream(seed, stream),
            mask: None,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Inference mode, or a zero rate, returns `x` unchanged. Training mode draws
/// a Bernoulli(1 − rate) keep mask scaled by `1 / (1 − rate)`.
pub fn dropout(x: &Tensor, s: &mut DropoutState, mode: Mode) -> Tensor {
    if mode == Mode::Infer || s.rate == 0.0 {
        s.mask = None;
        return x.clone();
    }
    let scale = 1.0 / (1.0 - s.rate);
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if s.rng.gen::<f64>() >= s.rate { scale } else { 0.0 })
        .collect();
    let mask = Tensor::new(x.shape().to_vec(), mask).unwrap();
    let out = apply_mask(x, Some(&mask));
    s.mask = Some(mask);
    out
}

/// Multiply by a stored mask; `None` is the identity. Serves as both the
/// forward replay and the backward of dropout.
pub fn apply_mask(x: &Tensor, mask: Option<&Tensor>) -> Tensor {
    match mask {
        None => x.clone(),
        Some(m) => {
            let data = x.data().iter().zip(m.data()).map(|(a, b)| a * b).collect();
            Tensor::new(x.shape().to_vec(), data).unwrap()
        }
    }
}
