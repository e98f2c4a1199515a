use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::model::{Gradients, ModelParams};
use crate::tensor::Tensor;

/// Bias-corrected Adam with per-tensor first and second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Completed steps.
    pub t: u64,
    moments: IndexMap<String, (Vec<f64>, Vec<f64>)>,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(0.001)
    }
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            moments: IndexMap::new(),
        }
    }

    /// First and second moment of a parameter, once it has been stepped.
    pub fn moments(&self, name: &str) -> Option<(&[f64], &[f64])> {
        self.moments.get(name).map(|(m, v)| (m.as_slice(), v.as_slice()))
    }

    /// One update of every `(name, tensor)` slot from the gradient of the
    /// same name. All gradients are checked before anything is modified.
    pub fn step_slots<'a>(
        &mut self,
        slots: impl IntoIterator<Item = (String, &'a mut Tensor)>,
        grads: &Gradients,
    ) -> Result<()> {
        let slots: Vec<(String, &mut Tensor)> = slots.into_iter().collect();
        for (name, p) in &slots {
            let g = grads.get(name).ok_or_else(|| Error::Key(format!("no gradient for parameter {name}")))?;
            if g.shape() != p.shape() {
                return Err(Error::Dimension { op: "adam_step", lhs: p.shape().to_vec(), rhs: g.shape().to_vec() });
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.epsilon);
        for (name, p) in slots {
            let g = grads.get(&name).unwrap().data();
            let (m, v) = self
                .moments
                .entry(name)
                .or_insert_with(|| (vec![0.0; g.len()], vec![0.0; g.len()]));
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                *w -= lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
            }
        }
        Ok(())
    }

    /// Update every trainable tensor of `params`.
    pub fn step(&mut self, params: &mut ModelParams, grads: &Gradients) -> Result<()> {
        let slots = params
            .named_mut()
            .into_iter()
            .filter(|n| n.trainable)
            .map(|n| (n.name, n.tensor));
        self.step_slots(slots, grads)
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step(params: &mut ModelParams, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    state.step(params, grads)
}
