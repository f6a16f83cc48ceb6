use std::collections::BTreeMap;

use super::{Tape, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f32, beta2: f32, eps: f32 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub kind: OptimizerKind,
    pub lr: f32,
    /// Global-norm clipping threshold; `None` disables clipping.
    pub clip_norm: Option<f32>,
}

#[derive(Debug, Clone, PartialEq)]
struct Slot {
    tensor: Tensor,
    m: Vec<f32>,
    v: Vec<f32>,
}

/// Named trainable tensors plus their optimizer moments. Iteration is
/// sorted by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    slots: BTreeMap<String, Slot>,
    steps: u64,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, mut tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.slots.contains_key(&name) {
            return Err(Error::Contract(format!("duplicate parameter `{}`", name)));
        }
        tensor.set_requires_grad(true);
        let n = tensor.len();
        self.slots.insert(
            name,
            Slot {
                tensor,
                m: vec![0.0; n],
                v: vec![0.0; n],
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.slots
            .get(name)
            .map(|s| &s.tensor)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.slots
            .get_mut(name)
            .map(|s| &mut s.tensor)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    /// Replaces a parameter's values, keeping its shape.
    pub fn set_data(&mut self, name: &str, data: &[f32]) -> Result<()> {
        let t = self.get_mut(name)?;
        if t.len() != data.len() {
            return Err(Error::dim("set_data", format!("`{}` holds {} values, got {}", name, t.len(), data.len())));
        }
        t.data_mut().copy_from_slice(data);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.slots.iter().map(|(k, s)| (k.as_str(), &s.tensor))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.slots.values().map(|s| s.tensor.len()).sum()
    }

    /// Adds every parameter-leaf gradient recorded on `tape` into the store.
    pub fn accumulate_grads(&mut self, tape: &Tape) -> Result<()> {
        for (name, g) in tape.param_grads() {
            let t = self.get_mut(name)?;
            let dst = t.grad_mut().expect("stored parameters track gradients");
            for (a, &b) in dst.iter_mut().zip(g) {
                *a += b;
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for s in self.slots.values_mut() {
            s.tensor.zero_grad();
        }
    }

    /// Global L2 norm over every gradient buffer.
    pub fn grad_norm(&self) -> f32 {
        let sq: f64 = self
            .slots
            .values()
            .flat_map(|s| s.tensor.grad().unwrap_or(&[]).iter())
            .map(|&g| f64::from(g) * f64::from(g))
            .sum();
        sq.sqrt() as f32
    }

    /// Clips, applies one update and zeroes gradients. Returns the gradient
    /// norm measured before clipping.
    pub fn step(&mut self, settings: &OptimizerSettings) -> f32 {
        let norm = self.grad_norm();
        let scale = match settings.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        self.steps += 1;
        let t = self.steps as i32;
        for slot in self.slots.values_mut() {
            let Slot { tensor, m, v } = slot;
            let grad: Vec<f32> = tensor
                .grad()
                .expect("stored parameters track gradients")
                .iter()
                .map(|g| g * scale)
                .collect();
            let data = tensor.data_mut();
            match settings.kind {
                OptimizerKind::Sgd => {
                    for (p, g) in data.iter_mut().zip(&grad) {
                        *p -= settings.lr * g;
                    }
                }
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    for i in 0..data.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        data[i] -= settings.lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
            tensor.zero_grad();
        }
        norm
    }
}
