use rand::Rng;

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    name: String,
    value: Tensor,
    grad: Vec<f64>,
}

/// Named trainable parameters and their accumulated gradients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<Entry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let grad = vec![0.0; value.len()];
        self.entries.push(Entry {
            name: name.into(),
            value,
            grad,
        });
        ParamId(self.entries.len() - 1)
    }

    /// Glorot/Xavier uniform in `±sqrt(6 / (fan_in + fan_out))`. A 1-D
    /// shape uses its length for both fans unless `fans` is given.
    pub fn add_glorot<R: Rng>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fans: Option<(usize, usize)>,
        rng: &mut R,
    ) -> ParamId {
        let (fan_in, fan_out) = fans.unwrap_or(match shape {
            [n] => (*n, *n),
            [rows, cols] => (*cols, *rows),
            _ => (shape.iter().product(), shape.iter().product()),
        });
        let limit = glorot_limit(fan_in, fan_out);
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-limit..=limit)).collect();
        self.add(name, Tensor::new(shape.to_vec(), data).expect("shape product"))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.entries[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.entries[id.0].grad
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn total_values(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// Copy all values from `other`, which must have the same layout.
    pub fn load_values(&mut self, other: &ParamStore) -> Result<()> {
        if other.entries.len() != self.entries.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                self.entries.len(),
                other.entries.len()
            )));
        }
        for (dst, src) in self.entries.iter_mut().zip(&other.entries) {
            if dst.name != src.name || dst.value.shape() != src.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {} {:?} does not match {} {:?}",
                    dst.name,
                    dst.value.shape(),
                    src.name,
                    src.value.shape()
                )));
            }
            dst.value = src.value.clone();
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|e| (e.name.as_str(), &e.value))
    }
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
