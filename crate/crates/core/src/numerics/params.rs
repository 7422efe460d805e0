use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Handle into a [`ParamSet`]. Ids are dense indices assigned in insertion
/// order, which also fixes the serialization and optimizer traversal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct ParamEntry {
    name: String,
    tensor: Tensor,
}

/// All learnable (and frozen) named tensors of a model.
///
/// Parameters are single-writer: forward passes read them, `backward`
/// results are accumulated into their grad slots between explicit zeroing,
/// and the optimizer mutates values in id order.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    entries: Vec<ParamEntry>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    /// Registers a tensor under a unique name. Trainability follows the
    /// tensor's `requires_grad` flag.
    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.entries.iter().any(|e| e.name == name) {
            return Err(Error::Usage(format!("duplicate parameter name {name:?}")));
        }
        self.entries.push(ParamEntry { name, tensor });
        Ok(ParamId(self.entries.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].tensor
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn id_by_name(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn accumulate_grad(&mut self, id: ParamId, g: &[f32]) {
        self.entries[id.0].tensor.accumulate_grad(g);
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.tensor.zero_grad();
        }
    }

    /// Scales every present gradient in place (used to turn an accumulated
    /// batch sum into a mean before the optimizer step).
    pub fn scale_grads(&mut self, c: f32) {
        for e in &mut self.entries {
            if let Some(g) = e.tensor.grad_mut() {
                for x in g {
                    *x *= c;
                }
            }
        }
    }

    /// Copies of all parameter values, in id order.
    pub fn snapshot(&self) -> Vec<Vec<f32>> {
        self.entries.iter().map(|e| e.tensor.data().to_vec()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Vec<f32>]) {
        assert_eq!(snapshot.len(), self.entries.len());
        for (e, s) in self.entries.iter_mut().zip(snapshot) {
            e.tensor.data_mut().copy_from_slice(s);
        }
    }
}
