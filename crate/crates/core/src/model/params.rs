//! Named parameter groups with deterministic initialization, plus the
//! glue that binds them onto a tape and collects their gradients.

use super::tape::{Tape, TensorId};
use super::ModelError;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    groups: Vec<ParamGroup>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, rows: usize, cols: usize, data: Vec<f64>) {
        assert_eq!(data.len(), rows * cols, "bad shape for {name}");
        assert!(!self.index.contains_key(name), "duplicate group {name}");
        self.index.insert(name.to_string(), self.groups.len());
        self.groups.push(ParamGroup { name: name.to_string(), rows, cols, data });
    }

    /// Kaiming-uniform weight matrix: U(-b, b) with b = sqrt(6 / fan_in).
    pub fn add_kaiming(&mut self, name: &str, rows: usize, cols: usize, rng: &mut ChaCha8Rng) {
        let bound = (6.0 / rows as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
        self.add(name, rows, cols, data);
    }

    pub fn add_zeros(&mut self, name: &str, rows: usize, cols: usize) {
        self.add(name, rows, cols, vec![0.0; rows * cols]);
    }

    pub fn add_ones(&mut self, name: &str, rows: usize, cols: usize) {
        self.add(name, rows, cols, vec![1.0; rows * cols]);
    }

    pub fn get(&self, name: &str) -> Result<&ParamGroup, ModelError> {
        self.index
            .get(name)
            .map(|&i| &self.groups[i])
            .ok_or_else(|| ModelError::UnknownParam(name.to_string()))
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn groups_mut(&mut self) -> &mut [ParamGroup] {
        &mut self.groups
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn total_len(&self) -> usize {
        self.groups.iter().map(|g| g.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.groups.iter().all(|g| g.data.iter().all(|v| v.is_finite()))
    }

    /// Register every group as a gradient-carrying leaf on the tape.
    pub fn bind<'a>(&'a self, tape: &mut Tape) -> BoundParams<'a> {
        let ids = self.groups.iter().map(|g| tape.leaf(g.rows, g.cols, &g.data)).collect();
        BoundParams { set: self, ids }
    }
}

/// Tape leaves for one `ParamSet`, aligned with its group order.
pub struct BoundParams<'a> {
    set: &'a ParamSet,
    ids: Vec<TensorId>,
}

impl<'a> BoundParams<'a> {
    pub fn id(&self, name: &str) -> TensorId {
        let i = *self
            .set
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter group '{name}'"));
        self.ids[i]
    }

    pub fn set(&self) -> &'a ParamSet {
        self.set
    }

    /// Gradients per group, in group order. Call after `tape.backward`.
    pub fn collect_grads(&self, tape: &Tape) -> Vec<Vec<f64>> {
        self.ids.iter().map(|&id| tape.grad(id).to_vec()).collect()
    }

    /// Push current group values back onto the tape leaves (before replay).
    pub fn refresh(&self, tape: &mut Tape) {
        for (g, &id) in self.set.groups.iter().zip(&self.ids) {
            tape.set_leaf_value(id, &g.data);
        }
    }
}
