use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// A named parameter tensor (stored row-major) and its gradient slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Owner of every learnable parameter in a model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    blocks: Vec<ParamBlock>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize, values: Vec<f64>) -> ParamId {
        let name = name.into();
        assert_eq!(values.len(), rows * cols, "parameter {name}: value count does not match shape");
        assert!(self.id_of(&name).is_none(), "duplicate parameter name {name}");
        self.blocks.push(ParamBlock { name, rows, cols, grad: vec![0.0; values.len()], values });
        ParamId(self.blocks.len() - 1)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, rows, cols, vec![0.0; rows * cols])
    }

    /// Uniform in `[-1/√fan_in, 1/√fan_in]` where `fan_in = cols`.
    pub fn add_uniform<R: Rng>(&mut self, name: impl Into<String>, rows: usize, cols: usize, rng: &mut R) -> ParamId {
        let bound = 1.0 / (cols as f64).sqrt();
        let values = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
        self.add(name, rows, cols, values)
    }

    pub fn get(&self, id: ParamId) -> &ParamBlock {
        &self.blocks[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ParamBlock {
        &mut self.blocks[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.blocks.iter().position(|b| b.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.blocks.len()).map(ParamId)
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    /// Ids of blocks whose name starts with `prefix`.
    pub fn ids_with_prefix(&self, prefix: &str) -> Vec<ParamId> {
        self.ids().filter(|&id| self.get(id).name.starts_with(prefix)).collect()
    }

    pub fn zero_grad(&mut self) {
        for b in &mut self.blocks {
            b.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn zero_grad_of(&mut self, ids: &[ParamId]) {
        for &id in ids {
            self.blocks[id.0].grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    /// SHA-256 over names and the exact bit patterns of the selected blocks.
    pub fn checksum(&self, ids: &[ParamId]) -> String {
        let mut h = Sha256::new();
        for &id in ids {
            let b = self.get(id);
            h.update(b.name.as_bytes());
            for v in &b.values {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Copies values from `other` block-by-block; names and shapes must match.
    pub fn load_values_from(&mut self, other: &ParamStore) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::ShapeMismatch(format!("store has {} blocks, source has {}", self.len(), other.len())));
        }
        for (dst, src) in self.blocks.iter_mut().zip(&other.blocks) {
            if dst.name != src.name || dst.rows != src.rows || dst.cols != src.cols {
                return Err(Error::ShapeMismatch(format!(
                    "block {} ({}x{}) does not match {} ({}x{})",
                    dst.name, dst.rows, dst.cols, src.name, src.rows, src.cols
                )));
            }
            dst.values.copy_from_slice(&src.values);
        }
        Ok(())
    }
}
