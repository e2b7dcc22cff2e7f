use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Sparse feature vector with strictly increasing indices and non-zero
/// finite values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dimension: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn zeros(dimension: usize) -> SparseVector {
        SparseVector {
            dimension,
            entries: Vec::new(),
        }
    }

    /// Builds a vector from unordered `(index, value)` pairs. Repeated
    /// indices are summed and zeros dropped.
    ///
    /// Panics if an index is out of range or a value is not finite.
    pub fn from_pairs(dimension: usize, mut pairs: Vec<(usize, f64)>) -> SparseVector {
        pairs.sort_by_key(|&(i, _)| i);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            assert!(i < dimension, "index {i} out of range for dimension {dimension}");
            assert!(v.is_finite(), "non-finite value at index {i}");
            match entries.last_mut() {
                Some((j, acc)) if *j == i => *acc += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|&(_, v)| v != 0.0);
        SparseVector { dimension, entries }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(0.0, |p| self.entries[p].1)
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| dense[i] * v).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.entries.iter().map(|&(_, v)| v * v).sum())
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        let pairs = self.entries.iter().map(|&(i, v)| (i, v * factor)).collect();
        SparseVector::from_pairs(self.dimension, pairs)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dimension];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }
}
