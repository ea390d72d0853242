//! Column-wise sparse storage for LP constraint matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// One sparse column: parallel lists of row indices and values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseCol {
    pub rows: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseCol {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(row: usize, val: f64) -> Self {
        SparseCol {
            rows: vec![row],
            vals: vec![val],
        }
    }

    /// Adds `val` at `row`, merging with an existing entry.
    pub fn add(&mut self, row: usize, val: f64) {
        if val == 0.0 {
            return;
        }
        match self.rows.iter().position(|&r| r == row) {
            Some(k) => self.vals[k] += val,
            None => {
                self.rows.push(row);
                self.vals.push(val);
            }
        }
    }

    /// Drops explicit zeros and sorts by row.
    pub fn normalize(&mut self) {
        let mut pairs: Vec<(usize, f64)> = self
            .rows
            .iter()
            .copied()
            .zip(self.vals.iter().copied())
            .filter(|(_, v)| *v != 0.0)
            .collect();
        pairs.sort_by_key(|p| p.0);
        self.rows = pairs.iter().map(|p| p.0).collect();
        self.vals = pairs.iter().map(|p| p.1).collect();
    }

    pub fn nnz(&self) -> usize {
        self.rows.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.rows.iter().copied().zip(self.vals.iter().copied())
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(r, v)| v * dense[r]).sum()
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (r, v) in self.iter() {
            out[r] += v;
        }
        out
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let mut col = SparseCol::new();
        for (r, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                col.rows.push(r);
                col.vals.push(v);
            }
        }
        col
    }
}

/// Dense copy of a column list.
pub fn columns_to_dense(n_rows: usize, cols: &[SparseCol]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n_rows, cols.len());
    for (j, col) in cols.iter().enumerate() {
        for (r, v) in col.iter() {
            m[(r, j)] += v;
        }
    }
    m
}
