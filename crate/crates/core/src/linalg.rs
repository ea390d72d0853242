//! Dense LU with partial pivoting, with solves against both the matrix and
//! its transpose.

use crate::error::{OtrError, Result};

/// Pivots smaller than this (relative to the largest entry of the
/// factored matrix) are treated as zero.
const SINGULAR_REL_TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    /// Row-major packed L (unit diagonal, below) and U (on and above).
    lu: Vec<f64>,
    /// perm[i] = original row placed at position i.
    perm: Vec<usize>,
}

impl DenseLu {
    /// Factors the row-major `n`×`n` matrix `a`.
    pub fn factor(n: usize, mut a: Vec<f64>) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix size mismatch");
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = SINGULAR_REL_TOL * scale.max(1.0);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tol {
                return Err(OtrError::Singular(format!(
                    "pivot {best:.3e} at column {k} of {n}"
                )));
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a[k * n + k];
            let (head, tail) = a.split_at_mut((k + 1) * n);
            let row_k = &head[k * n..k * n + n];
            for i in 0..n - k - 1 {
                let row_i = &mut tail[i * n..i * n + n];
                let f = row_i[k] / pivot;
                if f == 0.0 {
                    continue;
                }
                row_i[k] = f;
                for j in k + 1..n {
                    row_i[j] -= f * row_k[j];
                }
            }
        }
        Ok(DenseLu { n, lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / row[i];
        }
        b.copy_from_slice(&x);
    }

    /// Solves Aᵀ y = c in place.
    pub fn solve_transpose_in_place(&self, c: &mut [f64]) {
        let n = self.n;
        // Uᵀ z = c, then Lᵀ w = z, then y = Pᵀ w.
        let mut z = c.to_vec();
        for i in 0..n {
            let zi = z[i] / self.lu[i * n + i];
            z[i] = zi;
            if zi != 0.0 {
                let row = &self.lu[i * n..(i + 1) * n];
                for j in i + 1..n {
                    z[j] -= row[j] * zi;
                }
            }
        }
        for i in (0..n).rev() {
            let zi = z[i];
            if zi != 0.0 {
                let row = &self.lu[i * n..i * n + i];
                for (j, l) in row.iter().enumerate() {
                    z[j] -= l * zi;
                }
            }
        }
        for (i, &p) in self.perm.iter().enumerate() {
            c[p] = z[i];
        }
    }
}
