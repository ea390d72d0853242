//! Factorization of a simplex basis matrix.
//!
//! Basic columns with a single nonzero (slacks and artificials) are assigned
//! to their row directly. The remaining columns and uncovered rows form a
//! square kernel that gets a dense LU. With rows ordered (kernel, singleton)
//! and columns likewise, the basis is block lower triangular:
//!
//! ```text
//!   B = [ K    0  ]
//!       [ Bsc  Dg ]
//! ```
//!
//! Pivots after a refactorization are kept as product-form eta vectors.

use crate::error::{OtrError, Result};
use crate::linalg::DenseLu;
use crate::sparse::SparseCol;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    /// Off-pivot entries (position, value).
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct BasisFactor {
    m: usize,
    /// kernel row k -> matrix row
    kernel_rows: Vec<usize>,
    /// kernel column k -> basis position
    kernel_pos: Vec<usize>,
    /// matrix row -> kernel row index or NONE
    row_kernel: Vec<usize>,
    /// basis position -> (row, coefficient) for singleton positions
    singleton: Vec<Option<(usize, f64)>>,
    /// entries of kernel columns that fall in singleton rows
    off_block: Vec<Vec<(usize, f64)>>,
    lu: Option<DenseLu>,
    etas: Vec<Eta>,
}

impl BasisFactor {
    /// Factors the basis whose position `p` holds column `cols[p]`.
    pub fn new(m: usize, cols: &[&SparseCol]) -> Result<Self> {
        if cols.len() != m {
            return Err(OtrError::Internal(format!(
                "basis has {} columns for {m} rows",
                cols.len()
            )));
        }
        let mut row_taken = vec![false; m];
        let mut singleton = vec![None; m];
        for (p, col) in cols.iter().enumerate() {
            if col.nnz() == 1 {
                let (r, v) = (col.rows[0], col.vals[0]);
                if !row_taken[r] {
                    row_taken[r] = true;
                    singleton[p] = Some((r, v));
                }
            }
        }
        let kernel_rows: Vec<usize> = (0..m).filter(|&r| !row_taken[r]).collect();
        let kernel_pos: Vec<usize> = (0..m).filter(|&p| singleton[p].is_none()).collect();
        debug_assert_eq!(kernel_rows.len(), kernel_pos.len());
        let mut row_kernel = vec![NONE; m];
        for (k, &r) in kernel_rows.iter().enumerate() {
            row_kernel[r] = k;
        }
        let nk = kernel_rows.len();
        let mut dense = vec![0.0; nk * nk];
        let mut off_block = vec![Vec::new(); nk];
        for (kc, &p) in kernel_pos.iter().enumerate() {
            for (r, v) in cols[p].iter() {
                let kr = row_kernel[r];
                if kr == NONE {
                    off_block[kc].push((r, v));
                } else {
                    dense[kr * nk + kc] += v;
                }
            }
        }
        let lu = if nk > 0 {
            Some(DenseLu::factor(nk, dense)?)
        } else {
            None
        };
        Ok(BasisFactor {
            m,
            kernel_rows,
            kernel_pos,
            row_kernel,
            singleton,
            off_block,
            lu,
            etas: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel_rows.len()
    }

    pub fn eta_count(&self) -> usize {
        self.etas.len()
    }

    /// Solves B x = a. `a` is indexed by row; the result by basis position.
    pub fn ftran(&self, a: &[f64]) -> Vec<f64> {
        let mut x = self.ftran_base(a);
        for eta in &self.etas {
            let xp = x[eta.pos] / eta.pivot;
            x[eta.pos] = xp;
            if xp != 0.0 {
                for &(i, w) in &eta.entries {
                    x[i] -= w * xp;
                }
            }
        }
        x
    }

    /// Solves B x = a for a sparse right-hand side.
    pub fn ftran_sparse(&self, a: &SparseCol) -> Vec<f64> {
        self.ftran(&a.to_dense(self.m))
    }

    fn ftran_base(&self, a: &[f64]) -> Vec<f64> {
        let nk = self.kernel_rows.len();
        let mut x = vec![0.0; self.m];
        let mut xc: Vec<f64> = self.kernel_rows.iter().map(|&r| a[r]).collect();
        if let Some(lu) = &self.lu {
            lu.solve_in_place(&mut xc);
        }
        let mut resid = a.to_vec();
        for kc in 0..nk {
            x[self.kernel_pos[kc]] = xc[kc];
            if xc[kc] != 0.0 {
                for &(r, v) in &self.off_block[kc] {
                    resid[r] -= v * xc[kc];
                }
            }
        }
        for (p, s) in self.singleton.iter().enumerate() {
            if let Some((r, v)) = s {
                x[p] = resid[*r] / v;
            }
        }
        x
    }

    /// Solves Bᵀ y = c. `c` is indexed by basis position; the result by row.
    pub fn btran(&self, c: &[f64]) -> Vec<f64> {
        let mut c = c.to_vec();
        for eta in self.etas.iter().rev() {
            let s: f64 = eta.entries.iter().map(|&(i, w)| w * c[i]).sum();
            c[eta.pos] = (c[eta.pos] - s) / eta.pivot;
        }
        let nk = self.kernel_rows.len();
        let mut y = vec![0.0; self.m];
        for (p, s) in self.singleton.iter().enumerate() {
            if let Some((r, v)) = s {
                y[*r] = c[p] / v;
            }
        }
        let mut cc: Vec<f64> = (0..nk)
            .map(|kc| {
                let mut v = c[self.kernel_pos[kc]];
                for &(r, a) in &self.off_block[kc] {
                    v -= a * y[r];
                }
                v
            })
            .collect();
        if let Some(lu) = &self.lu {
            lu.solve_transpose_in_place(&mut cc);
        }
        for (kr, &r) in self.kernel_rows.iter().enumerate() {
            y[r] = cc[kr];
        }
        debug_assert!(self.row_kernel.len() == self.m);
        y
    }

    /// Records that the column with FTRAN image `w` replaced position `pos`.
    pub fn push_eta(&mut self, pos: usize, w: &[f64]) {
        let entries = w
            .iter()
            .enumerate()
            .filter(|&(i, v)| i != pos && *v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: w[pos],
            entries,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(cols: &[SparseCol], x: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (col, xv) in cols.iter().zip(x) {
            for (r, v) in col.iter() {
                out[r] += v * xv;
            }
        }
        out
    }

    #[test]
    fn mixed_singleton_and_kernel() {
        // rows 0..4; columns: slack on row 1, kernel columns, artificial on row 3
        let cols = vec![
            SparseCol {
                rows: vec![0, 1, 2],
                vals: vec![2.0, 1.0, -1.0],
            },
            SparseCol::singleton(1, 1.0),
            SparseCol {
                rows: vec![0, 2, 3],
                vals: vec![1.0, 3.0, 4.0],
            },
            SparseCol::singleton(3, -1.0),
        ];
        let refs: Vec<&SparseCol> = cols.iter().collect();
        let f = BasisFactor::new(4, &refs).unwrap();
        assert_eq!(f.kernel_dim(), 2);
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let x = f.ftran(&a);
        let back = dense_mul(&cols, &x, 4);
        for (u, v) in back.iter().zip(&a) {
            assert!((u - v).abs() < 1e-12);
        }
        let c = vec![0.5, -1.0, 2.0, 1.0];
        let y = f.btran(&c);
        for (p, col) in cols.iter().enumerate() {
            assert!((col.dot(&y) - c[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_update_matches_refactor() {
        let mut cols = vec![
            SparseCol {
                rows: vec![0, 1],
                vals: vec![1.0, 2.0],
            },
            SparseCol::singleton(1, 1.0),
            SparseCol::singleton(2, 1.0),
        ];
        let refs: Vec<&SparseCol> = cols.iter().collect();
        let mut f = BasisFactor::new(3, &refs).unwrap();
        let entering = SparseCol {
            rows: vec![0, 1, 2],
            vals: vec![1.0, 1.0, 5.0],
        };
        let w = f.ftran_sparse(&entering);
        f.push_eta(2, &w);
        cols[2] = entering;
        let refs: Vec<&SparseCol> = cols.iter().collect();
        let g = BasisFactor::new(3, &refs).unwrap();
        let a = vec![3.0, -1.0, 2.0];
        let (x1, x2) = (f.ftran(&a), g.ftran(&a));
        let (y1, y2) = (f.btran(&a), g.btran(&a));
        for i in 0..3 {
            assert!((x1[i] - x2[i]).abs() < 1e-12);
            assert!((y1[i] - y2[i]).abs() < 1e-12);
        }
    }
}
