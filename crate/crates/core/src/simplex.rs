//! Two-phase revised simplex for `min cᵀx, Ax = b, x ≥ 0`.
//!
//! Pricing is Dantzig's rule, switching to Bland's rule after a run of
//! degenerate pivots and back once progress resumes. Ties always go to the
//! lowest column index, so identical inputs give identical bases.

use log::{debug, trace};

use crate::basis::BasisFactor;
use crate::error::{OtrError, Result};
use crate::sparse::SparseCol;

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub pivot_tol: f64,
    pub phase1_tol: f64,
    pub refactor_every: usize,
    pub degenerate_run: usize,
    /// 0 means a size-based default.
    pub max_iter: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            pivot_tol: 1e-10,
            phase1_tol: 1e-7,
            refactor_every: 64,
            degenerate_run: 50,
            max_iter: 0,
        }
    }
}

/// An optimal basis together with its factorization and dual information.
#[derive(Debug, Clone)]
pub struct BasisState {
    /// Column held at each basis position (one per row).
    pub basic_idx: Vec<usize>,
    pub nonbasic_idx: Vec<usize>,
    pub factor: BasisFactor,
    pub x_b: Vec<f64>,
    /// Row duals cᵦᵀB⁻¹.
    pub y: Vec<f64>,
    /// Reduced costs for every column (zero on basic columns).
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl BasisState {
    /// Builds the state for a given basis without optimizing.
    pub fn from_basis(
        cols: &[SparseCol],
        b: &[f64],
        c: &[f64],
        basic_idx: Vec<usize>,
    ) -> Result<Self> {
        let m = b.len();
        let refs: Vec<&SparseCol> = basic_idx.iter().map(|&j| &cols[j]).collect();
        let factor = BasisFactor::new(m, &refs)?;
        let mut is_basic = vec![false; cols.len()];
        for &j in &basic_idx {
            is_basic[j] = true;
        }
        let x_b = factor.ftran(b);
        let c_b: Vec<f64> = basic_idx.iter().map(|&j| c[j]).collect();
        let y = factor.btran(&c_b);
        let reduced_costs = (0..cols.len())
            .map(|j| if is_basic[j] { 0.0 } else { c[j] - cols[j].dot(&y) })
            .collect();
        let nonbasic_idx = (0..cols.len()).filter(|&j| !is_basic[j]).collect();
        Ok(BasisState {
            basic_idx,
            nonbasic_idx,
            factor,
            x_b,
            y,
            reduced_costs,
            iterations: 0,
        })
    }

    pub fn objective(&self, c: &[f64]) -> f64 {
        self.basic_idx
            .iter()
            .zip(&self.x_b)
            .map(|(&j, x)| c[j] * x)
            .sum()
    }

    /// Full primal vector of length `n_cols`.
    pub fn primal(&self, n_cols: usize) -> Vec<f64> {
        let mut x = vec![0.0; n_cols];
        for (&j, &v) in self.basic_idx.iter().zip(&self.x_b) {
            x[j] = v;
        }
        x
    }

    /// Basis position of column `j`, if basic.
    pub fn position_of(&self, j: usize) -> Option<usize> {
        self.basic_idx.iter().position(|&k| k == j)
    }

    pub fn is_basic(&self, j: usize) -> bool {
        self.position_of(j).is_some()
    }
}

/// Working state of one simplex run over the original columns plus one
/// artificial column per row.
struct Solver<'a> {
    cols: &'a [SparseCol],
    artificial: Vec<SparseCol>,
    b: &'a [f64],
    opts: SimplexOptions,
    n: usize,
    m: usize,
    basic: Vec<usize>,
    is_basic: Vec<bool>,
    factor: BasisFactor,
    x_b: Vec<f64>,
    iterations: usize,
    max_iter: usize,
    last_step: f64,
}

enum Step {
    Optimal,
    Pivoted,
}

impl<'a> Solver<'a> {
    fn column(&self, j: usize) -> &SparseCol {
        if j < self.n {
            &self.cols[j]
        } else {
            &self.artificial[j - self.n]
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let refs: Vec<&SparseCol> = self.basic.iter().map(|&j| self.column(j)).collect();
        self.factor = BasisFactor::new(self.m, &refs)?;
        self.x_b = self.factor.ftran(self.b);
        Ok(())
    }

    /// Runs simplex iterations with cost `cost` (over extended columns) until
    /// optimal. Columns with `allowed[j] == false` never enter.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> Result<()> {
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut verified = false;
        loop {
            if self.iterations >= self.max_iter {
                return Err(OtrError::Internal(format!(
                    "simplex iteration limit {} reached",
                    self.max_iter
                )));
            }
            if self.factor.eta_count() >= self.opts.refactor_every {
                self.refactor()?;
            }
            match self.iterate(cost, allowed, bland)? {
                Step::Optimal => {
                    if verified || self.factor.eta_count() == 0 {
                        return Ok(());
                    }
                    // Confirm optimality on a fresh factorization.
                    self.refactor()?;
                    verified = true;
                }
                Step::Pivoted => {
                    verified = false;
                    self.iterations += 1;
                }
            }
            let last_step = self.last_step;
            if last_step <= self.opts.feas_tol {
                degenerate += 1;
                if degenerate >= self.opts.degenerate_run && !bland {
                    trace!("switching to Bland pricing at iteration {}", self.iterations);
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
        }
    }

    fn iterate(&mut self, cost: &[f64], allowed: &[bool], bland: bool) -> Result<Step> {
        let c_b: Vec<f64> = self.basic.iter().map(|&j| cost[j]).collect();
        let y = self.factor.btran(&c_b);
        let mut entering = None;
        let mut best = -self.opts.opt_tol;
        for j in 0..self.n + self.m {
            if self.is_basic[j] || !allowed[j] {
                continue;
            }
            let d = cost[j] - self.column(j).dot(&y);
            if d < best {
                entering = Some(j);
                if bland {
                    break;
                }
                best = d;
            }
        }
        let Some(q) = entering else {
            self.last_step = 0.0;
            return Ok(Step::Optimal);
        };
        let w = self.factor.ftran_sparse(self.column(q));
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for (i, &wi) in w.iter().enumerate() {
            if wi <= self.opts.pivot_tol {
                continue;
            }
            let ratio = self.x_b[i].max(0.0) / wi;
            let better = match leave {
                None => true,
                Some(l) => {
                    let tie = (ratio - best_ratio).abs() <= 1e-12 * (1.0 + best_ratio.abs());
                    if tie {
                        if bland {
                            self.basic[i] < self.basic[l]
                        } else {
                            wi > w[l]
                        }
                    } else {
                        ratio < best_ratio
                    }
                }
            };
            if better {
                leave = Some(i);
                best_ratio = ratio;
            }
        }
        let Some(p) = leave else {
            return Err(OtrError::Unbounded(format!(
                "no blocking row for entering column {q}"
            )));
        };
        let t = best_ratio;
        for (xi, wi) in self.x_b.iter_mut().zip(&w) {
            *xi -= t * wi;
        }
        self.x_b[p] = t;
        self.is_basic[self.basic[p]] = false;
        self.is_basic[q] = true;
        self.basic[p] = q;
        self.factor.push_eta(p, &w);
        self.last_step = t;
        Ok(Step::Pivoted)
    }
}

impl<'a> Solver<'a> {
    fn new(cols: &'a [SparseCol], b: &'a [f64], opts: SimplexOptions) -> Result<Self> {
        let m = b.len();
        let n = cols.len();
        for col in cols {
            if col.rows.iter().any(|&r| r >= m) {
                return Err(OtrError::Internal("column row index out of range".into()));
            }
        }
        let artificial: Vec<SparseCol> = (0..m)
            .map(|r| SparseCol::singleton(r, if b[r] < 0.0 { -1.0 } else { 1.0 }))
            .collect();
        // Crash basis: a positive singleton column where b_r ≥ 0, else the
        // artificial for that row.
        let mut slack_for_row = vec![None; m];
        for (j, col) in cols.iter().enumerate() {
            if col.nnz() == 1 && col.vals[0] > 0.0 && slack_for_row[col.rows[0]].is_none() {
                slack_for_row[col.rows[0]] = Some(j);
            }
        }
        let basic: Vec<usize> = (0..m)
            .map(|r| match slack_for_row[r] {
                Some(j) if b[r] >= 0.0 => j,
                _ => n + r,
            })
            .collect();
        let mut is_basic = vec![false; n + m];
        for &j in &basic {
            is_basic[j] = true;
        }
        let max_iter = if opts.max_iter > 0 {
            opts.max_iter
        } else {
            50 * (n + m) + 1000
        };
        let mut solver = Solver {
            cols,
            artificial,
            b,
            opts,
            n,
            m,
            basic,
            is_basic,
            factor: BasisFactor::new(0, &[])?,
            x_b: Vec::new(),
            iterations: 0,
            max_iter,
            last_step: 0.0,
        };
        solver.refactor()?;
        Ok(solver)
    }

    fn artificial_in_basis(&self) -> Vec<usize> {
        (0..self.m).filter(|&p| self.basic[p] >= self.n).collect()
    }

    /// Pivots zero-valued artificials out of the basis.
    fn drive_out_artificials(&mut self) -> Result<()> {
        for p in self.artificial_in_basis() {
            let mut e = vec![0.0; self.m];
            e[p] = 1.0;
            let rho = self.factor.btran(&e);
            let mut pick = None;
            let mut best = 1e-9;
            for j in 0..self.n {
                if self.is_basic[j] {
                    continue;
                }
                let v = self.cols[j].dot(&rho).abs();
                if v > best {
                    best = v;
                    pick = Some(j);
                }
            }
            let Some(q) = pick else {
                return Err(OtrError::Precondition(
                    "constraint matrix is row-rank deficient".into(),
                ));
            };
            let w = self.factor.ftran_sparse(&self.cols[q]);
            let t = self.x_b[p] / w[p];
            for (xi, wi) in self.x_b.iter_mut().zip(&w) {
                *xi -= t * wi;
            }
            self.x_b[p] = t;
            self.is_basic[self.basic[p]] = false;
            self.is_basic[q] = true;
            self.basic[p] = q;
            self.factor.push_eta(p, &w);
            if self.factor.eta_count() >= self.opts.refactor_every {
                self.refactor()?;
            }
        }
        Ok(())
    }
}

/// Solves `min cᵀx, Ax = b, x ≥ 0` with `A` given by columns.
pub fn solve(
    cols: &[SparseCol],
    b: &[f64],
    c: &[f64],
    opts: &SimplexOptions,
) -> Result<BasisState> {
    let n = cols.len();
    let m = b.len();
    if c.len() != n {
        return Err(OtrError::Internal("cost vector length mismatch".into()));
    }
    let mut s = Solver::new(cols, b, *opts)?;

    if !s.artificial_in_basis().is_empty() {
        let mut cost1 = vec![0.0; n + m];
        for r in 0..m {
            cost1[n + r] = 1.0;
        }
        // Artificials may leave but never re-enter.
        let allowed: Vec<bool> = (0..n + m).map(|j| j < n).collect();
        s.optimize(&cost1, &allowed)?;
        let infeas: f64 = s
            .basic
            .iter()
            .zip(&s.x_b)
            .filter(|(&j, _)| j >= n)
            .map(|(_, x)| x.abs())
            .sum();
        debug!("phase 1: {} iterations, residual {infeas:.3e}", s.iterations);
        if infeas > opts.phase1_tol {
            return Err(OtrError::Infeasible(format!(
                "phase 1 residual {infeas:.3e}"
            )));
        }
        s.drive_out_artificials()?;
        s.refactor()?;
    }

    let mut cost2 = c.to_vec();
    cost2.extend(std::iter::repeat(0.0).take(m));
    let allowed: Vec<bool> = (0..n + m).map(|j| j < n).collect();
    s.optimize(&cost2, &allowed)?;
    s.refactor()?;
    debug!("simplex finished after {} iterations", s.iterations);

    let iterations = s.iterations;
    let mut state = BasisState::from_basis(cols, b, c, s.basic)?;
    state.iterations = iterations;
    Ok(state)
}
