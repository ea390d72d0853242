//! Standard-form encoding `min cᵀx, Ax = b, x ≥ 0` of the DC-OPF.
//!
//! Angle formulation, x = (pg, θ⁺, θ⁻, f̄⁺, f̲⁺, p̄⁺, p̲⁺):
//!
//! ```text
//!   balance   G pg − B⁰θ⁺ + B⁰θ⁻                 = pd
//!   flow_hi        DA⊤θ⁺ − DA⊤θ⁻ + f̄⁺            = f̄
//!   flow_lo       −DA⊤θ⁺ + DA⊤θ⁻ + f̲⁺            = −f̲
//!   gen_hi     pg                       + p̄⁺     = p̄
//!   gen_lo    −pg                             + p̲⁺ = −p̲
//! ```
//!
//! The PTDF formulation drops θ, keeps one balance row `𝟙ᵀpg = 𝟙ᵀpd`, and
//! writes flows as Ψ(G pg − pd). Generators with p̲ < 0 are shifted so their
//! variable starts at zero.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::network::Network;
use crate::sparse::{columns_to_dense, SparseCol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Formulation {
    Angle,
    Ptdf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnTag {
    Pg,
    ThetaPlus,
    ThetaMinus,
    SlackFbar,
    SlackFubar,
    SlackPbar,
    SlackPubar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowTag {
    Balance,
    FlowHi,
    FlowLo,
    GenHi,
    GenLo,
}

/// Index maps between model quantities and LP rows/columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub formulation: Formulation,
    pub n_bus: usize,
    pub n_line: usize,
    pub n_gen: usize,
}

impl Layout {
    fn n_theta(&self) -> usize {
        match self.formulation {
            Formulation::Angle => self.n_bus,
            Formulation::Ptdf => 0,
        }
    }

    pub fn n_balance(&self) -> usize {
        match self.formulation {
            Formulation::Angle => self.n_bus,
            Formulation::Ptdf => 1,
        }
    }

    pub fn n_cols(&self) -> usize {
        3 * self.n_gen + 2 * self.n_theta() + 2 * self.n_line
    }

    pub fn n_rows(&self) -> usize {
        self.n_balance() + 2 * self.n_line + 2 * self.n_gen
    }

    pub fn col_pg(&self, g: usize) -> usize {
        g
    }

    pub fn col_theta_plus(&self, i: usize) -> usize {
        debug_assert!(self.formulation == Formulation::Angle);
        self.n_gen + i
    }

    pub fn col_theta_minus(&self, i: usize) -> usize {
        debug_assert!(self.formulation == Formulation::Angle);
        self.n_gen + self.n_theta() + i
    }

    pub fn col_slack_fbar(&self, l: usize) -> usize {
        self.n_gen + 2 * self.n_theta() + l
    }

    pub fn col_slack_fubar(&self, l: usize) -> usize {
        self.n_gen + 2 * self.n_theta() + self.n_line + l
    }

    pub fn col_slack_pbar(&self, g: usize) -> usize {
        self.n_gen + 2 * self.n_theta() + 2 * self.n_line + g
    }

    pub fn col_slack_pubar(&self, g: usize) -> usize {
        2 * self.n_gen + 2 * self.n_theta() + 2 * self.n_line + g
    }

    /// Balance row of bus `i` (the single balance row in PTDF form).
    pub fn row_balance(&self, i: usize) -> usize {
        match self.formulation {
            Formulation::Angle => i,
            Formulation::Ptdf => 0,
        }
    }

    pub fn row_flow_hi(&self, l: usize) -> usize {
        self.n_balance() + l
    }

    pub fn row_flow_lo(&self, l: usize) -> usize {
        self.n_balance() + self.n_line + l
    }

    pub fn row_gen_hi(&self, g: usize) -> usize {
        self.n_balance() + 2 * self.n_line + g
    }

    pub fn row_gen_lo(&self, g: usize) -> usize {
        self.n_balance() + 2 * self.n_line + self.n_gen + g
    }

    pub fn column_tag(&self, j: usize) -> ColumnTag {
        let (ng, nt, m) = (self.n_gen, self.n_theta(), self.n_line);
        if j < ng {
            ColumnTag::Pg
        } else if j < ng + nt {
            ColumnTag::ThetaPlus
        } else if j < ng + 2 * nt {
            ColumnTag::ThetaMinus
        } else if j < ng + 2 * nt + m {
            ColumnTag::SlackFbar
        } else if j < ng + 2 * nt + 2 * m {
            ColumnTag::SlackFubar
        } else if j < 2 * ng + 2 * nt + 2 * m {
            ColumnTag::SlackPbar
        } else {
            ColumnTag::SlackPubar
        }
    }

    pub fn row_tag(&self, r: usize) -> RowTag {
        let (nb, m, ng) = (self.n_balance(), self.n_line, self.n_gen);
        if r < nb {
            RowTag::Balance
        } else if r < nb + m {
            RowTag::FlowHi
        } else if r < nb + 2 * m {
            RowTag::FlowLo
        } else if r < nb + 2 * m + ng {
            RowTag::GenHi
        } else {
            RowTag::GenLo
        }
    }
}

/// The standard-form LP plus what is needed to map back to the OPF.
#[derive(Debug, Clone)]
pub struct StandardFormLp {
    pub layout: Layout,
    /// Constraint matrix A by columns.
    pub cols: Vec<SparseCol>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub column_tags: Vec<ColumnTag>,
    pub row_tags: Vec<RowTag>,
    /// pg = x_pg + pg_shift.
    pub pg_shift: Vec<f64>,
    /// cᵀ pg_shift, added to cᵀx to get the OPF objective.
    pub objective_offset: f64,
    /// Network the LP was built from.
    pub net: Network,
    /// Ψ for the PTDF formulation.
    pub ptdf: Option<DMatrix<f64>>,
}

impl StandardFormLp {
    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn dense_a(&self) -> DMatrix<f64> {
        columns_to_dense(self.n_rows(), &self.cols)
    }

    /// OPF objective of a standard-form point.
    pub fn objective_of(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.objective_offset
    }

    /// Maps an OPF point (pg, θ) to the standard-form vector. Slacks are
    /// computed from the constraints; they are negative if the point
    /// violates a bound.
    pub fn point_from(&self, pg: &[f64], theta: &[f64]) -> Vec<f64> {
        let lay = &self.layout;
        let mut x = vec![0.0; lay.n_cols()];
        for g in 0..lay.n_gen {
            let v = pg[g] - self.pg_shift[g];
            x[lay.col_pg(g)] = v;
            x[lay.col_slack_pbar(g)] = self.b[lay.row_gen_hi(g)] - v;
            x[lay.col_slack_pubar(g)] = self.b[lay.row_gen_lo(g)] + v;
        }
        let flows = match lay.formulation {
            Formulation::Angle => {
                for (i, &t) in theta.iter().enumerate() {
                    x[lay.col_theta_plus(i)] = t.max(0.0);
                    x[lay.col_theta_minus(i)] = (-t).max(0.0);
                }
                self.net
                    .flows_from_angles(&nalgebra::DVector::from_column_slice(theta))
            }
            Formulation::Ptdf => {
                let mut inj = -self.net.loads();
                for (g, gen) in self.net.generators.iter().enumerate() {
                    inj[gen.bus] += pg[g];
                }
                self.ptdf.as_ref().expect("PTDF formulation stores Ψ") * inj
            }
        };
        for l in 0..lay.n_line {
            let line = &self.net.lines[l];
            let f = if line.in_service { flows[l] } else { 0.0 };
            x[lay.col_slack_fbar(l)] = line.f_max - f;
            x[lay.col_slack_fubar(l)] = f - line.f_min;
        }
        x
    }

    /// Copy with some columns replaced.
    pub fn with_columns(&self, replaced: &[(usize, SparseCol)]) -> StandardFormLp {
        let mut lp = self.clone();
        for (j, col) in replaced {
            lp.cols[*j] = col.clone();
        }
        lp
    }

    /// Residual ‖Ax − b‖∞.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut r: Vec<f64> = self.b.iter().map(|v| -v).collect();
        for (col, xv) in self.cols.iter().zip(x) {
            for (row, a) in col.iter() {
                r[row] += a * xv;
            }
        }
        r.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn shift_for(p_min: f64) -> f64 {
    if p_min < 0.0 {
        p_min
    } else {
        0.0
    }
}

/// Column of θ⁺ for bus `i` (θ⁻ is its negation): −B⁰ entries in balance
/// rows and ±b on the flow rows of incident lines.
pub(crate) fn theta_plus_column(net: &Network, lay: &Layout, i: usize) -> SparseCol {
    let mut col = SparseCol::new();
    for l in net.lines.iter().filter(|l| l.in_service && l.touches(i)) {
        let k = l.other(i);
        col.add(lay.row_balance(i), -l.b);
        col.add(lay.row_balance(k), l.b);
        let sign = if l.from == i { 1.0 } else { -1.0 };
        col.add(lay.row_flow_hi(l.id), sign * l.b);
        col.add(lay.row_flow_lo(l.id), -sign * l.b);
    }
    col.normalize();
    col
}

pub(crate) fn negate(col: &SparseCol) -> SparseCol {
    SparseCol {
        rows: col.rows.clone(),
        vals: col.vals.iter().map(|v| -v).collect(),
    }
}

pub(crate) fn build(net: &Network, formulation: Formulation, ptdf: Option<DMatrix<f64>>) -> StandardFormLp {
    let lay = Layout {
        formulation,
        n_bus: net.n_buses(),
        n_line: net.n_lines(),
        n_gen: net.n_gens(),
    };
    let (nc, nr) = (lay.n_cols(), lay.n_rows());
    let mut cols = vec![SparseCol::new(); nc];
    let mut b = vec![0.0; nr];
    let mut c = vec![0.0; nc];
    let pg_shift: Vec<f64> = net.generators.iter().map(|g| shift_for(g.p_min)).collect();

    // balance rhs: pd − G·shift
    let mut net_load = net.loads();
    for (g, gen) in net.generators.iter().enumerate() {
        net_load[gen.bus] -= pg_shift[g];
    }

    match formulation {
        Formulation::Angle => {
            for i in 0..lay.n_bus {
                b[lay.row_balance(i)] = net_load[i];
                let col = theta_plus_column(net, &lay, i);
                cols[lay.col_theta_minus(i)] = negate(&col);
                cols[lay.col_theta_plus(i)] = col;
            }
            for (g, gen) in net.generators.iter().enumerate() {
                cols[lay.col_pg(g)].add(lay.row_balance(gen.bus), 1.0);
            }
            for (l, line) in net.lines.iter().enumerate() {
                b[lay.row_flow_hi(l)] = line.f_max;
                b[lay.row_flow_lo(l)] = -line.f_min;
            }
        }
        Formulation::Ptdf => {
            let psi = ptdf.as_ref().expect("PTDF formulation needs Ψ");
            b[0] = net_load.sum();
            let base_flow = psi * &net_load;
            for (g, gen) in net.generators.iter().enumerate() {
                let col = &mut cols[lay.col_pg(g)];
                col.add(0, 1.0);
                for l in 0..lay.n_line {
                    let v = psi[(l, gen.bus)];
                    col.add(lay.row_flow_hi(l), v);
                    col.add(lay.row_flow_lo(l), -v);
                }
            }
            for (l, line) in net.lines.iter().enumerate() {
                b[lay.row_flow_hi(l)] = line.f_max + base_flow[l];
                b[lay.row_flow_lo(l)] = -line.f_min - base_flow[l];
            }
        }
    }
    for l in 0..lay.n_line {
        cols[lay.col_slack_fbar(l)] = SparseCol::singleton(lay.row_flow_hi(l), 1.0);
        cols[lay.col_slack_fubar(l)] = SparseCol::singleton(lay.row_flow_lo(l), 1.0);
    }
    for (g, gen) in net.generators.iter().enumerate() {
        let j = lay.col_pg(g);
        cols[j].add(lay.row_gen_hi(g), 1.0);
        cols[j].add(lay.row_gen_lo(g), -1.0);
        cols[j].normalize();
        c[j] = gen.cost;
        cols[lay.col_slack_pbar(g)] = SparseCol::singleton(lay.row_gen_hi(g), 1.0);
        cols[lay.col_slack_pubar(g)] = SparseCol::singleton(lay.row_gen_lo(g), 1.0);
        b[lay.row_gen_hi(g)] = gen.p_max - pg_shift[g];
        b[lay.row_gen_lo(g)] = -gen.p_min + pg_shift[g];
    }
    let objective_offset = net
        .generators
        .iter()
        .zip(&pg_shift)
        .map(|(g, s)| g.cost * s)
        .sum();
    StandardFormLp {
        column_tags: (0..nc).map(|j| lay.column_tag(j)).collect(),
        row_tags: (0..nr).map(|r| lay.row_tag(r)).collect(),
        layout: lay,
        cols,
        b,
        c,
        pg_shift,
        objective_offset,
        net: net.clone(),
        ptdf,
    }
}
