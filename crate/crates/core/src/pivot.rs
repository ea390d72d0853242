//! One-step simplex refinement of first-order candidate scores.
//!
//! Opening the lines between buses n and k (or a restricted split that moves
//! them) changes only the θ⁺/θ⁻ columns of n and k:
//!
//! ```text
//!   A' = A + W sᵀ,   W = Σ_ℓ b_ℓ [(e_n − e_k) − σ_ℓ (e_fhi(ℓ) − e_flo(ℓ))]
//!   s  = +1 on θ⁺_n, −1 on θ⁺_k, −1 on θ⁻_n, +1 on θ⁻_k
//! ```
//!
//! where σ_ℓ = +1 when ℓ is oriented from n. If any of those columns is
//! basic, B changes by the rank-1 term W s_Bᵀ and is updated with the
//! Sherman–Morrison formula. Every estimate is the cost of a feasible point
//! of the modified LP, so it never undercuts the modified optimum.

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{CandidateAction, SplitScenario};
use crate::basis::BasisFactor;
use crate::bus_split::{split_sensitivity, viable_splits};
use crate::dcopf::{solve_opf, theta_plus_column, negate, Layout, SolvedOpf, StandardFormLp};
use crate::error::{OtrError, Result};
use crate::network::Network;
use crate::sensitivity::{element_label, rank_lines, CandidateRanking, Method, RankedCandidate};
use crate::simplex::{self, BasisState, SimplexOptions};
use crate::sparse::SparseCol;

pub const OPT_TOL: f64 = 1e-9;
pub const FEAS_TOL: f64 = 1e-9;
pub const PIVOT_TOL: f64 = 1e-10;
pub const SM_TOL: f64 = 1e-10;
/// Default number of candidates refined per class.
pub const DEFAULT_T: usize = 6;
/// Estimated cost changes above this are not treated as improvements.
pub const BENEFIT_TOL: f64 = -1e-8;

/// Rank-1 change of the basis matrix: B(δ) = B + δ·u vᵀ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rank1 {
    /// Row-space direction, length n_rows.
    pub u: Vec<f64>,
    /// Basis-position weights, length n_rows.
    pub v: Vec<f64>,
    /// Susceptance change (negative total b of the opened lines).
    pub delta: f64,
}

/// Columns and right-hand side touched by an action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDelta {
    pub action: CandidateAction,
    pub modified_cols: Vec<usize>,
    pub new_cols: Vec<SparseCol>,
    /// Sparse (row, change) entries of b' − b.
    pub rhs_delta: Vec<(usize, f64)>,
    pub basis_touched: bool,
    pub rank1: Option<Rank1>,
}

impl ColumnDelta {
    /// Column j of the modified matrix.
    pub fn column<'a>(&'a self, lp: &'a StandardFormLp, j: usize) -> &'a SparseCol {
        match self.modified_cols.iter().position(|&c| c == j) {
            Some(k) => &self.new_cols[k],
            None => &lp.cols[j],
        }
    }

    /// b' = b + rhs_delta.
    pub fn rhs(&self, lp: &StandardFormLp) -> Vec<f64> {
        let mut b = lp.b.clone();
        for &(r, v) in &self.rhs_delta {
            b[r] += v;
        }
        b
    }

    /// The full modified LP's columns.
    pub fn modified_columns(&self, lp: &StandardFormLp) -> Vec<SparseCol> {
        let mut cols = lp.cols.clone();
        for (j, col) in self.modified_cols.iter().zip(&self.new_cols) {
            cols[*j] = col.clone();
        }
        cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotPath {
    NonbasicOnly,
    Rank1Feasible,
    Rank1Repaired,
    InfeasibleDiscarded,
}

impl PivotPath {
    pub fn as_str(self) -> &'static str {
        match self {
            PivotPath::NonbasicOnly => "nonbasic_only",
            PivotPath::Rank1Feasible => "rank1_feasible",
            PivotPath::Rank1Repaired => "rank1_repaired",
            PivotPath::InfeasibleDiscarded => "infeasible_discarded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotEstimate {
    pub action: CandidateAction,
    /// Estimated change of the optimal cost, absent when discarded.
    pub delta_cost: Option<f64>,
    pub path: PivotPath,
    pub entering_col: Option<usize>,
    pub reason: Option<String>,
}

impl PivotEstimate {
    fn discarded(action: &CandidateAction, reason: impl Into<String>) -> Self {
        PivotEstimate {
            action: action.clone(),
            delta_cost: None,
            path: PivotPath::InfeasibleDiscarded,
            entering_col: None,
            reason: Some(reason.into()),
        }
    }
}

/// Outcome of the reduced-cost recheck on an untouched basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Recheck {
    StillOptimal,
    Entering(Vec<usize>),
}

fn theta_columns(lay: &Layout, n: usize, k: usize) -> [usize; 4] {
    [
        lay.col_theta_plus(n),
        lay.col_theta_plus(k),
        lay.col_theta_minus(n),
        lay.col_theta_minus(k),
    ]
}

/// Describes how `action` modifies the standard-form LP and whether the
/// optimal basis is affected.
pub fn column_delta(
    lp: &StandardFormLp,
    basis: &BasisState,
    action: &CandidateAction,
) -> Result<ColumnDelta> {
    let net = &lp.net;
    let lay = lp.layout;
    if lay.formulation != crate::dcopf::Formulation::Angle {
        return Err(OtrError::Precondition("refinement needs the angle formulation".into()));
    }
    let (n, k, lines, rhs_delta) = match action {
        CandidateAction::OpenLine { line } => {
            let l = net
                .lines
                .get(*line)
                .ok_or_else(|| OtrError::Precondition(format!("line {line} does not exist")))?;
            if !l.in_service {
                return Err(OtrError::Precondition(format!("line {line} is out of service")));
            }
            (l.from, l.to, vec![*line], Vec::new())
        }
        CandidateAction::Split(spec) => {
            if !spec.is_restricted() {
                return Err(OtrError::Precondition(
                    "only single-neighbor splits can be refined".into(),
                ));
            }
            net.check_split(spec)?;
            let (n, k) = (spec.bus, spec.moved_neighbors[0]);
            let rhs = if spec.p_new != 0.0 && spec.scenario != SplitScenario::None {
                vec![
                    (lay.row_balance(n), spec.p_new),
                    (lay.row_balance(k), -spec.p_new),
                ]
            } else {
                Vec::new()
            };
            (n, k, net.lines_between(n, k), rhs)
        }
    };

    let mut opened = net.clone();
    let mut w = vec![0.0; lp.n_rows()];
    let mut total_b = 0.0;
    for &l in &lines {
        opened.lines[l].in_service = false;
        let line = &net.lines[l];
        let sigma = if line.from == n { 1.0 } else { -1.0 };
        w[lay.row_balance(n)] += line.b;
        w[lay.row_balance(k)] -= line.b;
        w[lay.row_flow_hi(l)] -= sigma * line.b;
        w[lay.row_flow_lo(l)] += sigma * line.b;
        total_b += line.b;
    }
    let modified_cols = theta_columns(&lay, n, k).to_vec();
    let plus_n = theta_plus_column(&opened, &lay, n);
    let plus_k = theta_plus_column(&opened, &lay, k);
    let new_cols = vec![plus_n.clone(), plus_k.clone(), negate(&plus_n), negate(&plus_k)];
    let s = [1.0, -1.0, -1.0, 1.0];

    let mut v = vec![0.0; lp.n_rows()];
    let mut touched = false;
    for (c, sv) in modified_cols.iter().zip(s) {
        if let Some(p) = basis.position_of(*c) {
            v[p] = sv;
            touched = true;
        }
    }
    let rank1 = touched.then(|| Rank1 {
        u: w.iter().map(|x| -x / total_b).collect(),
        v,
        delta: -total_b,
    });
    Ok(ColumnDelta {
        action: action.clone(),
        modified_cols,
        new_cols,
        rhs_delta,
        basis_touched: touched,
        rank1,
    })
}

/// Reduced costs of the modified columns against the unchanged basis.
pub fn nonbasic_recheck(
    lp: &StandardFormLp,
    basis: &BasisState,
    delta: &ColumnDelta,
) -> Result<Recheck> {
    if delta.basis_touched {
        return Err(OtrError::Precondition("basis is touched by the action".into()));
    }
    let entering: Vec<usize> = delta
        .modified_cols
        .iter()
        .zip(&delta.new_cols)
        .filter(|(j, col)| lp.c[**j] - col.dot(&basis.y) < -OPT_TOL)
        .map(|(j, _)| *j)
        .collect();
    Ok(if entering.is_empty() {
        Recheck::StillOptimal
    } else {
        Recheck::Entering(entering)
    })
}

/// Ratio-test step for direction `w` from `x`: min x_i / w_i over w_i > tol.
fn ratio_test(x: &[f64], w: &[f64]) -> Option<f64> {
    x.iter()
        .zip(w)
        .filter(|(_, &wi)| wi > PIVOT_TOL)
        .map(|(&xi, &wi)| xi.max(0.0) / wi)
        .min_by(|a, b| a.total_cmp(b))
}

/// Estimate on an untouched basis: enter each column in `j_set`
/// and keep the cheapest step. A right-hand-side change is included through
/// x'_B = B⁻¹b'.
pub fn one_step_pivot_nonbasic(
    lp: &StandardFormLp,
    basis: &BasisState,
    delta: &ColumnDelta,
    j_set: &[usize],
) -> Result<PivotEstimate> {
    if delta.basis_touched {
        return Err(OtrError::Precondition("basis is touched by the action".into()));
    }
    let upd = UpdatedBasis::plain(&basis.factor);
    let b_new = delta.rhs(lp);
    let x_new = upd.solve(&b_new);
    if x_new.iter().any(|&v| v < -FEAS_TOL) {
        return Err(OtrError::Precondition("x'_B is infeasible".into()));
    }
    let c_b: Vec<f64> = basis.basic_idx.iter().map(|&j| lp.c[j]).collect();
    let base = dot(&c_b, &x_new) - dot(&c_b, &basis.x_b);
    let mut best = (base, None);
    for &j in j_set {
        let col = delta.column(lp, j);
        let rc = lp.c[j] - col.dot(&basis.y);
        let w = upd.solve_col(col);
        let Some(alpha) = ratio_test(&x_new, &w) else {
            return Ok(PivotEstimate::discarded(
                &delta.action,
                format!("column {j} is an unbounded direction"),
            ));
        };
        let est = base + alpha * rc;
        if est < best.0 {
            best = (est, Some(j));
        }
    }
    Ok(PivotEstimate {
        action: delta.action.clone(),
        delta_cost: Some(best.0),
        path: PivotPath::NonbasicOnly,
        entering_col: best.1,
        reason: None,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves with B, or with B + δ u vᵀ through Sherman–Morrison.
pub struct UpdatedBasis<'a> {
    factor: &'a BasisFactor,
    /// (B⁻¹(δu), B⁻ᵀv, 1 + vᵀB⁻¹(δu))
    update: Option<(Vec<f64>, Vec<f64>, f64)>,
}

impl<'a> UpdatedBasis<'a> {
    pub fn plain(factor: &'a BasisFactor) -> Self {
        UpdatedBasis {
            factor,
            update: None,
        }
    }

    /// Prepares solves with B + δ u vᵀ. Fails when the update is singular.
    pub fn rank1(factor: &'a BasisFactor, r1: &Rank1) -> Result<Self> {
        let du: Vec<f64> = r1.u.iter().map(|x| x * r1.delta).collect();
        let g = factor.ftran(&du);
        let r = factor.btran(&r1.v);
        let denom = 1.0 + dot(&r1.v, &g);
        if denom.abs() <= SM_TOL {
            return Err(OtrError::Singular(format!(
                "Sherman–Morrison denominator {denom:.3e}"
            )));
        }
        Ok(UpdatedBasis {
            factor,
            update: Some((g, r, denom)),
        })
    }

    /// B(δ)⁻¹ a, with `a` indexed by row.
    pub fn solve(&self, a: &[f64]) -> Vec<f64> {
        let mut x = self.factor.ftran(a);
        if let Some((g, r, denom)) = &self.update {
            let coef = dot(r, a) / denom;
            for (xi, gi) in x.iter_mut().zip(g) {
                *xi -= gi * coef;
            }
        }
        x
    }

    pub fn solve_col(&self, a: &SparseCol) -> Vec<f64> {
        self.solve(&a.to_dense(self.factor.dim()))
    }

    /// cᵀB(δ)⁻¹ for `c` indexed by basis position.
    pub fn solve_transpose(&self, c: &[f64]) -> Vec<f64> {
        let mut y = self.factor.btran(c);
        if let Some((g, r, denom)) = &self.update {
            let coef = dot(c, g) / denom;
            for (yi, ri) in y.iter_mut().zip(r) {
                *yi -= ri * coef;
            }
        }
        y
    }
}

/// Basic solution for the updated basis and the new right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Update {
    pub x_b: Vec<f64>,
    pub cost: f64,
}

/// x_B(δ) = (B + δ u vᵀ)⁻¹ b' and c_Bᵀ x_B(δ).
pub fn rank1_basis_update(
    lp: &StandardFormLp,
    basis: &BasisState,
    r1: &Rank1,
    b_new: &[f64],
) -> Result<Rank1Update> {
    let upd = UpdatedBasis::rank1(&basis.factor, r1)?;
    let x_b = upd.solve(b_new);
    let cost = basis
        .basic_idx
        .iter()
        .zip(&x_b)
        .map(|(&j, x)| lp.c[j] * x)
        .sum();
    Ok(Rank1Update { x_b, cost })
}

/// Searches nonbasic columns for a step that makes `x_delta` nonnegative.
/// For column j with D_j = −B(δ)⁻¹A'_j, the smallest repairing step d_j
/// must not exceed the largest feasible step α_j. The estimate uses α_j,
/// or d_j when α_j is unbounded.
pub fn restore_feasibility(
    lp: &StandardFormLp,
    basis: &BasisState,
    delta: &ColumnDelta,
    upd: &UpdatedBasis<'_>,
    x_delta: &[f64],
) -> PivotEstimate {
    let c_b: Vec<f64> = basis.basic_idx.iter().map(|&j| lp.c[j]).collect();
    let base = dot(&c_b, x_delta) - dot(&c_b, &basis.x_b);
    let negative: Vec<usize> = (0..x_delta.len()).filter(|&i| x_delta[i] < -FEAS_TOL).collect();
    // Rows of B(δ)⁻¹ at the negative positions give a cheap screen.
    let rows: Vec<Vec<f64>> = negative
        .iter()
        .map(|&i| {
            let mut e = vec![0.0; x_delta.len()];
            e[i] = 1.0;
            upd.solve_transpose(&e)
        })
        .collect();
    let y_delta = upd.solve_transpose(&c_b);
    let mut best: Option<(f64, usize)> = None;
    for &j in &basis.nonbasic_idx {
        let col = delta.column(lp, j);
        if rows.iter().any(|rho| -col.dot(rho) <= PIVOT_TOL) {
            continue;
        }
        let d: Vec<f64> = upd.solve_col(col).iter().map(|v| -v).collect();
        let mut d_min = 0.0f64;
        let mut alpha = f64::INFINITY;
        let mut blocked = false;
        for (&xi, &di) in x_delta.iter().zip(&d) {
            if xi < -FEAS_TOL {
                if di <= PIVOT_TOL {
                    blocked = true;
                    break;
                }
                d_min = d_min.max(-xi / di);
            } else if di < -PIVOT_TOL {
                alpha = alpha.min(xi.max(0.0) / -di);
            }
        }
        if blocked || d_min > alpha * (1.0 + 1e-12) + 1e-15 {
            continue;
        }
        let step = if alpha.is_finite() { alpha } else { d_min };
        let rc = lp.c[j] - col.dot(&y_delta);
        let est = base + step * rc;
        if best.is_none_or(|(b, _)| est < b) {
            best = Some((est, j));
        }
    }
    match best {
        Some((est, j)) => PivotEstimate {
            action: delta.action.clone(),
            delta_cost: Some(est),
            path: PivotPath::Rank1Repaired,
            entering_col: Some(j),
            reason: None,
        },
        None => PivotEstimate::discarded(&delta.action, "feasibility cannot be restored in one pivot"),
    }
}

/// Full one-step refinement of a candidate.
pub fn refine(lp: &StandardFormLp, basis: &BasisState, action: &CandidateAction) -> Result<PivotEstimate> {
    let delta = column_delta(lp, basis, action)?;
    refine_delta(lp, basis, &delta)
}

pub fn refine_delta(lp: &StandardFormLp, basis: &BasisState, delta: &ColumnDelta) -> Result<PivotEstimate> {
    let upd = match &delta.rank1 {
        Some(r1) => match UpdatedBasis::rank1(&basis.factor, r1) {
            Ok(u) => u,
            Err(e) => return Ok(PivotEstimate::discarded(&delta.action, e.to_string())),
        },
        None => UpdatedBasis::plain(&basis.factor),
    };
    let b_new = delta.rhs(lp);
    let x_delta = upd.solve(&b_new);
    if x_delta.iter().any(|&v| v < -FEAS_TOL) {
        return Ok(restore_feasibility(lp, basis, delta, &upd, &x_delta));
    }
    if !delta.basis_touched {
        let j_set = match nonbasic_recheck(lp, basis, delta)? {
            Recheck::StillOptimal => Vec::new(),
            Recheck::Entering(j) => j,
        };
        return one_step_pivot_nonbasic(lp, basis, delta, &j_set);
    }
    // Feasible updated basis: its own value, improved by one entering column.
    let c_b: Vec<f64> = basis.basic_idx.iter().map(|&j| lp.c[j]).collect();
    let base = dot(&c_b, &x_delta) - dot(&c_b, &basis.x_b);
    let y_delta = upd.solve_transpose(&c_b);
    let mut best = (base, None);
    for &j in &basis.nonbasic_idx {
        let col = delta.column(lp, j);
        let rc = lp.c[j] - col.dot(&y_delta);
        if rc >= -OPT_TOL {
            continue;
        }
        let w = upd.solve_col(col);
        let Some(alpha) = ratio_test(&x_delta, &w) else {
            return Ok(PivotEstimate::discarded(
                &delta.action,
                format!("column {j} is an unbounded direction"),
            ));
        };
        let est = base + alpha * rc;
        if est < best.0 {
            best = (est, Some(j));
        }
    }
    Ok(PivotEstimate {
        action: delta.action.clone(),
        delta_cost: Some(best.0),
        path: PivotPath::Rank1Feasible,
        entering_col: best.1,
        reason: None,
    })
}

/// Optimal cost change of the modified standard-form LP, or `None` when it
/// is infeasible.
pub fn exact_delta(lp: &StandardFormLp, basis: &BasisState, delta: &ColumnDelta) -> Result<Option<f64>> {
    let cols = delta.modified_columns(lp);
    let b = delta.rhs(lp);
    match simplex::solve(&cols, &b, &lp.c, &SimplexOptions::default()) {
        Ok(st) => Ok(Some(st.objective(&lp.c) - basis.objective(&lp.c))),
        Err(OtrError::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// One candidate in the refinement report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub action: CandidateAction,
    pub element: String,
    pub first_order_dv: f64,
    pub pivot_path: PivotPath,
    pub pivot_dcost: Option<f64>,
    pub oracle_cost: Option<f64>,
    pub feasible: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub base_cost: f64,
    pub t: usize,
    /// Refined candidates, best first; discarded ones last.
    pub entries: Vec<ReportEntry>,
    pub best: Option<CandidateAction>,
    pub notes: Vec<String>,
}

impl RankingReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }

    /// Fills `oracle_cost` by applying each action and re-solving.
    pub fn fill_oracle(&mut self, net: &Network) {
        for e in &mut self.entries {
            e.oracle_cost = crate::bench::post_action_cost(net, &e.action);
        }
    }
}

/// Combined first-order ranking of switchable lines and viable restricted
/// splits.
pub fn rank_all(net: &Network, solved: &SolvedOpf) -> Result<(CandidateRanking, CandidateRanking)> {
    let lines = rank_lines(net, &solved.solution);
    let splits = viable_splits(net, &solved.solution)?
        .into_iter()
        .map(|spec| {
            let score = split_sensitivity(net, &solved.solution, &spec)?.total;
            Ok(RankedCandidate {
                action: CandidateAction::Split(spec),
                score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((lines, CandidateRanking::new(Method::M3, splits)))
}

fn same_as_line(net: &Network, split: &CandidateAction, line: usize) -> bool {
    match split {
        CandidateAction::Split(s) if s.scenario == SplitScenario::None || s.p_new == 0.0 => {
            s.is_restricted() && net.lines_between(s.bus, s.moved_neighbors[0]) == [line]
        }
        _ => false,
    }
}

/// Top `t` lines and top `t` splits by first-order score, each
/// refined by one pivot; the best refined improvement wins.
pub fn improved_heuristic(net: &Network, t: usize) -> Result<(Option<CandidateAction>, RankingReport)> {
    let solved = solve_opf(net)?;
    improved_heuristic_with(net, &solved, t)
}

pub fn improved_heuristic_with(
    net: &Network,
    solved: &SolvedOpf,
    t: usize,
) -> Result<(Option<CandidateAction>, RankingReport)> {
    if t == 0 {
        return Err(OtrError::Validation("T must be positive".into()));
    }
    let (lines, splits) = rank_all(net, solved)?;
    let top_splits: Vec<RankedCandidate> = splits.top(t).to_vec();
    let mut notes = Vec::new();
    let mut candidates: Vec<RankedCandidate> = Vec::new();
    for c in lines.top(t) {
        let CandidateAction::OpenLine { line } = c.action else { continue };
        if top_splits.iter().any(|s| same_as_line(net, &s.action, line)) {
            notes.push(format!(
                "{} duplicates a listed split; kept the split",
                element_label(net, &c.action)
            ));
            continue;
        }
        candidates.push(c.clone());
    }
    candidates.extend(top_splits);

    let lp = &solved.lp;
    let basis = &solved.solution.basis;
    let estimates: Vec<Result<PivotEstimate>> = candidates
        .par_iter()
        .map(|c| refine(lp, basis, &c.action))
        .collect();
    let mut entries = Vec::with_capacity(candidates.len());
    for (c, est) in candidates.iter().zip(estimates) {
        let est = est?;
        debug!(
            "{}: first order {:.6}, pivot {:?} via {}",
            element_label(net, &c.action),
            c.score,
            est.delta_cost,
            est.path.as_str()
        );
        entries.push(ReportEntry {
            element: element_label(net, &c.action),
            action: c.action.clone(),
            first_order_dv: c.score,
            pivot_path: est.path,
            pivot_dcost: est.delta_cost,
            oracle_cost: None,
            feasible: est.delta_cost.is_some(),
            note: est.reason,
        });
    }
    entries.sort_by(|a, b| {
        let ka = a.pivot_dcost.unwrap_or(f64::INFINITY);
        let kb = b.pivot_dcost.unwrap_or(f64::INFINITY);
        ka.total_cmp(&kb)
            .then_with(|| a.action.sort_key().cmp(&b.action.sort_key()))
    });
    let best = entries
        .iter()
        .find(|e| e.pivot_dcost.is_some_and(|d| d < BENEFIT_TOL))
        .map(|e| e.action.clone());
    if best.is_none() {
        notes.push("no beneficial action".into());
    }
    let report = RankingReport {
        base_cost: solved.solution.objective,
        t,
        entries,
        best: best.clone(),
        notes,
    };
    Ok((best, report))
}

/// One accepted step of iterative opening.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStep {
    pub action: CandidateAction,
    pub element: String,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterativeResult {
    pub method: Method,
    pub base_cost: f64,
    pub final_cost: f64,
    pub steps: Vec<IterationStep>,
    #[serde(skip)]
    pub network: Network,
}

/// Opens lines one at a time: each round re-solves, ranks with `method` and
/// opens the best-ranked line whose opening leaves a connected, feasible
/// network. Stops after `max_open` openings or when nothing qualifies.
pub fn iterative_line_opening(net: &Network, method: Method, max_open: usize) -> Result<IterativeResult> {
    if !matches!(method, Method::M0 | Method::M1 | Method::M2) {
        return Err(OtrError::Validation(format!(
            "iterative opening supports M0, M1 and M2, got {}",
            method.as_str()
        )));
    }
    let base_cost = crate::dcopf::optimal_cost(net)?;
    let mut current = net.clone();
    let mut cost = base_cost;
    let mut steps = Vec::new();
    while steps.len() < max_open {
        let solved = solve_opf(&current)?;
        let ranking = match method {
            Method::M2 => {
                let mut r = rank_lines(&current, &solved.solution);
                r.entries.retain(|e| e.score < BENEFIT_TOL);
                r
            }
            _ => crate::sensitivity::baseline_criterion(&current, &solved.solution, method)?,
        };
        let next = ranking.entries.iter().find_map(|e| {
            let opened = current.apply_action(&e.action).ok()?;
            let c = crate::dcopf::optimal_cost(&opened).ok()?;
            Some((e.action.clone(), opened, c))
        });
        let Some((action, opened, c)) = next else { break };
        debug!("opened {} -> {c:.6}", element_label(&current, &action));
        steps.push(IterationStep {
            element: element_label(&current, &action),
            action,
            cost: c,
        });
        current = opened;
        cost = c;
    }
    Ok(IterativeResult {
        method,
        base_cost,
        final_cost: cost,
        steps,
        network: current,
    })
}

#[cfg(test)]
mod tests;
