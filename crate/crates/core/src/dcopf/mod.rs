//! DC optimal power flow: problem construction, standard form, simplex solve
//! and dual recovery.

mod duals;
mod standard_form;

pub use duals::{extract_duals, DcOpfSolution};
pub use standard_form::{ColumnTag, Formulation, Layout, RowTag, StandardFormLp};
pub(crate) use standard_form::{negate, theta_plus_column};

use nalgebra::DMatrix;

use crate::error::{OtrError, Result};
use crate::network::Network;
use crate::simplex::{self, BasisState, SimplexOptions};

/// A DC-OPF instance ready for conversion to standard form.
#[derive(Debug, Clone)]
pub struct DcOpfProblem<'a> {
    pub net: &'a Network,
    pub layout: Layout,
    ptdf: Option<DMatrix<f64>>,
}

fn precheck(net: &Network) -> Result<()> {
    net.validate()?;
    net.check_connected()?;
    let load = net.total_load();
    let cap: f64 = net.generators.iter().map(|g| g.p_max).sum();
    let floor: f64 = net.generators.iter().map(|g| g.p_min).sum();
    if cap < load - 1e-9 {
        return Err(OtrError::Infeasible(format!(
            "generation capacity {cap:.6} p.u. below load {load:.6} p.u."
        )));
    }
    if floor > load + 1e-9 {
        return Err(OtrError::Infeasible(format!(
            "minimum generation {floor:.6} p.u. above load {load:.6} p.u."
        )));
    }
    Ok(())
}

fn layout(net: &Network, formulation: Formulation) -> Layout {
    Layout {
        formulation,
        n_bus: net.n_buses(),
        n_line: net.n_lines(),
        n_gen: net.n_gens(),
    }
}

/// Angle formulation: B⁰θ = G pg − pd.
pub fn build_opf(net: &Network) -> Result<DcOpfProblem<'_>> {
    precheck(net)?;
    Ok(DcOpfProblem {
        net,
        layout: layout(net, Formulation::Angle),
        ptdf: None,
    })
}

/// PTDF formulation: 𝟙ᵀ(G pg − pd) = 0 and flows Ψ(G pg − pd).
pub fn build_opf_ptdf(net: &Network) -> Result<DcOpfProblem<'_>> {
    precheck(net)?;
    let psi = net.ptdf_matrix()?;
    Ok(DcOpfProblem {
        net,
        layout: layout(net, Formulation::Ptdf),
        ptdf: Some(psi),
    })
}

pub fn to_standard_form(prob: &DcOpfProblem<'_>) -> StandardFormLp {
    standard_form::build(prob.net, prob.layout.formulation, prob.ptdf.clone())
}

pub fn simplex_solve(lp: &StandardFormLp) -> Result<BasisState> {
    simplex::solve(&lp.cols, &lp.b, &lp.c, &SimplexOptions::default())
}

/// The standard-form LP together with its extracted solution.
#[derive(Debug, Clone)]
pub struct SolvedOpf {
    pub lp: StandardFormLp,
    pub solution: DcOpfSolution,
}

/// Builds, solves and extracts the angle-formulation OPF.
pub fn solve_opf(net: &Network) -> Result<SolvedOpf> {
    let prob = build_opf(net)?;
    solve_problem(&prob)
}

pub fn solve_problem(prob: &DcOpfProblem<'_>) -> Result<SolvedOpf> {
    let lp = to_standard_form(prob);
    let basis = simplex_solve(&lp)?;
    let solution = extract_duals(&lp, basis)?;
    Ok(SolvedOpf { lp, solution })
}

/// Optimal objective only, skipping dual extraction.
pub fn optimal_cost(net: &Network) -> Result<f64> {
    let prob = build_opf(net)?;
    let lp = to_standard_form(&prob);
    let basis = simplex_solve(&lp)?;
    Ok(basis.objective(&lp.c) + lp.objective_offset)
}
