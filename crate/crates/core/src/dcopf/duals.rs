use nalgebra::DVector;
use serde::Serialize;

use super::standard_form::{Formulation, StandardFormLp};
use crate::error::{OtrError, Result};
use crate::simplex::BasisState;

const STATIONARITY_TOL: f64 = 1e-5;
const DEGENERATE_TOL: f64 = 1e-9;

/// Primal and dual optimum of the DC-OPF.
#[derive(Debug, Clone)]
pub struct DcOpfSolution {
    pub objective: f64,
    pub pg: Vec<f64>,
    pub theta: Vec<f64>,
    pub flows: Vec<f64>,
    /// Locational marginal prices.
    pub lambda: Vec<f64>,
    pub mu_lo: Vec<f64>,
    pub mu_hi: Vec<f64>,
    /// Per generator.
    pub nu_lo: Vec<f64>,
    pub nu_hi: Vec<f64>,
    /// Some basic variable sits at zero.
    pub degenerate: bool,
    pub basis: BasisState,
}

#[derive(Serialize)]
struct SolutionJson<'a> {
    objective: f64,
    pg: &'a [f64],
    theta: &'a [f64],
    flows: &'a [f64],
    lambda: &'a [f64],
    mu_lo: &'a [f64],
    mu_hi: &'a [f64],
    nu_lo: &'a [f64],
    nu_hi: &'a [f64],
    degenerate: bool,
}

impl DcOpfSolution {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(SolutionJson {
            objective: self.objective,
            pg: &self.pg,
            theta: &self.theta,
            flows: &self.flows,
            lambda: &self.lambda,
            mu_lo: &self.mu_lo,
            mu_hi: &self.mu_hi,
            nu_lo: &self.nu_lo,
            nu_hi: &self.nu_hi,
            degenerate: self.degenerate,
        })
        .expect("solution serializes")
    }
}

fn clip(v: f64) -> f64 {
    if v < 0.0 && v > -1e-9 {
        0.0
    } else {
        v
    }
}

/// Maps an optimal basis to OPF primal values and Lagrange multipliers.
pub fn extract_duals(lp: &StandardFormLp, basis: BasisState) -> Result<DcOpfSolution> {
    let lay = lp.layout;
    let net = &lp.net;
    let x = basis.primal(lp.n_cols());
    let y = &basis.y;

    let pg: Vec<f64> = (0..lay.n_gen)
        .map(|g| x[lay.col_pg(g)] + lp.pg_shift[g])
        .collect();
    let mu_hi: Vec<f64> = (0..lay.n_line).map(|l| clip(-y[lay.row_flow_hi(l)])).collect();
    let mu_lo: Vec<f64> = (0..lay.n_line).map(|l| clip(-y[lay.row_flow_lo(l)])).collect();
    let nu_hi: Vec<f64> = (0..lay.n_gen).map(|g| clip(-y[lay.row_gen_hi(g)])).collect();
    // The x ≥ 0 bound on pg coincides with p̲ (shifted or p̲ = 0), so its
    // reduced cost folds into ν̲.
    let nu_lo: Vec<f64> = (0..lay.n_gen)
        .map(|g| clip(-y[lay.row_gen_lo(g)] + basis.reduced_costs[lay.col_pg(g)]))
        .collect();

    let (theta, lambda) = match lay.formulation {
        Formulation::Angle => {
            let theta: Vec<f64> = (0..lay.n_bus)
                .map(|i| x[lay.col_theta_plus(i)] - x[lay.col_theta_minus(i)])
                .collect();
            let lambda: Vec<f64> = (0..lay.n_bus).map(|i| y[lay.row_balance(i)]).collect();
            (theta, lambda)
        }
        Formulation::Ptdf => {
            let psi = lp.ptdf.as_ref().expect("PTDF formulation stores Ψ");
            let dmu = DVector::from_iterator(
                lay.n_line,
                (0..lay.n_line).map(|l| mu_hi[l] - mu_lo[l]),
            );
            let shadow = psi.transpose() * dmu;
            let lambda: Vec<f64> = (0..lay.n_bus).map(|i| y[0] - shadow[i]).collect();
            let mut inj = -net.loads();
            for (g, gen) in net.generators.iter().enumerate() {
                inj[gen.bus] += pg[g];
            }
            let (theta, _) = net.dc_power_flow(&inj)?;
            (theta.iter().copied().collect(), lambda)
        }
    };
    let flows: Vec<f64> = net
        .flows_from_angles(&DVector::from_column_slice(&theta))
        .iter()
        .copied()
        .collect();

    // Stationarity of the Lagrangian in pg and θ.
    let mut resid = 0.0f64;
    for (g, gen) in net.generators.iter().enumerate() {
        let r = gen.cost - lambda[gen.bus] + nu_hi[g] - nu_lo[g];
        resid = resid.max(r.abs());
    }
    let mut theta_resid = vec![0.0; lay.n_bus];
    for (l, line) in net.lines.iter().enumerate() {
        if !line.in_service {
            continue;
        }
        let t = line.b * (lambda[line.from] - lambda[line.to] + mu_hi[l] - mu_lo[l]);
        theta_resid[line.from] += t;
        theta_resid[line.to] -= t;
    }
    resid = theta_resid.iter().fold(resid, |m, v| m.max(v.abs()));
    let scale = 1.0 + lp.c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if resid > STATIONARITY_TOL * scale {
        return Err(OtrError::Internal(format!(
            "stationarity residual {resid:.3e} exceeds tolerance"
        )));
    }

    let degenerate = basis.x_b.iter().any(|v| v.abs() <= DEGENERATE_TOL);
    let objective = basis.objective(&lp.c) + lp.objective_offset;
    Ok(DcOpfSolution {
        objective,
        pg,
        theta,
        flows,
        lambda,
        mu_lo,
        mu_hi,
        nu_lo,
        nu_hi,
        degenerate,
        basis,
    })
}
