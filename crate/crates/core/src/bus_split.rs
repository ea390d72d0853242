//! Bus splits as perturbations of the unsplit network.
//!
//! A split of bus n moves the lines to a set K of neighbors onto a new busbar
//! n+1 that carries the injection `p_new`. Kron-eliminating n+1 gives the
//! unsplit network with
//!
//! ```text
//!   Δp_n = −p_new,  Δp_k = (b_nk / Σ) p_new,  Σ = Σ_{k∈K} b_nk
//!   ΔB: lines n–k removed, clique b_nk b_nk' / Σ added on K
//! ```
//!
//! Line-flow changes follow from the pre-split flow p⁰ on the zero-impedance
//! tie between the two busbars:
//!
//! ```text
//!   p⁰     = p_new − Σ_{k∈K} b_nk (θ_n − θ_k)
//!   D      = Σ_{j∉K} Σ_{k∈K} PTDF_{jn, k→n} b_nk     (remaining lines, into n)
//!   F      = p⁰ Σ / D
//!   BSDF_l = Σ_{k∈K} PTDF_{l, k→n} b_nk / D,   Δf_l = BSDF_l p⁰
//! ```

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use crate::action::{SplitScenario, SplitSpec};
use crate::action::CandidateAction;
use crate::dcopf::DcOpfSolution;
use crate::error::{OtrError, Result};
use crate::network::Network;

const SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSensitivity {
    /// Injection transfer term.
    pub dv1: f64,
    /// Opening of the moved lines.
    pub dv2: f64,
    /// Equivalent lines among moved neighbors.
    pub dv3: f64,
    pub total: f64,
}

/// Moved lines as (line id, neighbor).
fn moved_lines(net: &Network, spec: &SplitSpec) -> Vec<(usize, usize)> {
    net.lines
        .iter()
        .filter(|l| l.in_service && l.touches(spec.bus))
        .filter_map(|l| {
            let k = l.other(spec.bus);
            spec.moved_neighbors.contains(&k).then_some((l.id, k))
        })
        .collect()
}

fn remaining_lines(net: &Network, spec: &SplitSpec) -> Vec<usize> {
    net.lines
        .iter()
        .filter(|l| {
            l.in_service && l.touches(spec.bus) && !spec.moved_neighbors.contains(&l.other(spec.bus))
        })
        .map(|l| l.id)
        .collect()
}

/// Total susceptance of the moved lines.
pub fn sigma(net: &Network, spec: &SplitSpec) -> f64 {
    moved_lines(net, spec).iter().map(|&(l, _)| net.lines[l].b).sum()
}

/// Aggregate susceptance b_nk per moved neighbor, in `moved_neighbors` order.
fn neighbor_weights(net: &Network, spec: &SplitSpec) -> Vec<(usize, f64)> {
    spec.moved_neighbors
        .iter()
        .map(|&k| {
            let b: f64 = net
                .lines_between(spec.bus, k)
                .iter()
                .map(|&l| net.lines[l].b)
                .sum();
            (k, b)
        })
        .collect()
}

/// Pre-split flow on the tie from the new busbar into bus n.
pub fn tie_flow(net: &Network, spec: &SplitSpec, theta: &[f64]) -> f64 {
    let n = spec.bus;
    spec.p_new
        - moved_lines(net, spec)
            .iter()
            .map(|&(l, k)| net.lines[l].b * (theta[n] - theta[k]))
            .sum::<f64>()
}

/// PTDF of line `l` for a unit transfer from bus `a` to bus `b`.
fn ptdf_transfer(psi: &DMatrix<f64>, l: usize, a: usize, b: usize) -> f64 {
    psi[(l, a)] - psi[(l, b)]
}

fn denominator(net: &Network, spec: &SplitSpec, psi: &DMatrix<f64>) -> Result<f64> {
    net.check_split(spec)?;
    let n = spec.bus;
    let moved = moved_lines(net, spec);
    let mut d = 0.0;
    for lj in remaining_lines(net, spec) {
        // orientation of line lj towards n
        let into_n = if net.lines[lj].to == n { 1.0 } else { -1.0 };
        for &(lk, k) in &moved {
            d += into_n * ptdf_transfer(psi, lj, k, n) * net.lines[lk].b;
        }
    }
    if d.abs() < SINGULAR_TOL {
        return Err(OtrError::Singular(format!(
            "split of bus {n} disconnects the flow path (denominator {d:.3e})"
        )));
    }
    Ok(d)
}

/// Flow on the opened tie after the split, p⁰ Σ / D.
pub fn fictitious_flow(net: &Network, spec: &SplitSpec, sol: &DcOpfSolution) -> Result<f64> {
    let psi = net.ptdf_matrix()?;
    fictitious_flow_with(net, spec, &sol.theta, &psi)
}

pub fn fictitious_flow_with(
    net: &Network,
    spec: &SplitSpec,
    theta: &[f64],
    psi: &DMatrix<f64>,
) -> Result<f64> {
    let d = denominator(net, spec, psi)?;
    Ok(tie_flow(net, spec, theta) * sigma(net, spec) / d)
}

/// Bus-split distribution factor of `line`.
pub fn bsdf(net: &Network, spec: &SplitSpec, line: usize) -> Result<f64> {
    let psi = net.ptdf_matrix()?;
    bsdf_with(net, spec, line, &psi)
}

pub fn bsdf_with(net: &Network, spec: &SplitSpec, line: usize, psi: &DMatrix<f64>) -> Result<f64> {
    let d = denominator(net, spec, psi)?;
    let num: f64 = moved_lines(net, spec)
        .iter()
        .map(|&(lk, k)| ptdf_transfer(psi, line, k, spec.bus) * net.lines[lk].b)
        .sum();
    Ok(num / d)
}

/// Δp and ΔB of the Kron-reduced split.
pub fn split_as_perturbation(
    net: &Network,
    spec: &SplitSpec,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    net.check_split(spec)?;
    let nb = net.n_buses();
    let n = spec.bus;
    let weights = neighbor_weights(net, spec);
    let sig: f64 = weights.iter().map(|w| w.1).sum();
    let mut dp = DVector::zeros(nb);
    let mut db = DMatrix::zeros(nb, nb);
    dp[n] = -spec.p_new;
    for &(k, bk) in &weights {
        dp[k] += bk / sig * spec.p_new;
        db[(n, n)] -= bk;
        db[(n, k)] += bk;
        db[(k, n)] += bk;
        for &(k2, bk2) in &weights {
            db[(k, k2)] -= bk * bk2 / sig;
        }
    }
    Ok((dp, db))
}

/// Kron reduction eliminating bus `e` from a square matrix.
pub fn kron_reduce(m: &DMatrix<f64>, e: usize) -> DMatrix<f64> {
    let n = m.nrows();
    let pivot = m[(e, e)];
    let keep: Vec<usize> = (0..n).filter(|&i| i != e).collect();
    DMatrix::from_fn(n - 1, n - 1, |i, j| {
        let (a, b) = (keep[i], keep[j]);
        m[(a, b)] - m[(a, e)] * m[(e, b)] / pivot
    })
}

/// Flows on the original line list after physically splitting the bus, for
/// a pre-split injection vector `injection` (which includes `p_new` at n).
pub fn post_split_flows(
    net: &Network,
    spec: &SplitSpec,
    injection: &DVector<f64>,
) -> Result<DVector<f64>> {
    let topo = SplitSpec {
        scenario: SplitScenario::None,
        ..spec.clone()
    };
    let split = net.apply_action(&CandidateAction::Split(topo))?;
    let mut inj = injection.clone().resize_vertically(net.n_buses() + 1, 0.0);
    inj[spec.bus] -= spec.p_new;
    inj[net.n_buses()] = spec.p_new;
    let (_, flows) = split.dc_power_flow(&inj)?;
    Ok(flows)
}

/// Flows on the original line list from the reduced model
/// (B⁰ + ΔB) θ' = p + Δp. Moved lines report zero.
pub fn reduced_model_flows(
    net: &Network,
    spec: &SplitSpec,
    injection: &DVector<f64>,
) -> Result<DVector<f64>> {
    let (dp, db) = split_as_perturbation(net, spec)?;
    let nb = net.n_buses();
    let mut mat = net.susceptance_matrix() + db;
    let shift = 1.0 / nb as f64;
    mat.add_scalar_mut(shift);
    let rhs = injection + dp;
    let theta = mat
        .lu()
        .solve(&rhs)
        .ok_or_else(|| OtrError::Singular("reduced post-split system is singular".into()))?;
    let moved: Vec<usize> = moved_lines(net, spec).iter().map(|m| m.0).collect();
    let mut flows = net.flows_from_angles(&theta);
    for l in moved {
        flows[l] = 0.0;
    }
    Ok(flows)
}

/// First-order cost change of a split: transfer, line-opening and
/// line-connection terms.
pub fn split_sensitivity(
    net: &Network,
    sol: &DcOpfSolution,
    spec: &SplitSpec,
) -> Result<SplitSensitivity> {
    net.check_split(spec)?;
    let n = spec.bus;
    let lam = &sol.lambda;
    let weights = neighbor_weights(net, spec);
    let sig: f64 = weights.iter().map(|w| w.1).sum();

    let dv1 = spec.p_new
        * (lam[n] - weights.iter().map(|&(k, bk)| bk / sig * lam[k]).sum::<f64>());

    let dv2: f64 = moved_lines(net, spec)
        .iter()
        .map(|&(l, _)| {
            let line = &net.lines[l];
            -(sol.mu_hi[l] - sol.mu_lo[l] + lam[line.from] - lam[line.to]) * sol.flows[l]
        })
        .sum();

    let mut dv3 = 0.0;
    for (a, &(k1, b1)) in weights.iter().enumerate() {
        for &(k2, b2) in &weights[a + 1..] {
            // Existing line between the pair contributes its flow multiplier,
            // taken from the lowest-id line and oriented k1 → k2.
            let mu = net.lines_between(k1, k2).first().map_or(0.0, |&l| {
                let m = sol.mu_hi[l] - sol.mu_lo[l];
                if net.lines[l].from == k1 {
                    m
                } else {
                    -m
                }
            });
            dv3 += (mu + lam[k1] - lam[k2]) * (sol.theta[k1] - sol.theta[k2]) * b1 * b2 / sig;
        }
    }
    if spec.is_restricted() {
        assert_eq!(dv3, 0.0, "restricted split has no neighbor pairs");
    }
    Ok(SplitSensitivity {
        dv1,
        dv2,
        dv3,
        total: dv1 + dv2 + dv3,
    })
}

/// Net injection that moves to the new busbar under `scenario`.
pub fn scenario_injection(net: &Network, sol: &DcOpfSolution, bus: usize, scenario: SplitScenario) -> f64 {
    let load = net.buses[bus].pd;
    let gen: f64 = net.gens_at(bus).iter().map(|&g| sol.pg[g]).sum();
    match scenario {
        SplitScenario::LoadOnly => -load,
        SplitScenario::GenOnly => gen,
        SplitScenario::Both => gen - load,
        SplitScenario::None => 0.0,
    }
}

/// Scenarios that apply at `bus`: load moves need a load, generation moves
/// need a generator, and `none` always applies.
pub fn applicable_scenarios(net: &Network, bus: usize) -> Vec<SplitScenario> {
    let has_load = net.buses[bus].pd != 0.0;
    let has_gen = !net.gens_at(bus).is_empty();
    SplitScenario::ALL
        .into_iter()
        .filter(|s| match s {
            SplitScenario::LoadOnly => has_load,
            SplitScenario::GenOnly => has_gen,
            SplitScenario::Both => has_load && has_gen,
            SplitScenario::None => true,
        })
        .collect()
}

/// Every restricted split: each bus with at least two distinct neighbors,
/// each neighbor, each applicable scenario.
pub fn enumerate_splits(net: &Network, sol: &DcOpfSolution) -> Vec<SplitSpec> {
    let mut out = Vec::new();
    for bus in 0..net.n_buses() {
        let nbrs = net.neighbors(bus);
        if nbrs.len() < 2 {
            continue;
        }
        let scenarios = applicable_scenarios(net, bus);
        for &k in &nbrs {
            for &scenario in &scenarios {
                out.push(SplitSpec {
                    bus,
                    moved_neighbors: vec![k],
                    scenario,
                    p_new: scenario_injection(net, sol, bus, scenario),
                });
            }
        }
    }
    out
}

/// Splits that keep the network connected and have a usable denominator.
pub fn viable_splits(net: &Network, sol: &DcOpfSolution) -> Result<Vec<SplitSpec>> {
    let psi = net.ptdf_matrix()?;
    Ok(enumerate_splits(net, sol)
        .into_iter()
        .filter(|spec| {
            let removed: Vec<usize> = moved_lines(net, spec).iter().map(|m| m.0).collect();
            if !net.connected_without(&removed) {
                debug!("skipping split of bus {} toward {:?}: islands", spec.bus, spec.moved_neighbors);
                return false;
            }
            match denominator(net, spec, &psi) {
                Ok(_) => true,
                Err(e) => {
                    debug!("skipping split: {e}");
                    false
                }
            }
        })
        .collect())
}
