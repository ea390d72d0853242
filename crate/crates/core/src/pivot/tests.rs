use super::*;
use crate::action::SplitSpec;
use crate::cases;
use crate::matpower::parse_case;
use approx::assert_abs_diff_eq;

fn case14_congested() -> Network {
    parse_case(include_str!("../../../../cases/pglib_opf_case14_ieee.m"))
        .unwrap()
        .with_scaled_limits(0.6)
}

fn all_actions(net: &Network, solved: &SolvedOpf) -> Vec<CandidateAction> {
    let (lines, splits) = rank_all(net, solved).unwrap();
    lines
        .entries
        .into_iter()
        .chain(splits.entries)
        .map(|e| e.action)
        .collect()
}

#[test]
fn out_of_service_line_is_rejected() {
    let mut net = cases::three_bus_congested();
    net.lines[0].in_service = false;
    net.lines.push(crate::network::Line {
        id: 3,
        ..net.lines[0].clone()
    });
    net.lines[3].in_service = true;
    let s = solve_opf(&net).unwrap();
    let err = column_delta(&s.lp, &s.solution.basis, &CandidateAction::OpenLine { line: 0 });
    assert!(matches!(err, Err(OtrError::Precondition(_))));
}

#[test]
fn modified_columns_match_rebuilt_lp() {
    let net = cases::four_bus_braess();
    let s = solve_opf(&net).unwrap();
    for l in 0..net.n_lines() {
        let a = CandidateAction::OpenLine { line: l };
        let d = column_delta(&s.lp, &s.solution.basis, &a).unwrap();
        let mut opened = net.clone();
        opened.lines[l].in_service = false;
        let rebuilt = crate::dcopf::to_standard_form(&crate::dcopf::build_opf(&opened).unwrap());
        assert_eq!(d.modified_columns(&s.lp), rebuilt.cols);
        // A' = A + W sᵀ on the touched columns when a rank-1 form is present
        if let Some(r1) = &d.rank1 {
            let sv = [1.0, -1.0, -1.0, 1.0];
            for (j, s_j) in d.modified_cols.iter().zip(sv) {
                let old = s.lp.cols[*j].to_dense(s.lp.n_rows());
                let new = d.column(&s.lp, *j).to_dense(s.lp.n_rows());
                for r in 0..old.len() {
                    assert_abs_diff_eq!(new[r] - old[r], r1.delta * r1.u[r] * s_j, epsilon = 1e-12);
                }
            }
        }
    }
}

#[test]
fn sherman_morrison_matches_refactorization() {
    let net = case14_congested();
    let s = solve_opf(&net).unwrap();
    let basis = &s.solution.basis;
    let mut checked = 0;
    for a in all_actions(&net, &s) {
        let d = column_delta(&s.lp, basis, &a).unwrap();
        let Some(r1) = &d.rank1 else { continue };
        let Ok(upd) = UpdatedBasis::rank1(&basis.factor, r1) else { continue };
        let cols: Vec<SparseCol> = basis
            .basic_idx
            .iter()
            .map(|&j| d.column(&s.lp, j).clone())
            .collect();
        let refs: Vec<&SparseCol> = cols.iter().collect();
        let Ok(fresh) = BasisFactor::new(s.lp.n_rows(), &refs) else { continue };
        let rhs = d.rhs(&s.lp);
        let x1 = upd.solve(&rhs);
        let x2 = fresh.ftran(&rhs);
        let scale = x2.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).abs() <= 1e-8 * scale, "{a} vs {b}");
        }
        checked += 1;
    }
    assert!(checked > 10, "only {checked} rank-1 cases");
}

#[test]
fn zero_delta_is_identity() {
    let net = cases::three_bus_congested();
    let s = solve_opf(&net).unwrap();
    let b = &s.solution.basis;
    let m = s.lp.n_rows();
    let r1 = Rank1 {
        u: vec![1.0; m],
        v: vec![1.0; m],
        delta: 0.0,
    };
    let upd = UpdatedBasis::rank1(&b.factor, &r1).unwrap();
    let x = upd.solve(&s.lp.b);
    for (a, b) in x.iter().zip(&b.x_b) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}

#[test]
fn recheck_agrees_with_full_pricing() {
    for net in [cases::three_bus_congested(), cases::four_bus_braess(), case14_congested()] {
        let s = solve_opf(&net).unwrap();
        let basis = &s.solution.basis;
        for a in all_actions(&net, &s) {
            let d = column_delta(&s.lp, basis, &a).unwrap();
            if d.basis_touched {
                assert!(nonbasic_recheck(&s.lp, basis, &d).is_err());
                continue;
            }
            let full = basis
                .nonbasic_idx
                .iter()
                .any(|&j| s.lp.c[j] - d.column(&s.lp, j).dot(&basis.y) < -OPT_TOL);
            let verdict = nonbasic_recheck(&s.lp, basis, &d).unwrap();
            assert_eq!(verdict == Recheck::StillOptimal, !full);
        }
    }
}

#[test]
fn estimates_never_undercut_exact() {
    for net in [cases::three_bus_congested(), cases::four_bus_braess(), case14_congested()] {
        let s = solve_opf(&net).unwrap();
        let basis = &s.solution.basis;
        for a in all_actions(&net, &s) {
            let d = column_delta(&s.lp, basis, &a).unwrap();
            let est = refine_delta(&s.lp, basis, &d).unwrap();
            let exact = exact_delta(&s.lp, basis, &d).unwrap();
            if let (Some(e), Some(x)) = (est.delta_cost, exact) {
                assert!(e >= x - 1e-7 * (1.0 + x.abs()), "{a}: {e} < {x}");
            }
            if exact.is_none() {
                assert!(est.delta_cost.is_none(), "{a}: estimate on an infeasible LP");
            }
        }
    }
}

#[test]
fn binding_line_update_is_singular() {
    // line 2 is at its limit, so its upper slack is nonbasic and the opened
    // row of B(δ) vanishes
    let net = cases::three_bus_congested();
    let s = solve_opf(&net).unwrap();
    let est = refine(&s.lp, &s.solution.basis, &CandidateAction::OpenLine { line: 2 }).unwrap();
    assert_eq!(est.path, PivotPath::InfeasibleDiscarded);
    assert!(est.delta_cost.is_none());
}

#[test]
fn restricted_split_without_injection_equals_line_opening() {
    let net = case14_congested();
    let s = solve_opf(&net).unwrap();
    let basis = &s.solution.basis;
    let l = net.lines.iter().find(|l| net.lines_between(l.from, l.to).len() == 1).unwrap();
    let split = CandidateAction::Split(SplitSpec {
        bus: l.from,
        moved_neighbors: vec![l.to],
        scenario: SplitScenario::None,
        p_new: 0.0,
    });
    let a = refine(&s.lp, basis, &split).unwrap();
    let b = refine(&s.lp, basis, &CandidateAction::OpenLine { line: l.id }).unwrap();
    assert_eq!(a.delta_cost, b.delta_cost);
    assert_eq!(a.path, b.path);
}

#[test]
fn heuristic_report_is_sorted() {
    let net = case14_congested();
    let (best, report) = improved_heuristic(&net, DEFAULT_T).unwrap();
    assert!(report.entries.len() <= 2 * DEFAULT_T);
    let costs: Vec<f64> = report
        .entries
        .iter()
        .map(|e| e.pivot_dcost.unwrap_or(f64::INFINITY))
        .collect();
    assert!(costs.windows(2).all(|w| w[0] <= w[1]));
    if let Some(b) = &best {
        assert_eq!(&report.entries[0].action, b);
    }
    let json = report.to_json();
    assert!(json["entries"][0].get("pivot_path").is_some());
}

#[test]
fn heuristic_rejects_zero_t() {
    assert!(improved_heuristic(&cases::three_bus_congested(), 0).is_err());
}

#[test]
fn uncongested_has_no_beneficial_action() {
    let (best, report) = improved_heuristic(&cases::two_bus(), DEFAULT_T).unwrap();
    assert!(best.is_none());
    assert!(report.notes.iter().any(|n| n.contains("no beneficial")));
}

#[test]
fn iterative_opening_stays_connected() {
    let net = case14_congested();
    let r = iterative_line_opening(&net, Method::M2, 3).unwrap();
    assert!(r.steps.len() <= 3);
    assert!(r.network.is_connected());
    if let Some(last) = r.steps.last() {
        assert_abs_diff_eq!(last.cost, r.final_cost);
    }
    assert!(iterative_line_opening(&net, Method::M3, 1).is_err());
}
