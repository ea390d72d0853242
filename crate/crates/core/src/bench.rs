//! Method runs, the brute-force single-action oracle and result tables.

use std::fmt::Write as _;
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::CandidateAction;
use crate::bus_split::enumerate_splits;
use crate::dcopf::{optimal_cost, solve_opf};
use crate::error::{OtrError, Result};
use crate::network::Network;
use crate::pivot::{improved_heuristic_with, rank_all, BENEFIT_TOL, DEFAULT_T};
use crate::sensitivity::{baseline_criterion, element_label, rank_lines, CandidateRanking, Method};

/// Literal used for infeasible or islanded outcomes.
pub const NA: &str = "N/A";

/// Cost after applying `action` and re-solving, `None` when the result is
/// islanded or infeasible.
pub fn post_action_cost(net: &Network, action: &CandidateAction) -> Option<f64> {
    let modified = net.apply_action(action).ok()?;
    optimal_cost(&modified).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub case: String,
    pub method: Method,
    pub base_cost: f64,
    /// Re-solved cost after the action; `None` when infeasible.
    pub cost: Option<f64>,
    /// Seconds spent selecting the action, excluding the verification solve.
    pub wall_time: f64,
    pub action: Option<CandidateAction>,
    pub element: Option<String>,
}

/// Single action chosen by `method`, or `None` if it finds no improvement.
pub fn select_action(net: &Network, method: Method) -> Result<Option<CandidateAction>> {
    let solved = solve_opf(net)?;
    let sol = &solved.solution;
    let pick = |r: &CandidateRanking, need_gain: bool| {
        r.entries
            .first()
            .filter(|e| !need_gain || e.score < BENEFIT_TOL)
            .map(|e| e.action.clone())
    };
    Ok(match method {
        Method::M0 | Method::M1 => pick(&baseline_criterion(net, sol, method)?, false),
        Method::M2 => pick(&rank_lines(net, sol), true),
        Method::Ruiz => pick(&crate::sensitivity::rank_lines_ruiz(net, sol), true),
        Method::M3 => pick(&combined_ranking(net, &solved)?, true),
        Method::M4 => improved_heuristic_with(net, &solved, DEFAULT_T)?.0,
    })
}

/// Lines and restricted splits ranked together by first-order Δv.
pub fn combined_ranking(net: &Network, solved: &crate::dcopf::SolvedOpf) -> Result<CandidateRanking> {
    let (lines, splits) = rank_all(net, solved)?;
    let mut entries = lines.entries;
    entries.extend(splits.entries);
    Ok(CandidateRanking::new(Method::M3, entries))
}

pub fn run_method(net: &Network, method: Method) -> Result<MethodResult> {
    let base_cost = optimal_cost(net)?;
    let start = Instant::now();
    let action = select_action(net, method)?;
    let wall_time = start.elapsed().as_secs_f64();
    let cost = match &action {
        Some(a) => post_action_cost(net, a),
        None => Some(base_cost),
    };
    info!(
        "{} {}: {:?} in {:.3}s",
        net.name,
        method.as_str(),
        cost,
        wall_time
    );
    Ok(MethodResult {
        case: net.name.clone(),
        method,
        base_cost,
        cost,
        wall_time,
        element: action.as_ref().map(|a| element_label(net, a)),
        action,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Lines,
    Splits,
    Both,
}

impl std::str::FromStr for Scope {
    type Err = OtrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lines" => Ok(Scope::Lines),
            "splits" => Ok(Scope::Splits),
            "both" => Ok(Scope::Both),
            other => Err(OtrError::Validation(format!("unknown scope `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub action: CandidateAction,
    pub element: String,
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub scope: Scope,
    pub base_cost: f64,
    pub best_action: Option<CandidateAction>,
    pub best_cost: Option<f64>,
    pub entries: Vec<OracleEntry>,
}

impl OracleResult {
    pub fn cost_of(&self, action: &CandidateAction) -> Option<f64> {
        self.entries.iter().find(|e| &e.action == action).and_then(|e| e.cost)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["action_type", "element", "cost"]).expect("in-memory write");
        for e in &self.entries {
            let cost = e.cost.map_or(NA.to_string(), |c| format!("{c:.6}"));
            w.write_record([e.action.kind(), &e.element, &cost]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("OTR_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            b = b.num_threads(n);
        }
    }
    b.build().map_err(|e| OtrError::Internal(e.to_string()))
}

/// Applies every single action in `scope` and re-solves.
pub fn oracle(net: &Network, scope: Scope) -> Result<OracleResult> {
    let solved = solve_opf(net)?;
    let mut actions = Vec::new();
    if scope != Scope::Splits {
        actions.extend(
            net.lines
                .iter()
                .filter(|l| l.in_service)
                .map(|l| CandidateAction::OpenLine { line: l.id }),
        );
    }
    if scope != Scope::Lines {
        actions.extend(
            enumerate_splits(net, &solved.solution)
                .into_iter()
                .map(CandidateAction::Split),
        );
    }
    let costs: Vec<Option<f64>> =
        thread_pool()?.install(|| actions.par_iter().map(|a| post_action_cost(net, a)).collect());
    let entries: Vec<OracleEntry> = actions
        .into_iter()
        .zip(costs)
        .map(|(action, cost)| OracleEntry {
            element: element_label(net, &action),
            action,
            cost,
        })
        .collect();
    let best = entries
        .iter()
        .filter_map(|e| e.cost.map(|c| (c, e)))
        .min_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then_with(|| a.1.action.sort_key().cmp(&b.1.action.sort_key()))
        });
    Ok(OracleResult {
        scope,
        base_cost: solved.solution.objective,
        best_action: best.map(|b| b.1.action.clone()),
        best_cost: best.map(|b| b.0),
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = OtrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(OtrError::Validation(format!("unknown format `{other}`"))),
        }
    }
}

const COLUMNS: [&str; 5] = ["case", "method", "cost", "time_s", "action"];

fn row(r: &MethodResult) -> [String; 5] {
    [
        r.case.clone(),
        r.method.as_str().to_string(),
        r.cost.map_or(NA.to_string(), |c| format!("{c:.6}")),
        format!("{:.6}", r.wall_time),
        r.element.clone().unwrap_or_else(|| "none".into()),
    ]
}

pub fn emit_report(results: &[MethodResult], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(COLUMNS).expect("in-memory write");
            for r in results {
                w.write_record(row(r)).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
        }
        ReportFormat::Markdown => {
            let mut out = format!("| {} |\n|{}\n", COLUMNS.join(" | "), "---|".repeat(COLUMNS.len()));
            for r in results {
                let _ = writeln!(out, "| {} |", row(r).join(" | "));
            }
            out
        }
        ReportFormat::Json => {
            let rows: Vec<serde_json::Value> = results
                .iter()
                .map(|r| {
                    let cells = row(r);
                    let mut obj = serde_json::Map::new();
                    for (k, v) in COLUMNS.iter().zip(cells) {
                        obj.insert((*k).into(), serde_json::Value::String(v));
                    }
                    serde_json::Value::Object(obj)
                })
                .collect();
            serde_json::to_string_pretty(&rows).expect("json") + "\n"
        }
    }
}
