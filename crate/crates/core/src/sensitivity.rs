//! First-order cost effects of line switching, plus transfer and
//! line-addition sensitivities.

use serde::{Deserialize, Serialize};

use crate::action::CandidateAction;
use crate::dcopf::DcOpfSolution;
use crate::error::{OtrError, Result};
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    M0,
    M1,
    M2,
    M3,
    M4,
    Ruiz,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::M0 => "M0",
            Method::M1 => "M1",
            Method::M2 => "M2",
            Method::M3 => "M3",
            Method::M4 => "M4",
            Method::Ruiz => "RUIZ",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = OtrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m0" => Ok(Method::M0),
            "m1" => Ok(Method::M1),
            "m2" => Ok(Method::M2),
            "m3" => Ok(Method::M3),
            "m4" => Ok(Method::M4),
            "ruiz" => Ok(Method::Ruiz),
            other => Err(OtrError::Validation(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSensitivity {
    pub line: usize,
    /// ∂v/∂b for the line, $ per p.u. susceptance.
    pub dv_db: f64,
    /// First-order cost change of opening the line, $.
    pub delta_v: f64,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub action: CandidateAction,
    /// Lower is better.
    pub score: f64,
}

/// Candidates sorted by (score, action class, element id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRanking {
    pub method: Method,
    pub entries: Vec<RankedCandidate>,
    pub tie_policy: String,
}

pub(crate) const TIE_POLICY: &str = "score ascending, then lines before splits, then element id";

impl CandidateRanking {
    pub fn new(method: Method, mut entries: Vec<RankedCandidate>) -> Self {
        entries.sort_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then_with(|| a.action.sort_key().cmp(&b.action.sort_key()))
        });
        CandidateRanking {
            method,
            entries,
            tie_policy: TIE_POLICY.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn top(&self, t: usize) -> &[RankedCandidate] {
        &self.entries[..t.min(self.entries.len())]
    }

    pub fn to_json(&self, net: &Network) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .entries
            .iter()
            .map(|e| {
                serde_json::json!({
                    "action_type": e.action.kind(),
                    "element": element_label(net, &e.action),
                    "score_usd": e.score,
                    "method": self.method.as_str(),
                    "action": e.action,
                })
            })
            .collect();
        serde_json::json!({
            "method": self.method.as_str(),
            "tie_policy": self.tie_policy,
            "entries": rows,
        })
    }

    pub fn to_csv(&self, net: &Network) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["action_type", "element", "score_usd", "method"])
            .expect("write to memory");
        for e in &self.entries {
            w.write_record([
                e.action.kind().to_string(),
                element_label(net, &e.action),
                format!("{:.9}", e.score),
                self.method.as_str().to_string(),
            ])
            .expect("write to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 output")
    }
}

/// Compact label with external bus numbers, e.g. `L12:5-6` or
/// `S96>97:load_only`.
pub fn element_label(net: &Network, action: &CandidateAction) -> String {
    match action {
        CandidateAction::OpenLine { line } => {
            let l = &net.lines[*line];
            format!("L{}:{}-{}", line, net.buses[l.from].id, net.buses[l.to].id)
        }
        CandidateAction::Split(s) => {
            let moved: Vec<String> = s
                .moved_neighbors
                .iter()
                .map(|&k| net.buses[k].id.to_string())
                .collect();
            format!(
                "S{}>{}:{}",
                net.buses[s.bus].id,
                moved.join("+"),
                s.scenario.as_str()
            )
        }
    }
}

fn in_service_line(net: &Network, line: usize) -> Result<&crate::network::Line> {
    match net.lines.get(line) {
        Some(l) if l.in_service => Ok(l),
        Some(_) => Err(OtrError::Precondition(format!("line {line} is out of service"))),
        None => Err(OtrError::Precondition(format!("line {line} does not exist"))),
    }
}

/// ∂v/∂b = (μ̄ − μ̲ + λᵢ − λⱼ)(θᵢ − θⱼ) and Δv = −(μ̄ − μ̲ + λᵢ − λⱼ) f.
pub fn line_switch_sensitivity(
    net: &Network,
    sol: &DcOpfSolution,
    line: usize,
) -> Result<LineSensitivity> {
    let l = in_service_line(net, line)?;
    let price = sol.mu_hi[line] - sol.mu_lo[line] + sol.lambda[l.from] - sol.lambda[l.to];
    Ok(LineSensitivity {
        line,
        dv_db: price * (sol.theta[l.from] - sol.theta[l.to]),
        delta_v: -price * sol.flows[line],
        method: Method::M2,
    })
}

/// −(μ̄ − μ̲) f, the metric without the price-difference term.
pub fn ruiz_metric(net: &Network, sol: &DcOpfSolution, line: usize) -> Result<LineSensitivity> {
    let l = in_service_line(net, line)?;
    let mu = sol.mu_hi[line] - sol.mu_lo[line];
    Ok(LineSensitivity {
        line,
        dv_db: mu * (sol.theta[l.from] - sol.theta[l.to]),
        delta_v: -mu * sol.flows[line],
        method: Method::Ruiz,
    })
}

/// Cost change per p.u. moved from bus `h` to bus `k`: λₖ − λₕ.
pub fn transfer_sensitivity(sol: &DcOpfSolution, h: usize, k: usize) -> f64 {
    sol.lambda[k] - sol.lambda[h]
}

/// Cost change per p.u. of susceptance added between `h` and `k`.
pub fn line_addition_sensitivity(sol: &DcOpfSolution, h: usize, k: usize) -> f64 {
    (sol.lambda[h] - sol.lambda[k]) * (sol.theta[h] - sol.theta[k])
}

/// In-service lines whose opening keeps the network connected.
pub fn switchable_lines(net: &Network) -> Vec<usize> {
    net.lines
        .iter()
        .filter(|l| l.in_service && net.connected_without(&[l.id]))
        .map(|l| l.id)
        .collect()
}

/// Lines ranked by ascending M2 Δv.
pub fn rank_lines(net: &Network, sol: &DcOpfSolution) -> CandidateRanking {
    let entries = switchable_lines(net)
        .into_iter()
        .map(|l| RankedCandidate {
            action: CandidateAction::OpenLine { line: l },
            score: line_switch_sensitivity(net, sol, l)
                .expect("switchable lines are in service")
                .delta_v,
        })
        .collect();
    CandidateRanking::new(Method::M2, entries)
}

/// Lines ranked by ascending Ruiz metric.
pub fn rank_lines_ruiz(net: &Network, sol: &DcOpfSolution) -> CandidateRanking {
    let entries = switchable_lines(net)
        .into_iter()
        .map(|l| RankedCandidate {
            action: CandidateAction::OpenLine { line: l },
            score: ruiz_metric(net, sol, l).expect("in service").delta_v,
        })
        .collect();
    CandidateRanking::new(Method::Ruiz, entries)
}

/// Profit-based baselines over lines with f(πᵢ − πⱼ) < 0, with π = λ.
/// M0 ranks by |πᵢ − πⱼ|, M1 by |f(πᵢ − πⱼ)|, both descending; the stored
/// score is the negated magnitude so that lower is better.
pub fn baseline_criterion(
    net: &Network,
    sol: &DcOpfSolution,
    mode: Method,
) -> Result<CandidateRanking> {
    if !matches!(mode, Method::M0 | Method::M1) {
        return Err(OtrError::Validation(format!(
            "baseline criterion needs M0 or M1, got {}",
            mode.as_str()
        )));
    }
    let entries = switchable_lines(net)
        .into_iter()
        .filter_map(|id| {
            let l = &net.lines[id];
            let dpi = sol.lambda[l.from] - sol.lambda[l.to];
            let profit = sol.flows[id] * dpi;
            if profit < 0.0 {
                let magnitude = if mode == Method::M0 { dpi.abs() } else { profit.abs() };
                Some(RankedCandidate {
                    action: CandidateAction::OpenLine { line: id },
                    score: -magnitude,
                })
            } else {
                None
            }
        })
        .collect();
    Ok(CandidateRanking::new(mode, entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::dcopf::solve_opf;
    use approx::assert_abs_diff_eq;

    #[test]
    fn three_bus_values() {
        let net = cases::three_bus_congested();
        let s = solve_opf(&net).unwrap().solution;
        // line 2 (1-3): μ̄ = 60, λ₁ − λ₃ = −40, f = 0.6
        let m2 = line_switch_sensitivity(&net, &s, 2).unwrap();
        assert_abs_diff_eq!(m2.delta_v, -12.0, epsilon = 1e-8);
        assert_abs_diff_eq!(m2.delta_v, -m2.dv_db * net.lines[2].b, epsilon = 1e-9);
        let ruiz = ruiz_metric(&net, &s, 2).unwrap();
        assert_abs_diff_eq!(ruiz.delta_v, -36.0, epsilon = 1e-8);
        // the two differ by (λⱼ − λᵢ) f
        assert_abs_diff_eq!(m2.delta_v - ruiz.delta_v, (50.0 - 10.0) * 0.6, epsilon = 1e-8);
        assert_abs_diff_eq!(transfer_sensitivity(&s, 0, 2), 40.0, epsilon = 1e-8);
        assert_eq!(transfer_sensitivity(&s, 1, 1), 0.0);
    }

    #[test]
    fn flat_prices_give_zero() {
        let mut net = cases::three_bus_congested();
        net.lines[2].f_max = 10.0;
        net.lines[2].f_min = -10.0;
        let s = solve_opf(&net).unwrap().solution;
        for l in 0..3 {
            assert_abs_diff_eq!(line_switch_sensitivity(&net, &s, l).unwrap().delta_v, 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(ruiz_metric(&net, &s, l).unwrap().delta_v, 0.0, epsilon = 1e-9);
        }
        assert!(baseline_criterion(&net, &s, Method::M0).unwrap().is_empty());
        assert!(baseline_criterion(&net, &s, Method::M1).unwrap().is_empty());
        assert_abs_diff_eq!(line_addition_sensitivity(&s, 0, 2), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn out_of_service_line_rejected() {
        let mut net = cases::three_bus_congested();
        let s = solve_opf(&net).unwrap().solution;
        net.lines[0].in_service = false;
        assert!(matches!(
            line_switch_sensitivity(&net, &s, 0),
            Err(OtrError::Precondition(_))
        ));
    }

    #[test]
    fn baseline_filter_and_order() {
        let net = cases::three_bus_congested();
        let s = solve_opf(&net).unwrap().solution;
        for mode in [Method::M0, Method::M1] {
            let r = baseline_criterion(&net, &s, mode).unwrap();
            for e in &r.entries {
                let CandidateAction::OpenLine { line } = e.action else { unreachable!() };
                let l = &net.lines[line];
                assert!(s.flows[line] * (s.lambda[l.from] - s.lambda[l.to]) < 0.0);
            }
            assert!(r.entries.windows(2).all(|w| w[0].score <= w[1].score));
        }
        assert!(baseline_criterion(&net, &s, Method::M2).is_err());
    }

    #[test]
    fn ranking_csv_header() {
        let net = cases::three_bus_congested();
        let s = solve_opf(&net).unwrap().solution;
        let csv = rank_lines(&net, &s).to_csv(&net);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("action_type,element,score_usd,method"));
        assert_eq!(lines.count(), 3);
    }
}
