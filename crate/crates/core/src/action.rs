//! Topology actions: line openings and restricted bus splits.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Which injections at the split bus move to the new busbar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitScenario {
    LoadOnly,
    GenOnly,
    Both,
    None,
}

impl SplitScenario {
    pub const ALL: [SplitScenario; 4] = [
        SplitScenario::LoadOnly,
        SplitScenario::GenOnly,
        SplitScenario::Both,
        SplitScenario::None,
    ];

    pub fn moves_load(self) -> bool {
        matches!(self, SplitScenario::LoadOnly | SplitScenario::Both)
    }

    pub fn moves_gen(self) -> bool {
        matches!(self, SplitScenario::GenOnly | SplitScenario::Both)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SplitScenario::LoadOnly => "load_only",
            SplitScenario::GenOnly => "gen_only",
            SplitScenario::Both => "both",
            SplitScenario::None => "none",
        }
    }
}

/// A bus split. `bus` and `moved_neighbors` are internal (0-based) bus
/// indices; every in-service line between `bus` and a moved neighbor is
/// re-terminated on the new busbar.
///
/// `p_new` is the net injection (generation minus load, p.u.) that ends up on
/// the new busbar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub bus: usize,
    pub moved_neighbors: Vec<usize>,
    pub scenario: SplitScenario,
    pub p_new: f64,
}

impl SplitSpec {
    pub fn is_restricted(&self) -> bool {
        self.moved_neighbors.len() == 1
    }
}

/// A single reconfiguration action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CandidateAction {
    OpenLine { line: usize },
    Split(SplitSpec),
}

impl CandidateAction {
    pub fn is_line(&self) -> bool {
        matches!(self, CandidateAction::OpenLine { .. })
    }

    /// Short tag for reports: `line` or `split`.
    pub fn kind(&self) -> &'static str {
        match self {
            CandidateAction::OpenLine { .. } => "line",
            CandidateAction::Split(_) => "split",
        }
    }

    /// Ordering key used for deterministic tie-breaking.
    pub(crate) fn sort_key(&self) -> (u8, usize, usize, u8) {
        match self {
            CandidateAction::OpenLine { line } => (0, *line, 0, 0),
            CandidateAction::Split(s) => (
                1,
                s.bus,
                s.moved_neighbors.first().copied().unwrap_or(0),
                s.scenario as u8,
            ),
        }
    }
}

impl fmt::Display for CandidateAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidateAction::OpenLine { line } => write!(f, "open line {line}"),
            CandidateAction::Split(s) => {
                let moved: Vec<String> = s.moved_neighbors.iter().map(|k| k.to_string()).collect();
                write!(
                    f,
                    "split bus {} moving [{}] ({})",
                    s.bus,
                    moved.join(","),
                    s.scenario.as_str()
                )
            }
        }
    }
}
