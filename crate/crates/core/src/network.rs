//! Network data and the graph matrices derived from it.
//!
//! Buses are addressed by internal 0-based index everywhere; `Bus::id` keeps
//! the external number from the case file for reporting.

use nalgebra::{DMatrix, DVector};
use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::action::{CandidateAction, SplitSpec};
use crate::error::{OtrError, Result};

/// Flow bound used for lines without a rating (p.u.).
pub const UNLIMITED_FLOW: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BusKind {
    Pq,
    Pv,
    Ref,
    Isolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// External bus number.
    pub id: usize,
    pub kind: BusKind,
    /// Load in p.u.
    pub pd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    /// Internal bus index.
    pub bus: usize,
    /// Linear cost, $ per MW.
    pub cost: f64,
    pub p_min: f64,
    pub p_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    /// Negative susceptance, 1/x.
    pub b: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub in_service: bool,
}

impl Line {
    pub fn touches(&self, bus: usize) -> bool {
        self.from == bus || self.to == bus
    }

    /// The endpoint opposite `bus`.
    pub fn other(&self, bus: usize) -> usize {
        if self.from == bus {
            self.to
        } else {
            self.from
        }
    }

    pub fn connects(&self, a: usize, b: usize) -> bool {
        (self.from == a && self.to == b) || (self.from == b && self.to == a)
    }

    pub fn is_rated(&self) -> bool {
        self.f_max < UNLIMITED_FLOW || self.f_min > -UNLIMITED_FLOW
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub lines: Vec<Line>,
    /// Internal index of the reference bus (reporting only).
    pub reference_bus: usize,
}

impl Network {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn n_gens(&self) -> usize {
        self.generators.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_buses();
        if n == 0 {
            return Err(OtrError::Validation("network has no buses".into()));
        }
        for bus in &self.buses {
            if !bus.pd.is_finite() {
                return Err(OtrError::Validation(format!("bus {} has non-finite load", bus.id)));
            }
        }
        for (k, g) in self.generators.iter().enumerate() {
            if g.bus >= n {
                return Err(OtrError::Validation(format!("generator {k} references missing bus")));
            }
            if !(g.cost.is_finite() && g.p_min.is_finite() && g.p_max.is_finite())
                || g.p_min > g.p_max
            {
                return Err(OtrError::Validation(format!("generator {k} has invalid data")));
            }
        }
        for l in &self.lines {
            if l.from >= n || l.to >= n {
                return Err(OtrError::Validation(format!("line {} references missing bus", l.id)));
            }
            if l.from == l.to {
                return Err(OtrError::Validation(format!("line {} is a self-loop", l.id)));
            }
            if l.in_service && !(l.b.is_finite() && l.b > 0.0) {
                return Err(OtrError::Validation(format!(
                    "line {} has non-positive susceptance {}",
                    l.id, l.b
                )));
            }
            if l.f_min > l.f_max {
                return Err(OtrError::Validation(format!("line {} has f_min > f_max", l.id)));
            }
        }
        if self.reference_bus >= n {
            return Err(OtrError::Validation("reference bus out of range".into()));
        }
        Ok(())
    }

    /// Internal index of the bus with external number `id`.
    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    /// Load vector in p.u.
    pub fn loads(&self) -> DVector<f64> {
        DVector::from_iterator(self.n_buses(), self.buses.iter().map(|b| b.pd))
    }

    pub fn total_load(&self) -> f64 {
        self.buses.iter().map(|b| b.pd).sum()
    }

    /// Generator indices located at `bus`.
    pub fn gens_at(&self, bus: usize) -> Vec<usize> {
        (0..self.n_gens())
            .filter(|&g| self.generators[g].bus == bus)
            .collect()
    }

    /// Distinct in-service neighbors of `bus`, ascending.
    pub fn neighbors(&self, bus: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .lines
            .iter()
            .filter(|l| l.in_service && l.touches(bus))
            .map(|l| l.other(bus))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// In-service lines (including parallels) joining `a` and `b`.
    pub fn lines_between(&self, a: usize, b: usize) -> Vec<usize> {
        self.lines
            .iter()
            .filter(|l| l.in_service && l.connects(a, b))
            .map(|l| l.id)
            .collect()
    }

    /// B⁰: weighted Laplacian over in-service lines.
    pub fn susceptance_matrix(&self) -> DMatrix<f64> {
        let n = self.n_buses();
        let mut b0 = DMatrix::zeros(n, n);
        for l in self.lines.iter().filter(|l| l.in_service) {
            b0[(l.from, l.from)] += l.b;
            b0[(l.to, l.to)] += l.b;
            b0[(l.from, l.to)] -= l.b;
            b0[(l.to, l.from)] -= l.b;
        }
        b0
    }

    /// A⁰ (n×m) and the diagonal of D. Out-of-service lines get a zero
    /// column and a zero weight.
    pub fn incidence_and_weight(&self) -> (DMatrix<f64>, DVector<f64>) {
        let (n, m) = (self.n_buses(), self.n_lines());
        let mut a0 = DMatrix::zeros(n, m);
        let mut d = DVector::zeros(m);
        for (k, l) in self.lines.iter().enumerate() {
            if l.in_service {
                a0[(l.from, k)] = 1.0;
                a0[(l.to, k)] = -1.0;
                d[k] = l.b;
            }
        }
        (a0, d)
    }

    /// Connected components of the in-service graph, each sorted, ordered
    /// by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        self.components_without(&[])
    }

    /// Components after additionally removing the listed lines.
    pub fn components_without(&self, removed: &[usize]) -> Vec<Vec<usize>> {
        let n = self.n_buses();
        let mut uf = UnionFind::<usize>::new(n);
        for l in &self.lines {
            if l.in_service && !removed.contains(&l.id) {
                uf.union(l.from, l.to);
            }
        }
        let labels = uf.into_labeling();
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (bus, root) in labels.into_iter().enumerate() {
            groups.entry(root).or_default().push(bus);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort_by_key(|c| c[0]);
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// True when removing `lines` leaves the in-service graph connected.
    pub fn connected_without(&self, lines: &[usize]) -> bool {
        self.components_without(lines).len() == 1
    }

    pub fn check_connected(&self) -> Result<()> {
        let comps = self.components();
        if comps.len() == 1 {
            Ok(())
        } else {
            Err(OtrError::Islanded { components: comps })
        }
    }

    /// Moore–Penrose pseudo-inverse of B⁰ for a connected network.
    pub fn laplacian_pinv(&self) -> Result<DMatrix<f64>> {
        self.check_connected()?;
        let n = self.n_buses();
        let shift = 1.0 / n as f64;
        let mut m = self.susceptance_matrix();
        m.add_scalar_mut(shift);
        let inv = m
            .lu()
            .try_inverse()
            .ok_or_else(|| OtrError::Singular("susceptance matrix is singular".into()))?;
        Ok(inv.add_scalar(-shift))
    }

    /// Ψ = D (A⁰)⊤ (B⁰)†, m×n. Rows of out-of-service lines are zero.
    pub fn ptdf_matrix(&self) -> Result<DMatrix<f64>> {
        let pinv = self.laplacian_pinv()?;
        Ok(self.ptdf_from_pinv(&pinv))
    }

    pub(crate) fn ptdf_from_pinv(&self, pinv: &DMatrix<f64>) -> DMatrix<f64> {
        let (m, n) = (self.n_lines(), self.n_buses());
        let mut psi = DMatrix::zeros(m, n);
        for (k, l) in self.lines.iter().enumerate() {
            if !l.in_service {
                continue;
            }
            for j in 0..n {
                psi[(k, j)] = l.b * (pinv[(l.from, j)] - pinv[(l.to, j)]);
            }
        }
        psi
    }

    /// DC power flow for a balanced injection vector. Returns zero-mean
    /// angles and line flows (zero on out-of-service lines).
    pub fn dc_power_flow(&self, injection: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let pinv = self.laplacian_pinv()?;
        let theta = &pinv * injection;
        let flows = self.flows_from_angles(&theta);
        Ok((theta, flows))
    }

    pub fn flows_from_angles(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n_lines(),
            self.lines.iter().map(|l| {
                if l.in_service {
                    l.b * (theta[l.from] - theta[l.to])
                } else {
                    0.0
                }
            }),
        )
    }

    /// Copy with every rated line limit multiplied by `factor`.
    pub fn with_scaled_limits(&self, factor: f64) -> Network {
        let mut net = self.clone();
        for l in net.lines.iter_mut().filter(|l| l.is_rated()) {
            l.f_min *= factor;
            l.f_max *= factor;
        }
        net
    }

    /// Copy with every generator cost multiplied by `factor`.
    pub fn with_scaled_costs(&self, factor: f64) -> Network {
        let mut net = self.clone();
        for g in &mut net.generators {
            g.cost *= factor;
        }
        net
    }

    /// Applies `action` to a copy of the network. Splits append the new
    /// busbar as the last bus. Fails if the result is islanded.
    pub fn apply_action(&self, action: &CandidateAction) -> Result<Network> {
        let net = self.apply_action_unchecked(action)?;
        net.check_connected()?;
        Ok(net)
    }

    /// As [`Network::apply_action`] without the connectivity check.
    pub fn apply_action_unchecked(&self, action: &CandidateAction) -> Result<Network> {
        match action {
            CandidateAction::OpenLine { line } => {
                let l = self.lines.get(*line).ok_or_else(|| {
                    OtrError::Precondition(format!("line {line} does not exist"))
                })?;
                if !l.in_service {
                    return Err(OtrError::Precondition(format!("line {line} is already open")));
                }
                let mut net = self.clone();
                net.lines[*line].in_service = false;
                Ok(net)
            }
            CandidateAction::Split(spec) => self.split_bus(spec),
        }
    }

    fn split_bus(&self, spec: &SplitSpec) -> Result<Network> {
        self.check_split(spec)?;
        let mut net = self.clone();
        let new_bus = net.n_buses();
        let old = &self.buses[spec.bus];
        let max_id = self.buses.iter().map(|b| b.id).max().unwrap_or(0);
        net.buses.push(Bus {
            id: max_id + 1,
            kind: BusKind::Pq,
            pd: 0.0,
        });
        for l in net.lines.iter_mut().filter(|l| l.in_service) {
            for &k in &spec.moved_neighbors {
                if l.connects(spec.bus, k) {
                    if l.from == spec.bus {
                        l.from = new_bus;
                    } else {
                        l.to = new_bus;
                    }
                }
            }
        }
        if spec.scenario.moves_load() {
            net.buses[new_bus].pd = old.pd;
            net.buses[spec.bus].pd = 0.0;
        }
        if spec.scenario.moves_gen() {
            for g in net.generators.iter_mut().filter(|g| g.bus == spec.bus) {
                g.bus = new_bus;
            }
        }
        Ok(net)
    }

    /// Checks that `spec` names an in-service bus and a nonempty strict
    /// subset of its neighbors.
    pub fn check_split(&self, spec: &SplitSpec) -> Result<()> {
        if spec.bus >= self.n_buses() {
            return Err(OtrError::Validation(format!("split bus {} does not exist", spec.bus)));
        }
        let nbrs = self.neighbors(spec.bus);
        if spec.moved_neighbors.is_empty() {
            return Err(OtrError::Validation("split moves no neighbors".into()));
        }
        let mut moved = spec.moved_neighbors.clone();
        moved.sort_unstable();
        moved.dedup();
        if moved.len() != spec.moved_neighbors.len() {
            return Err(OtrError::Validation("split lists a neighbor twice".into()));
        }
        if let Some(k) = moved.iter().find(|k| !nbrs.contains(k)) {
            return Err(OtrError::Validation(format!(
                "bus {k} is not a neighbor of split bus {}",
                spec.bus
            )));
        }
        if moved.len() >= nbrs.len() {
            return Err(OtrError::Validation(
                "split must leave at least one neighbor on the original bus".into(),
            ));
        }
        Ok(())
    }

    /// Human-readable description of `action` using external bus numbers.
    pub fn describe(&self, action: &CandidateAction) -> String {
        match action {
            CandidateAction::OpenLine { line } => {
                let l = &self.lines[*line];
                format!(
                    "line {} ({},{})",
                    line,
                    self.buses[l.from].id,
                    self.buses[l.to].id
                )
            }
            CandidateAction::Split(s) => {
                let moved: Vec<String> = s
                    .moved_neighbors
                    .iter()
                    .map(|&k| self.buses[k].id.to_string())
                    .collect();
                format!(
                    "bus {} -> [{}] {}",
                    self.buses[s.bus].id,
                    moved.join(","),
                    s.scenario.as_str()
                )
            }
        }
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::action::SplitScenario;
    use approx::assert_abs_diff_eq;

    fn two_bus() -> Network {
        Network {
            name: "two".into(),
            base_mva: 100.0,
            buses: vec![bus(1, 0.0), bus(2, 1.0)],
            generators: vec![Generator {
                bus: 0,
                cost: 10.0,
                p_min: 0.0,
                p_max: 2.0,
            }],
            lines: vec![line(0, 0, 1, 10.0, UNLIMITED_FLOW)],
            reference_bus: 0,
        }
    }

    #[test]
    fn two_bus_matrices() {
        let net = two_bus();
        let b0 = net.susceptance_matrix();
        assert_eq!(b0, DMatrix::from_row_slice(2, 2, &[10.0, -10.0, -10.0, 10.0]));
        let (a0, d) = net.incidence_and_weight();
        assert_eq!(a0, DMatrix::from_row_slice(2, 1, &[1.0, -1.0]));
        assert_eq!(d, DVector::from_vec(vec![10.0]));
        let psi = net.ptdf_matrix().unwrap();
        let flow = &psi * DVector::from_vec(vec![1.0, -1.0]);
        assert_abs_diff_eq!(flow[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn triangle_laplacian_and_ptdf() {
        let net = triangle(1.0);
        let b0 = net.susceptance_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 } else { -1.0 };
                assert_abs_diff_eq!(b0[(i, j)], want, epsilon = 1e-15);
            }
        }
        let psi = net.ptdf_matrix().unwrap();
        let flow = &psi * DVector::from_vec(vec![1.0, -1.0, 0.0]);
        // direct line 0-1 carries 2/3, the detour 0-2-1 carries 1/3
        assert_abs_diff_eq!(flow[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(flow[1], -1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(flow[2], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn incidence_reconstructs_laplacian_with_open_line() {
        let mut net = triangle(2.0);
        net.lines.push(line(3, 0, 1, 0.5, 1.0));
        net.lines[1].in_service = false;
        let (a0, d) = net.incidence_and_weight();
        assert!(a0.column(1).iter().all(|&v| v == 0.0));
        let rebuilt = &a0 * DMatrix::from_diagonal(&d) * a0.transpose();
        assert!((rebuilt - net.susceptance_matrix()).abs().max() < 1e-12);
        let psi = net.ptdf_matrix().unwrap();
        assert!(psi.row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn open_only_line_islands() {
        let net = two_bus();
        let err = net
            .apply_action(&CandidateAction::OpenLine { line: 0 })
            .unwrap_err();
        match err {
            OtrError::Islanded { components } => assert_eq!(components, vec![vec![0], vec![1]]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn open_triangle_line_leaves_path() {
        let net = triangle(1.0);
        let out = net.apply_action(&CandidateAction::OpenLine { line: 0 }).unwrap();
        assert!(!out.lines[0].in_service);
        assert!(out.is_connected());
        assert_eq!(out.neighbors(0), vec![2]);
    }

    #[test]
    fn split_rehomes_line_and_load() {
        let mut net = triangle(1.0);
        net.buses[0].pd = 0.7;
        let spec = SplitSpec {
            bus: 0,
            moved_neighbors: vec![1],
            scenario: SplitScenario::LoadOnly,
            p_new: -0.7,
        };
        let out = net.apply_action(&CandidateAction::Split(spec)).unwrap();
        assert_eq!(out.n_buses(), 4);
        assert_eq!(out.buses[3].pd, 0.7);
        assert_eq!(out.buses[0].pd, 0.0);
        assert!(out.lines[0].connects(3, 1));
        assert_eq!(out.neighbors(0), vec![2]);
    }

    #[test]
    fn split_must_keep_a_neighbor() {
        let net = triangle(1.0);
        let spec = SplitSpec {
            bus: 0,
            moved_neighbors: vec![1, 2],
            scenario: SplitScenario::None,
            p_new: 0.0,
        };
        assert!(matches!(
            net.apply_action(&CandidateAction::Split(spec)),
            Err(OtrError::Validation(_))
        ));
    }

    #[test]
    fn scaled_limits_skip_unrated_lines() {
        let mut net = triangle(1.0);
        net.lines[0].f_max = 2.0;
        net.lines[0].f_min = -2.0;
        let s = net.with_scaled_limits(0.5);
        assert_eq!(s.lines[0].f_max, 1.0);
        assert_eq!(s.lines[1].f_max, UNLIMITED_FLOW);
    }
}
