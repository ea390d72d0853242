//! Reader for the subset of the MATPOWER case format the toolkit needs.
//!
//! Only `mpc.baseMVA`, `mpc.bus`, `mpc.gen`, `mpc.branch` and `mpc.gencost`
//! are interpreted. Every other assignment (`mpc.version`, name cell arrays,
//! extra tables) is skipped. Column positions follow the MATPOWER
//! `caseformat` conventions.

use crate::error::{OtrError, Result};
use crate::network::{Bus, BusKind, Generator, Line, Network, UNLIMITED_FLOW};

// MATPOWER column indices (0-based).
const BUS_I: usize = 0;
const BUS_TYPE: usize = 1;
const PD: usize = 2;

const GEN_BUS: usize = 0;
const GEN_STATUS: usize = 7;
const PMAX: usize = 8;
const PMIN: usize = 9;

const F_BUS: usize = 0;
const T_BUS: usize = 1;
const BR_X: usize = 3;
const RATE_A: usize = 5;
const BR_STATUS: usize = 10;

const MODEL: usize = 0;
const NCOST: usize = 3;
const COST: usize = 4;

const POLYNOMIAL: i64 = 2;

#[derive(Debug, Default)]
struct Table {
    /// (source line number, values)
    rows: Vec<(usize, Vec<f64>)>,
}

impl Table {
    fn require_columns(&self, name: &str, min: usize) -> Result<()> {
        for (line, row) in &self.rows {
            if row.len() < min {
                return Err(OtrError::parse(
                    *line,
                    format!("mpc.{name} row has {} columns, expected at least {min}", row.len()),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Default)]
struct RawCase {
    name: String,
    base_mva: Option<f64>,
    bus: Option<Table>,
    gen: Option<Table>,
    branch: Option<Table>,
    gencost: Option<Table>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

fn parse_scalar(text: &str, line_no: usize) -> Result<f64> {
    let rhs = text
        .split_once('=')
        .map(|(_, r)| r)
        .ok_or_else(|| OtrError::parse(line_no, "expected an assignment"))?;
    let token = rhs.trim().trim_end_matches(';').trim();
    token
        .parse::<f64>()
        .map_err(|_| OtrError::parse(line_no, format!("invalid number `{token}`")))
}

fn parse_row(body: &str, line_no: usize) -> Result<Vec<f64>> {
    body.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| OtrError::parse(line_no, format!("invalid number `{t}`")))
        })
        .collect()
}

/// Collects the rows of a `mpc.<name> = [ ... ];` block starting after the
/// opening bracket on `first` (which may already hold data).
fn read_table<'a, I>(first: &str, first_no: usize, lines: &mut I) -> Result<Table>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    let mut table = Table::default();
    let mut pending = first.to_string();
    let mut pending_no = first_no;
    loop {
        let mut closed = false;
        let mut text = pending.as_str();
        if let Some(pos) = text.find(']') {
            closed = true;
            text = &text[..pos];
        }
        for chunk in text.split(';') {
            let row = parse_row(chunk, pending_no)?;
            if !row.is_empty() {
                table.rows.push((pending_no, row));
            }
        }
        if closed {
            return Ok(table);
        }
        match lines.next() {
            Some((no, line)) => {
                pending = strip_comment(line).to_string();
                pending_no = no;
            }
            None => {
                return Err(OtrError::parse(
                    first_no,
                    "unterminated matrix (missing `]`)",
                ))
            }
        }
    }
}

fn read_raw(text: &str) -> Result<RawCase> {
    let mut raw = RawCase::default();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    while let Some((no, line)) = lines.next() {
        let code = strip_comment(line).trim();
        if code.is_empty() {
            continue;
        }
        if let Some(rest) = code.strip_prefix("function") {
            if let Some((_, name)) = rest.split_once('=') {
                raw.name = name.trim().to_string();
            }
            continue;
        }
        let Some(field) = code.strip_prefix("mpc.") else {
            continue;
        };
        let key: String = field
            .chars()
            .take_while(|c| c.is_alphanumeric() || *c == '_')
            .collect();
        match key.as_str() {
            "baseMVA" => raw.base_mva = Some(parse_scalar(code, no)?),
            "bus" | "gen" | "branch" | "gencost" => {
                let Some(open) = code.find('[') else {
                    return Err(OtrError::parse(no, format!("mpc.{key} is not a matrix")));
                };
                let table = read_table(&code[open + 1..], no, &mut lines)?;
                match key.as_str() {
                    "bus" => raw.bus = Some(table),
                    "gen" => raw.gen = Some(table),
                    "branch" => raw.branch = Some(table),
                    _ => raw.gencost = Some(table),
                }
            }
            _ => {
                // Skip other blocks, including multi-line cell arrays.
                if code.contains('{') && !code.contains('}') {
                    for (_, l) in lines.by_ref() {
                        if strip_comment(l).contains('}') {
                            break;
                        }
                    }
                } else if code.contains('[') && !code.contains(']') {
                    for (_, l) in lines.by_ref() {
                        if strip_comment(l).contains(']') {
                            break;
                        }
                    }
                }
            }
        }
    }
    Ok(raw)
}

fn linear_cost(row: &[f64], line: usize) -> Result<f64> {
    let model = row[MODEL] as i64;
    if model != POLYNOMIAL {
        return Err(OtrError::Validation(format!(
            "gencost row at line {line}: only polynomial costs (model 2) are supported"
        )));
    }
    let ncost = row[NCOST] as usize;
    let coeffs = row.get(COST..COST + ncost).ok_or_else(|| {
        OtrError::parse(line, format!("gencost row declares {ncost} coefficients"))
    })?;
    // Coefficients run from the highest order down to the constant term.
    Ok(if ncost >= 2 { coeffs[ncost - 2] } else { 0.0 })
}

/// Parses MATPOWER case text into a [`Network`] in per-unit quantities.
pub fn parse_case(text: &str) -> Result<Network> {
    let raw = read_raw(text)?;
    let base_mva = raw.base_mva.unwrap_or(100.0);
    if !(base_mva.is_finite() && base_mva > 0.0) {
        return Err(OtrError::Validation(format!("baseMVA must be positive, got {base_mva}")));
    }
    let bus_t = raw.bus.ok_or_else(|| OtrError::Validation("missing mpc.bus".into()))?;
    let gen_t = raw.gen.ok_or_else(|| OtrError::Validation("missing mpc.gen".into()))?;
    let branch_t = raw
        .branch
        .ok_or_else(|| OtrError::Validation("missing mpc.branch".into()))?;
    bus_t.require_columns("bus", PD + 1)?;
    gen_t.require_columns("gen", PMIN + 1)?;
    branch_t.require_columns("branch", BR_STATUS + 1)?;

    let mut buses = Vec::with_capacity(bus_t.rows.len());
    let mut index = std::collections::HashMap::new();
    for (line, row) in &bus_t.rows {
        let id = row[BUS_I];
        if id < 1.0 || id.fract() != 0.0 {
            return Err(OtrError::parse(*line, format!("invalid bus number {id}")));
        }
        let id = id as usize;
        if index.insert(id, buses.len()).is_some() {
            return Err(OtrError::Validation(format!("duplicate bus id {id} (line {line})")));
        }
        let kind = match row[BUS_TYPE] as i64 {
            1 => BusKind::Pq,
            2 => BusKind::Pv,
            3 => BusKind::Ref,
            4 => BusKind::Isolated,
            other => {
                return Err(OtrError::parse(*line, format!("unknown bus type {other}")));
            }
        };
        let pd = row[PD] / base_mva;
        if !pd.is_finite() {
            return Err(OtrError::parse(*line, "non-finite load"));
        }
        buses.push(Bus { id, kind, pd });
    }
    let lookup = |id: f64, line: usize, what: &str| -> Result<usize> {
        index.get(&(id as usize)).copied().ok_or_else(|| {
            OtrError::Validation(format!("{what} at line {line} references missing bus {id}"))
        })
    };

    let costs: Vec<(usize, Vec<f64>)> = raw.gencost.map(|t| t.rows).unwrap_or_default();
    let mut generators = Vec::new();
    for (k, (line, row)) in gen_t.rows.iter().enumerate() {
        let bus = lookup(row[GEN_BUS], *line, "generator")?;
        if row[GEN_STATUS] <= 0.0 {
            continue;
        }
        let cost = match costs.get(k) {
            Some((cline, crow)) => {
                if crow.len() <= NCOST {
                    return Err(OtrError::parse(*cline, "gencost row too short"));
                }
                linear_cost(crow, *cline)?
            }
            None => {
                return Err(OtrError::Validation(format!(
                    "generator at line {line} has no gencost row"
                )))
            }
        };
        let p_min = row[PMIN] / base_mva;
        let p_max = row[PMAX] / base_mva;
        if !(cost.is_finite() && p_min.is_finite() && p_max.is_finite()) || p_min > p_max {
            return Err(OtrError::Validation(format!(
                "generator at line {line}: bounds [{p_min}, {p_max}] or cost {cost} invalid"
            )));
        }
        generators.push(Generator {
            bus,
            cost,
            p_min,
            p_max,
        });
    }

    let mut lines = Vec::with_capacity(branch_t.rows.len());
    for (line, row) in &branch_t.rows {
        let from = lookup(row[F_BUS], *line, "branch")?;
        let to = lookup(row[T_BUS], *line, "branch")?;
        if from == to {
            return Err(OtrError::Validation(format!("branch at line {line} is a self-loop")));
        }
        let x = row[BR_X];
        if !(x.is_finite() && x > 0.0) {
            return Err(OtrError::Validation(format!(
                "branch at line {line} has non-positive reactance {x}"
            )));
        }
        let rate = row[RATE_A] / base_mva;
        let limit = if rate > 0.0 { rate } else { UNLIMITED_FLOW };
        lines.push(Line {
            id: lines.len(),
            from,
            to,
            b: 1.0 / x,
            f_min: -limit,
            f_max: limit,
            in_service: row[BR_STATUS] > 0.0,
        });
    }

    let reference_bus = buses
        .iter()
        .position(|b| b.kind == BusKind::Ref)
        .unwrap_or(0);
    let net = Network {
        name: raw.name,
        base_mva,
        buses,
        generators,
        lines,
        reference_bus,
    };
    net.validate()?;
    Ok(net)
}

/// Reads and parses a case file from disk.
pub fn read_case(path: impl AsRef<std::path::Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| {
        OtrError::Validation(format!("cannot read {}: {e}", path.display()))
    })?;
    let mut net = parse_case(&text)?;
    if net.name.is_empty() {
        net.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TWO_BUS: &str = "\
function mpc = two_bus
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0;
	2	1	100	0;
];
mpc.gen = [
	1	0	0	0	0	1	100	1	200	0;
];
mpc.branch = [
	1	2	0	0.1	0	0	0	0	0	0	1;
];
mpc.gencost = [
	2	0	0	3	0.01	10	5;
];
";

    #[test]
    fn two_bus_case() {
        let net = parse_case(TWO_BUS).unwrap();
        assert_eq!(net.buses.len(), 2);
        assert_eq!(net.lines.len(), 1);
        assert_eq!(net.generators.len(), 1);
        assert_eq!(net.name, "two_bus");
        assert!((net.buses[1].pd - 1.0).abs() < 1e-15);
        assert!((net.lines[0].b - 10.0).abs() < 1e-12);
        assert_eq!(net.lines[0].f_max, UNLIMITED_FLOW);
        // quadratic term dropped, constant ignored
        assert_eq!(net.generators[0].cost, 10.0);
        assert!((net.generators[0].p_max - 2.0).abs() < 1e-15);
    }

    #[test]
    fn dangling_branch_reference() {
        let text = TWO_BUS.replace("1\t2\t0\t0.1", "1\t999\t0\t0.1");
        match parse_case(&text) {
            Err(OtrError::Validation(msg)) => assert!(msg.contains("999"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_number_reports_line() {
        let text = TWO_BUS.replace("2\t1\t100\t0;", "2\t1\tabc\t0;");
        match parse_case(&text) {
            Err(OtrError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_positive_reactance_rejected() {
        let text = TWO_BUS.replace("1\t2\t0\t0.1", "1\t2\t0\t-0.1");
        assert!(matches!(parse_case(&text), Err(OtrError::Validation(_))));
    }

    #[test]
    fn single_line_rows_and_comments() {
        let text = "mpc.baseMVA = 10;\n\
            mpc.bus = [1 3 0 0; 2 1 5 0]; % inline\n\
            mpc.gen = [1 0 0 0 0 1 100 1 20 0];\n\
            mpc.branch = [1 2 0 0.5 0 30 0 0 0 0 1];\n\
            mpc.gencost = [2 0 0 2 7 0];\n";
        let net = parse_case(text).unwrap();
        assert_eq!(net.buses.len(), 2);
        assert!((net.buses[1].pd - 0.5).abs() < 1e-15);
        assert!((net.lines[0].f_max - 3.0).abs() < 1e-15);
        assert_eq!(net.generators[0].cost, 7.0);
    }

    #[test]
    fn out_of_service_generator_dropped() {
        let text = TWO_BUS.replace("1\t100\t1\t200\t0;", "1\t100\t0\t200\t0;");
        let net = parse_case(&text).unwrap();
        assert!(net.generators.is_empty());
    }
}
