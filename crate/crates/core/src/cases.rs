//! Small hand-built networks used in tests and examples.

use crate::network::{Bus, BusKind, Generator, Line, Network, UNLIMITED_FLOW};

fn bus(id: usize, pd: f64) -> Bus {
    Bus {
        id,
        kind: if id == 1 { BusKind::Ref } else { BusKind::Pq },
        pd,
    }
}

fn line(id: usize, from: usize, to: usize, b: f64, limit: f64) -> Line {
    Line {
        id,
        from,
        to,
        b,
        f_min: -limit,
        f_max: limit,
        in_service: true,
    }
}

fn gen(bus: usize, cost: f64, p_min: f64, p_max: f64) -> Generator {
    Generator {
        bus,
        cost,
        p_min,
        p_max,
    }
}

/// Generator at bus 1 (cost 10, up to 2 p.u.) serving 1 p.u. at bus 2 over a
/// single line with b = 10.
pub fn two_bus() -> Network {
    Network {
        name: "two_bus".into(),
        base_mva: 100.0,
        buses: vec![bus(1, 0.0), bus(2, 1.0)],
        generators: vec![gen(0, 10.0, 0.0, 2.0)],
        lines: vec![line(0, 0, 1, 10.0, UNLIMITED_FLOW)],
        reference_bus: 0,
    }
}

/// Triangle with equal susceptances b = 10. Cheap generation at bus 1
/// (cost 10), expensive at bus 2 (cost 30), 1.5 p.u. of load at bus 3, and
/// line 1–3 limited to 0.6 p.u.
///
/// The limit binds: dispatch is (0.3, 1.2), cost 39, and the nodal prices
/// are (10, 30, 50).
pub fn three_bus_congested() -> Network {
    Network {
        name: "three_bus_congested".into(),
        base_mva: 100.0,
        buses: vec![bus(1, 0.0), bus(2, 0.0), bus(3, 1.5)],
        generators: vec![gen(0, 10.0, 0.0, 2.0), gen(1, 30.0, 0.0, 2.0)],
        lines: vec![
            line(0, 0, 1, 10.0, UNLIMITED_FLOW),
            line(1, 1, 2, 10.0, UNLIMITED_FLOW),
            line(2, 0, 2, 10.0, 0.6),
        ],
        reference_bus: 0,
    }
}

/// Four buses and six lines. Cheap generation at bus 1 (cost 10), expensive at
/// bus 3 (cost 40), 2 p.u. of load at bus 4, and line 1–4 limited to 0.4 p.u.
///
/// The limit binds and the cost is 68. Opening line 1–4 itself brings it
/// down to 20, opening 1–3 to 64.
pub fn four_bus_braess() -> Network {
    Network {
        name: "four_bus_braess".into(),
        base_mva: 100.0,
        buses: vec![bus(1, 0.0), bus(2, 0.0), bus(3, 0.0), bus(4, 2.0)],
        generators: vec![gen(0, 10.0, 0.0, 3.0), gen(2, 40.0, 0.0, 3.0)],
        lines: vec![
            line(0, 0, 1, 10.0, UNLIMITED_FLOW),
            line(1, 1, 3, 10.0, UNLIMITED_FLOW),
            line(2, 0, 2, 10.0, UNLIMITED_FLOW),
            line(3, 2, 3, 10.0, UNLIMITED_FLOW),
            line(4, 0, 3, 5.0, 0.4),
            line(5, 1, 2, 20.0, UNLIMITED_FLOW),
        ],
        reference_bus: 0,
    }
}
