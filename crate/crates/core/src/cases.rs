//! Bundled networks.

use crate::error::{Error, Result};
use crate::network::{
    parse_matpower_case, parse_native, Branch, Bus, Generator, Network, SplitRule,
};

const CASE14: &str = include_str!("../data/case14.m");
const CASE57: &str = include_str!("../data/case57.m");
const CASE118: &str = include_str!("../data/case118.m");

/// Names accepted by [`bundled`].
pub const BUNDLED: &[&str] = &["triangle", "case14", "case57", "case118"];

pub fn bundled(name: &str) -> Result<Network> {
    let mut net = match name {
        "triangle" => return Ok(triangle()),
        "case14" => parse_matpower_case(CASE14)?,
        "case57" => parse_matpower_case(CASE57)?,
        "case118" => parse_matpower_case(CASE118)?,
        _ => return Err(Error::Config(format!("unknown bundled case '{name}'"))),
    };
    net.name = name.to_string();
    Ok(net)
}

pub fn case14() -> Network {
    bundled("case14").expect("bundled case14 parses")
}

pub fn case57() -> Network {
    bundled("case57").expect("bundled case57 parses")
}

pub fn case118() -> Network {
    bundled("case118").expect("bundled case118 parses")
}

/// Loads a network from MATPOWER or native JSON text, sniffing the format.
pub fn load_text(text: &str) -> Result<Network> {
    if text.trim_start().starts_with('{') {
        parse_native(text)
    } else {
        parse_matpower_case(text)
    }
}

/// Loads a bundled case by name or reads a case file from disk.
pub fn load(name_or_path: &str) -> Result<Network> {
    if BUNDLED.contains(&name_or_path) {
        return bundled(name_or_path);
    }
    let text = std::fs::read_to_string(name_or_path)?;
    load_text(&text)
}

/// Three buses in a triangle with equal reactances: a cheap generator at bus
/// 1 (10/MWh), an expensive one at bus 2 (30/MWh), 60 MW of load at bus 3.
/// Limits are ample.
pub fn triangle() -> Network {
    let bus = |id, load_mw| Bus {
        id,
        base_kv: 230.0,
        is_slack: id == 1,
        load_mw,
    };
    let branch = |id, from_bus, to_bus| Branch {
        id,
        from_bus,
        to_bus,
        susceptance: 10.0,
        limit_mw: 200.0,
        switchable: true,
    };
    let mut net = Network {
        name: "triangle".to_string(),
        base_mva: 100.0,
        buses: vec![bus(1, 0.0), bus(2, 0.0), bus(3, 60.0)],
        branches: vec![branch(1, 1, 2), branch(2, 1, 3), branch(3, 2, 3)],
        generators: vec![
            Generator {
                id: 1,
                bus: 1,
                p_min: 0.0,
                p_max: 200.0,
                cost_per_mwh: 10.0,
            },
            Generator {
                id: 2,
                bus: 2,
                p_min: 0.0,
                p_max: 200.0,
                cost_per_mwh: 30.0,
            },
        ],
        substations: Vec::new(),
    };
    net.annotate_substations(SplitRule::default());
    net
}

/// The triangle with line 1-2 limited to 5 MW: least cost needs that line open.
pub fn congested_triangle() -> Network {
    let mut net = triangle();
    net.name = "congested-triangle".to_string();
    net.branches[0].limit_mw = 5.0;
    net.branches[1].limit_mw = 50.0;
    net.branches[2].limit_mw = 50.0;
    net
}

/// Five buses, seven lines, three generators. Only lines 3, 5 and 7 are
/// switchable. With all lines closed the dispatch costs 4704.26; opening
/// lines 3 and 7 brings it down to 4203.125.
pub fn congested_five_bus() -> Network {
    let bus = |id, load_mw| Bus {
        id,
        base_kv: 230.0,
        is_slack: id == 1,
        load_mw,
    };
    let branch = |id, from_bus, to_bus, x: f64, limit_mw| Branch {
        id,
        from_bus,
        to_bus,
        susceptance: 1.0 / x,
        limit_mw,
        switchable: matches!(id, 3 | 5 | 7),
    };
    let gen = |id, bus, p_max, cost_per_mwh| Generator {
        id,
        bus,
        p_min: 0.0,
        p_max,
        cost_per_mwh,
    };
    let mut net = Network {
        name: "congested-five-bus".to_string(),
        base_mva: 100.0,
        buses: vec![bus(1, 0.0), bus(2, 60.0), bus(3, 70.0), bus(4, 90.0), bus(5, 40.0)],
        branches: vec![
            branch(1, 1, 2, 0.06, 120.0),
            branch(2, 1, 3, 0.24, 60.0),
            branch(3, 2, 3, 0.18, 40.0),
            branch(4, 2, 4, 0.18, 60.0),
            branch(5, 2, 5, 0.12, 35.0),
            branch(6, 3, 4, 0.03, 45.0),
            branch(7, 4, 5, 0.24, 40.0),
        ],
        generators: vec![gen(1, 1, 250.0, 10.0), gen(2, 3, 150.0, 25.0), gen(3, 5, 100.0, 40.0)],
        substations: Vec::new(),
    };
    net.annotate_substations(SplitRule::default());
    net
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_cases_validate() {
        for name in BUNDLED {
            let net = bundled(name).unwrap();
            assert!(net.validate().is_valid(), "{name}: {}", net.validate());
        }
        assert!(congested_triangle().validate().is_valid());
        assert!(congested_five_bus().validate().is_valid());
    }

    #[test]
    fn unknown_case() {
        assert!(matches!(bundled("case9999"), Err(Error::Config(_))));
    }
}
