//! Grid case data: buses, branches, generators and the substations that can be
//! split into two busbars.

mod matpower;
mod native;

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use matpower::parse_matpower_case;
pub use native::{parse_native, to_native};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
    /// Nominal voltage in kV.
    pub base_kv: f64,
    pub is_slack: bool,
    /// Active load in MW.
    pub load_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: u32,
    pub from_bus: u32,
    pub to_bus: u32,
    /// Series susceptance in per unit (1/x).
    pub susceptance: f64,
    /// Thermal limit in MW.
    pub limit_mw: f64,
    pub switchable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: u32,
    pub bus: u32,
    pub p_min: f64,
    pub p_max: f64,
    /// Linear cost coefficient in currency per MWh.
    pub cost_per_mwh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchEnd {
    From,
    To,
}

/// An element injecting (or drawing) power at a substation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum Injection {
    Generator(u32),
    /// The aggregated load of the bus with this id.
    Load(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substation {
    pub bus: u32,
    pub splittable: bool,
    pub attached_branch_ends: Vec<(u32, BranchEnd)>,
    pub attached_injections: Vec<Injection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    /// System base in MVA; flows in MW are `base_mva * susceptance * angle difference`.
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub substations: Vec<Substation>,
}

/// Rule deciding which substations get a busbar-splitting variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    /// A substation is splittable when at least this many branch ends attach to it.
    pub min_branch_ends: usize,
}

impl Default for SplitRule {
    fn default() -> Self {
        Self { min_branch_ends: 4 }
    }
}

impl Network {
    /// Rebuilds `substations` from the bus/branch/generator tables.
    pub fn annotate_substations(&mut self, rule: SplitRule) {
        let mut subs: Vec<Substation> = self
            .buses
            .iter()
            .map(|b| Substation {
                bus: b.id,
                splittable: false,
                attached_branch_ends: Vec::new(),
                attached_injections: Vec::new(),
            })
            .collect();
        let pos: HashMap<u32, usize> = self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        for br in &self.branches {
            if let Some(&i) = pos.get(&br.from_bus) {
                subs[i].attached_branch_ends.push((br.id, BranchEnd::From));
            }
            if let Some(&i) = pos.get(&br.to_bus) {
                subs[i].attached_branch_ends.push((br.id, BranchEnd::To));
            }
        }
        for g in &self.generators {
            if let Some(&i) = pos.get(&g.bus) {
                subs[i].attached_injections.push(Injection::Generator(g.id));
            }
        }
        for (i, b) in self.buses.iter().enumerate() {
            if b.load_mw != 0.0 {
                subs[i].attached_injections.push(Injection::Load(b.id));
            }
        }
        for s in &mut subs {
            s.splittable = s.attached_branch_ends.len() >= rule.min_branch_ends;
        }
        self.substations = subs;
    }

    pub fn total_load(&self) -> f64 {
        self.buses.iter().map(|b| b.load_mw).sum()
    }

    pub fn slack_bus(&self) -> Option<&Bus> {
        self.buses.iter().find(|b| b.is_slack)
    }

    pub fn index(&self) -> NetworkIndex {
        NetworkIndex::new(self)
    }

    /// Returns a copy with every line limit multiplied by `factor`.
    pub fn scale_line_capacities(&self, factor: f64) -> Result<Network> {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(Error::Domain(format!(
                "capacity factor must lie in (0, 1], got {factor}"
            )));
        }
        let mut net = self.clone();
        for br in &mut net.branches {
            br.limit_mw *= factor;
        }
        Ok(net)
    }

    /// Structural checks. An empty report means the network is usable.
    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        let mut seen = HashSet::new();
        for b in &self.buses {
            if !seen.insert(b.id) {
                issues.push(format!("duplicate bus id {}", b.id));
            }
            if b.load_mw < 0.0 {
                issues.push(format!("bus {} has negative load {}", b.id, b.load_mw));
            }
        }
        match self.buses.iter().filter(|b| b.is_slack).count() {
            0 => issues.push("no slack bus".to_string()),
            1 => {}
            _ => issues.push("multiple slack buses".to_string()),
        }
        let bus_ids: HashSet<u32> = self.buses.iter().map(|b| b.id).collect();
        let mut seen = HashSet::new();
        for br in &self.branches {
            if !seen.insert(br.id) {
                issues.push(format!("duplicate branch id {}", br.id));
            }
            for end in [br.from_bus, br.to_bus] {
                if !bus_ids.contains(&end) {
                    issues.push(format!("branch {} references missing bus {}", br.id, end));
                }
            }
            if br.from_bus == br.to_bus {
                issues.push(format!("branch {} connects bus {} to itself", br.id, br.from_bus));
            }
            if !(br.susceptance > 0.0) {
                issues.push(format!("branch {} has nonpositive susceptance", br.id));
            }
            if !(br.limit_mw > 0.0) {
                issues.push(format!("branch {} has nonpositive limit {}", br.id, br.limit_mw));
            }
        }
        let mut seen = HashSet::new();
        for g in &self.generators {
            if !seen.insert(g.id) {
                issues.push(format!("duplicate generator id {}", g.id));
            }
            if !bus_ids.contains(&g.bus) {
                issues.push(format!("generator {} references missing bus {}", g.id, g.bus));
            }
            if !(0.0 <= g.p_min && g.p_min <= g.p_max) {
                issues.push(format!(
                    "generator {} has invalid bounds [{}, {}]",
                    g.id, g.p_min, g.p_max
                ));
            }
        }
        let branch_ids: HashSet<u32> = self.branches.iter().map(|b| b.id).collect();
        let gen_ids: HashSet<u32> = self.generators.iter().map(|g| g.id).collect();
        for s in &self.substations {
            if !bus_ids.contains(&s.bus) {
                issues.push(format!("substation references missing bus {}", s.bus));
            }
            for (br, _) in &s.attached_branch_ends {
                if !branch_ids.contains(br) {
                    issues.push(format!("substation {} references missing branch {}", s.bus, br));
                }
            }
            for inj in &s.attached_injections {
                let ok = match inj {
                    Injection::Generator(g) => gen_ids.contains(g),
                    Injection::Load(b) => bus_ids.contains(b),
                };
                if !ok {
                    issues.push(format!("substation {} references missing {:?}", s.bus, inj));
                }
            }
        }
        issues.extend(self.connectivity_issues(&bus_ids));
        ValidationReport { issues }
    }

    fn connectivity_issues(&self, bus_ids: &HashSet<u32>) -> Vec<String> {
        if self.buses.is_empty() {
            return vec!["network has no buses".to_string()];
        }
        let pos: HashMap<u32, usize> = self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        let mut adj = vec![Vec::new(); self.buses.len()];
        for br in &self.branches {
            if bus_ids.contains(&br.from_bus) && bus_ids.contains(&br.to_bus) {
                let (f, t) = (pos[&br.from_bus], pos[&br.to_bus]);
                adj[f].push(t);
                adj[t].push(f);
            }
        }
        let mut seen = vec![false; self.buses.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        self.buses
            .iter()
            .zip(&seen)
            .filter(|(_, s)| !**s)
            .map(|(b, _)| format!("bus {} is disconnected in the base topology", b.id))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::Validation(self.issues))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "ok");
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Id-to-position lookups for a network.
#[derive(Debug, Clone)]
pub struct NetworkIndex {
    pub bus: HashMap<u32, usize>,
    pub branch: HashMap<u32, usize>,
    pub generator: HashMap<u32, usize>,
    pub substation: HashMap<u32, usize>,
}

impl NetworkIndex {
    pub fn new(net: &Network) -> Self {
        Self {
            bus: net.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect(),
            branch: net.branches.iter().enumerate().map(|(i, b)| (b.id, i)).collect(),
            generator: net.generators.iter().enumerate().map(|(i, g)| (g.id, i)).collect(),
            substation: net.substations.iter().enumerate().map(|(i, s)| (s.bus, i)).collect(),
        }
    }
}

/// The binary switching vector `z`: opened lines followed by split busbars.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Topology {
    pub line_open: Vec<bool>,
    pub busbar_split: Vec<bool>,
}

impl Topology {
    /// The base topology, every switch closed.
    pub fn base(lines: usize, busbars: usize) -> Self {
        Self {
            line_open: vec![false; lines],
            busbar_split: vec![false; busbars],
        }
    }

    pub fn from_bits(bits: &[bool], lines: usize) -> Self {
        Self {
            line_open: bits[..lines].to_vec(),
            busbar_split: bits[lines..].to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.line_open.len() + self.busbar_split.len()
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        self.line_open.iter().chain(self.busbar_split.iter()).copied()
    }

    pub fn bit(&self, j: usize) -> bool {
        if j < self.line_open.len() {
            self.line_open[j]
        } else {
            self.busbar_split[j - self.line_open.len()]
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.bits().map(|b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn action_count(&self) -> usize {
        self.bits().filter(|b| *b).count()
    }

    /// Indices of set bits.
    pub fn actions(&self) -> Vec<usize> {
        self.bits().enumerate().filter(|(_, b)| *b).map(|(j, _)| j).collect()
    }

    pub fn complement(&self) -> Self {
        Self {
            line_open: self.line_open.iter().map(|b| !b).collect(),
            busbar_split: self.busbar_split.iter().map(|b| !b).collect(),
        }
    }

    /// Compact "0110|01" rendering.
    pub fn to_bit_string(&self) -> String {
        let mut s: String = self.line_open.iter().map(|b| if *b { '1' } else { '0' }).collect();
        if !self.busbar_split.is_empty() {
            s.push('|');
            s.extend(self.busbar_split.iter().map(|b| if *b { '1' } else { '0' }));
        }
        s
    }

    pub fn parse_bit_string(s: &str) -> Result<Self> {
        let (lines, busbars) = s.split_once('|').unwrap_or((s, ""));
        let parse = |part: &str| -> Result<Vec<bool>> {
            part.chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(Error::Parse {
                        line: 0,
                        message: format!("invalid topology bit '{c}'"),
                    }),
                })
                .collect()
        };
        Ok(Self {
            line_open: parse(lines)?,
            busbar_split: parse(busbars)?,
        })
    }
}

/// Number of switching decisions that differ between two topologies.
pub fn hamming_distance(a: &Topology, b: &Topology) -> Result<usize> {
    if a.line_open.len() != b.line_open.len() || a.busbar_split.len() != b.busbar_split.len() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(a.bits().zip(b.bits()).filter(|(x, y)| x != y).count())
}

/// Maps positions of `z` to network elements for a given set of enabled
/// switching modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchLayout {
    /// Branch positions (into `Network::branches`) of the line-opening dimensions.
    pub line_branches: Vec<usize>,
    /// Substation positions (into `Network::substations`) of the busbar dimensions.
    pub split_substations: Vec<usize>,
}

impl SwitchLayout {
    pub fn new(net: &Network, lines: bool, busbars: bool) -> Self {
        let line_branches = if lines {
            net.branches
                .iter()
                .enumerate()
                .filter(|(_, b)| b.switchable)
                .map(|(i, _)| i)
                .collect()
        } else {
            Vec::new()
        };
        let split_substations = if busbars {
            net.substations
                .iter()
                .enumerate()
                .filter(|(_, s)| s.splittable)
                .map(|(i, _)| i)
                .collect()
        } else {
            Vec::new()
        };
        Self {
            line_branches,
            split_substations,
        }
    }

    pub fn dim(&self) -> usize {
        self.line_branches.len() + self.split_substations.len()
    }

    pub fn base_topology(&self) -> Topology {
        Topology::base(self.line_branches.len(), self.split_substations.len())
    }

    /// Human-readable label of dimension `j`.
    pub fn describe(&self, net: &Network, j: usize) -> String {
        if j < self.line_branches.len() {
            let br = &net.branches[self.line_branches[j]];
            format!("open line {} ({}-{})", br.id, br.from_bus, br.to_bus)
        } else {
            let s = &net.substations[self.split_substations[j - self.line_branches.len()]];
            format!("split substation {}", s.bus)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;

    #[test]
    fn hamming_examples() {
        let a = Topology::from_bits(&[false, true, true, false], 4);
        let b = Topology::from_bits(&[false, false, true, true], 4);
        assert_eq!(hamming_distance(&a, &b).unwrap(), 2);
        assert_eq!(hamming_distance(&a, &a).unwrap(), 0);
        let t = Topology::from_bits(&[true, false, true, false, false], 3);
        assert_eq!(hamming_distance(&t, &t.complement()).unwrap(), 5);
        let short = Topology::from_bits(&[true], 1);
        assert!(matches!(
            hamming_distance(&a, &short),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn scaling() {
        let net = cases::triangle();
        assert_eq!(net.scale_line_capacities(1.0).unwrap(), net);
        let half = net.scale_line_capacities(0.5).unwrap();
        assert_eq!(half.branches[0].limit_mw, net.branches[0].limit_mw * 0.5);
        assert_eq!(half.generators, net.generators);
        assert!(net.scale_line_capacities(0.0).is_err());
        assert!(net.scale_line_capacities(1.2).is_err());
        assert!(net.scale_line_capacities(f64::NAN).is_err());
    }

    #[test]
    fn validation_findings() {
        let net = cases::triangle();
        assert!(net.validate().is_valid());

        let mut bad = net.clone();
        bad.branches[0].to_bus = 99;
        let report = bad.validate();
        assert_eq!(report.issues.len(), 1, "{report}");
        assert!(report.issues[0].contains("missing bus 99"));

        let mut isolated = net.clone();
        isolated.buses.push(Bus {
            id: 4,
            base_kv: 1.0,
            is_slack: false,
            load_mw: 0.0,
        });
        isolated.annotate_substations(SplitRule::default());
        let report = isolated.validate();
        assert_eq!(report.issues, vec!["bus 4 is disconnected in the base topology"]);
    }

    #[test]
    fn bit_string_round_trip() {
        let t = Topology {
            line_open: vec![true, false, true],
            busbar_split: vec![false, true],
        };
        assert_eq!(t.to_bit_string(), "101|01");
        assert_eq!(Topology::parse_bit_string("101|01").unwrap(), t);
    }

    #[test]
    fn substation_annotation() {
        let net = cases::case57();
        let splittable = net.substations.iter().filter(|s| s.splittable).count();
        let by_degree = net
            .buses
            .iter()
            .filter(|b| {
                net.branches
                    .iter()
                    .filter(|br| br.from_bus == b.id || br.to_bus == b.id)
                    .count()
                    >= 4
            })
            .count();
        assert_eq!(splittable, by_degree);
        let layout = SwitchLayout::new(&net, true, true);
        assert_eq!(layout.dim(), 80 + splittable);
    }
}
