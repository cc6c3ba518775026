//! DC power flow for a fixed switching state and fixed injections.

use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{BranchEnd, Injection, Network, NetworkIndex, SwitchLayout, Topology};

/// Elements moved to the second busbar of a split substation.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub bus: u32,
    pub branch_ends_on_b: Vec<(u32, BranchEnd)>,
    pub injections_on_b: Vec<Injection>,
}

/// Which branches are open and which substations run split.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SwitchState {
    pub open: HashSet<u32>,
    pub splits: Vec<SplitAssignment>,
}

impl SwitchState {
    /// State for `topology`; `splits` must hold the assignment of every split substation.
    pub fn from_topology(
        net: &Network,
        layout: &SwitchLayout,
        topology: &Topology,
        splits: &[SplitAssignment],
    ) -> Self {
        let open = layout
            .line_branches
            .iter()
            .zip(&topology.line_open)
            .filter(|(_, o)| **o)
            .map(|(&bi, _)| net.branches[bi].id)
            .collect();
        let split_buses: HashSet<u32> = layout
            .split_substations
            .iter()
            .zip(&topology.busbar_split)
            .filter(|(_, s)| **s)
            .map(|(&si, _)| net.substations[si].bus)
            .collect();
        Self {
            open,
            splits: splits
                .iter()
                .filter(|s| split_buses.contains(&s.bus))
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PowerFlowError {
    #[error("buses {buses:?} are islanded with nonzero injection")]
    Islanded { buses: Vec<u32> },
    #[error("slack generation {required:.3} MW outside [{min:.3}, {max:.3}]")]
    SlackLimit { required: f64, min: f64, max: f64 },
    #[error("singular susceptance matrix")]
    Singular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlow {
    /// MW from the `from` end to the `to` end, per branch (0 for open branches).
    pub flows: Vec<f64>,
    /// Angle of each bus (busbar A) in rad.
    pub angles: Vec<f64>,
    /// Change of slack-bus generation needed to balance the connected system.
    pub slack_adjustment: f64,
}

impl PowerFlow {
    pub fn loadings(&self, net: &Network) -> Vec<f64> {
        self.flows
            .iter()
            .zip(&net.branches)
            .map(|(f, b)| f.abs() / b.limit_mw)
            .collect()
    }
}

const INJECTION_TOL: f64 = 1e-6;

/// Electrical nodes: one per bus plus one second busbar per split substation.
struct NodeMap {
    count: usize,
    branch_nodes: Vec<(usize, usize)>,
    injection: Vec<f64>,
    bus_of_node: Vec<u32>,
}

fn build_nodes(net: &Network, idx: &NetworkIndex, state: &SwitchState, dispatch: &[f64]) -> NodeMap {
    let nb = net.buses.len();
    let mut bus_of_node: Vec<u32> = net.buses.iter().map(|b| b.id).collect();
    let mut end_node: HashMap<(u32, BranchEnd), usize> = HashMap::new();
    let mut inj_node: HashMap<Injection, usize> = HashMap::new();
    for (k, split) in state.splits.iter().enumerate() {
        let node = nb + k;
        bus_of_node.push(split.bus);
        for e in &split.branch_ends_on_b {
            end_node.insert(*e, node);
        }
        for i in &split.injections_on_b {
            inj_node.insert(*i, node);
        }
    }
    let count = nb + state.splits.len();
    let branch_nodes = net
        .branches
        .iter()
        .map(|br| {
            let f = end_node
                .get(&(br.id, BranchEnd::From))
                .copied()
                .unwrap_or(idx.bus[&br.from_bus]);
            let t = end_node
                .get(&(br.id, BranchEnd::To))
                .copied()
                .unwrap_or(idx.bus[&br.to_bus]);
            (f, t)
        })
        .collect();
    let mut injection = vec![0.0; count];
    for (g, p) in net.generators.iter().zip(dispatch) {
        let node = inj_node
            .get(&Injection::Generator(g.id))
            .copied()
            .unwrap_or(idx.bus[&g.bus]);
        injection[node] += p;
    }
    for (i, b) in net.buses.iter().enumerate() {
        if b.load_mw != 0.0 {
            let node = inj_node.get(&Injection::Load(b.id)).copied().unwrap_or(i);
            injection[node] -= b.load_mw;
        }
    }
    NodeMap {
        count,
        branch_nodes,
        injection,
        bus_of_node,
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Solves the DC power flow. The slack bus generators absorb any imbalance
/// of the slack island within their bounds; any other island must carry no
/// injection at all.
pub fn solve_dc_power_flow(
    net: &Network,
    state: &SwitchState,
    dispatch: &[f64],
) -> Result<PowerFlow, PowerFlowError> {
    let idx = net.index();
    let nodes = build_nodes(net, &idx, state, dispatch);
    let mut parent: Vec<usize> = (0..nodes.count).collect();
    for (br, &(f, t)) in net.branches.iter().zip(&nodes.branch_nodes) {
        if !state.open.contains(&br.id) {
            let (a, b) = (find(&mut parent, f), find(&mut parent, t));
            if a != b {
                parent[a] = b;
            }
        }
    }

    let slack = net.slack_bus().expect("validated network has a slack bus");
    let slack_node = net
        .generators
        .iter()
        .find(|g| g.bus == slack.id)
        .and_then(|g| {
            state
                .splits
                .iter()
                .position(|s| s.injections_on_b.contains(&Injection::Generator(g.id)))
        })
        .map_or(idx.bus[&slack.id], |k| net.buses.len() + k);
    let slack_root = find(&mut parent, slack_node);

    let mut injection = nodes.injection.clone();
    let mut islanded = Vec::new();
    let mut slack_mismatch = 0.0;
    for n in 0..nodes.count {
        let root = find(&mut parent, n);
        if root == slack_root {
            slack_mismatch += injection[n];
        } else if injection[n].abs() > INJECTION_TOL {
            islanded.push(nodes.bus_of_node[n]);
        }
    }
    if !islanded.is_empty() {
        islanded.sort_unstable();
        islanded.dedup();
        return Err(PowerFlowError::Islanded { buses: islanded });
    }

    let slack_adjustment = -slack_mismatch;
    if slack_adjustment.abs() > INJECTION_TOL {
        let (mut current, mut lo, mut hi) = (0.0, 0.0, 0.0);
        for (g, p) in net.generators.iter().zip(dispatch) {
            if g.bus == slack.id {
                current += p;
                lo += g.p_min;
                hi += g.p_max;
            }
        }
        let required = current + slack_adjustment;
        if required < lo - INJECTION_TOL || required > hi + INJECTION_TOL {
            return Err(PowerFlowError::SlackLimit {
                required,
                min: lo,
                max: hi,
            });
        }
    }
    injection[slack_node] += slack_adjustment;

    // Reduced susceptance system over the slack island, slack node as reference.
    let members: Vec<usize> = (0..nodes.count)
        .filter(|&n| n != slack_node && find(&mut parent, n) == slack_root)
        .collect();
    let pos: HashMap<usize, usize> = members.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let m = members.len();
    let mut theta_nodes = vec![0.0; nodes.count];
    if m > 0 {
        let mut bmat = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for (i, &n) in members.iter().enumerate() {
            rhs[i] = injection[n] / net.base_mva;
        }
        for (br, &(f, t)) in net.branches.iter().zip(&nodes.branch_nodes) {
            if state.open.contains(&br.id) || f == t {
                continue;
            }
            let b = br.susceptance;
            match (pos.get(&f), pos.get(&t)) {
                (Some(&i), Some(&j)) => {
                    bmat[(i, i)] += b;
                    bmat[(j, j)] += b;
                    bmat[(i, j)] -= b;
                    bmat[(j, i)] -= b;
                }
                (Some(&i), None) | (None, Some(&i)) => bmat[(i, i)] += b,
                (None, None) => {}
            }
        }
        let sol = bmat.lu().solve(&rhs).ok_or(PowerFlowError::Singular)?;
        for (i, &n) in members.iter().enumerate() {
            theta_nodes[n] = sol[i];
        }
    }

    let flows = net
        .branches
        .iter()
        .zip(&nodes.branch_nodes)
        .map(|(br, &(f, t))| {
            if state.open.contains(&br.id) {
                0.0
            } else {
                net.base_mva * br.susceptance * (theta_nodes[f] - theta_nodes[t])
            }
        })
        .collect();
    Ok(PowerFlow {
        flows,
        angles: theta_nodes[..net.buses.len()].to_vec(),
        slack_adjustment,
    })
}

/// Cheapest-first dispatch that covers the total load, ignoring the grid.
pub fn merit_order_dispatch(net: &Network) -> Vec<f64> {
    let mut dispatch: Vec<f64> = net.generators.iter().map(|g| g.p_min).collect();
    let mut remaining = net.total_load() - dispatch.iter().sum::<f64>();
    let mut order: Vec<usize> = (0..net.generators.len()).collect();
    order.sort_by(|&a, &b| {
        net.generators[a]
            .cost_per_mwh
            .total_cmp(&net.generators[b].cost_per_mwh)
    });
    for g in order {
        if remaining <= 0.0 {
            break;
        }
        let head = net.generators[g].p_max - dispatch[g];
        let add = head.min(remaining);
        dispatch[g] += add;
        remaining -= add;
    }
    dispatch
}
