use std::collections::HashMap;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::dcpf::{solve_dc_power_flow, SwitchState};
use crate::error::{Error, Result};
use crate::network::{Network, SwitchLayout, Topology};
use crate::reconfig::Alternative;

/// Longest action list searched exhaustively.
pub const MAX_SEQUENCE_ACTIONS: usize = 8;
/// Highest loading allowed in an intermediate state (plus a small tolerance).
pub const SEQUENCE_LOADING_LIMIT: f64 = 1.0;
const LOADING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub feasible: bool,
    /// z-dimensions in switching order, if a feasible order exists.
    pub order: Option<Vec<usize>>,
}

/// Tries every ordering of `n` actions; `ok(mask)` tells whether the state
/// with the actions in `mask` applied is operable. Returns the first
/// feasible ordering in lexicographic order.
pub fn first_feasible_ordering(n: usize, mut ok: impl FnMut(u32) -> bool) -> Option<Vec<usize>> {
    if n == 0 {
        return Some(Vec::new());
    }
    let mut cache: HashMap<u32, bool> = HashMap::new();
    (0..n).permutations(n).find(|perm| {
        let mut mask = 0u32;
        perm.iter().all(|&a| {
            mask |= 1 << a;
            *cache.entry(mask).or_insert_with(|| ok(mask))
        })
    })
}

/// Depth-first search over sets of applied actions with memoized dead ends.
pub fn feasible_by_state_search(n: usize, mut ok: impl FnMut(u32) -> bool) -> bool {
    fn reach(mask: u32, full: u32, n: usize, ok: &mut dyn FnMut(u32) -> bool, memo: &mut HashMap<u32, bool>) -> bool {
        if mask == full {
            return true;
        }
        if let Some(&r) = memo.get(&mask) {
            return r;
        }
        let mut r = false;
        for a in 0..n {
            let next = mask | (1 << a);
            if next != mask && ok(next) && reach(next, full, n, ok, memo) {
                r = true;
                break;
            }
        }
        memo.insert(mask, r);
        r
    }
    let full = if n == 0 { 0 } else { (1u32 << n) - 1 };
    reach(0, full, n, &mut ok, &mut HashMap::new())
}

/// Operability of the state where only the actions selected by `mask`
/// (bits indexing `actions`) are applied, under the alternative's dispatch.
fn state_operable(alt: &Alternative, net: &Network, layout: &SwitchLayout, actions: &[usize], mask: u32) -> bool {
    let mut bits = vec![false; alt.topology.dim()];
    for (k, &j) in actions.iter().enumerate() {
        if mask & (1 << k) != 0 {
            bits[j] = true;
        }
    }
    let t = Topology::from_bits(&bits, alt.topology.line_open.len());
    let state = SwitchState::from_topology(net, layout, &t, &alt.splits);
    match solve_dc_power_flow(net, &state, &alt.dispatch) {
        Ok(pf) => pf
            .loadings(net)
            .iter()
            .all(|&p| p <= SEQUENCE_LOADING_LIMIT + LOADING_TOL),
        Err(_) => false,
    }
}

fn checked_actions(alt: &Alternative, layout: &SwitchLayout) -> Result<Vec<usize>> {
    if alt.topology.dim() != layout.dim() {
        return Err(Error::DimensionMismatch {
            expected: layout.dim(),
            found: alt.topology.dim(),
        });
    }
    let actions = alt.topology.actions();
    if actions.len() > MAX_SEQUENCE_ACTIONS {
        return Err(Error::Unsupported(format!(
            "{} switching actions exceed the sequence search limit of {MAX_SEQUENCE_ACTIONS}",
            actions.len()
        )));
    }
    Ok(actions)
}

/// U6: whether the actions of `alt` can be applied one at a time, from the
/// base topology, with every intermediate state operable at the
/// alternative's fixed dispatch.
pub fn eval_switching_sequence(alt: &Alternative, net: &Network, layout: &SwitchLayout) -> Result<SequenceResult> {
    let actions = checked_actions(alt, layout)?;
    let order = first_feasible_ordering(actions.len(), |mask| state_operable(alt, net, layout, &actions, mask))
        .map(|perm| perm.into_iter().map(|k| actions[k]).collect::<Vec<_>>());
    Ok(SequenceResult {
        feasible: order.is_some(),
        order,
    })
}

/// Same question as [`eval_switching_sequence`], answered by the set-state search.
pub fn sequence_feasible_by_state_search(alt: &Alternative, net: &Network, layout: &SwitchLayout) -> Result<bool> {
    let actions = checked_actions(alt, layout)?;
    Ok(feasible_by_state_search(actions.len(), |mask| {
        state_operable(alt, net, layout, &actions, mask)
    }))
}
