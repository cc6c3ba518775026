//! Evaluation functions used to simulate operator feedback, and rankings.

mod sequence;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Network, SwitchLayout, Topology};
use crate::reconfig::Alternative;

pub use sequence::{
    eval_switching_sequence, feasible_by_state_search, first_feasible_ordering, sequence_feasible_by_state_search, SequenceResult, MAX_SEQUENCE_ACTIONS,
    SEQUENCE_LOADING_LIMIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalFn {
    /// Number of specific switching actions included.
    U1,
    /// Whether a specific set of switching actions is in its target state.
    U2,
    /// Topological depth.
    U3,
    /// Cumulative overload above the threshold.
    U4,
    /// Cumulative quadratic load.
    U5,
    /// Switching-sequence feasibility.
    U6,
}

impl EvalFn {
    pub const ALL: [EvalFn; 6] = [EvalFn::U1, EvalFn::U2, EvalFn::U3, EvalFn::U4, EvalFn::U5, EvalFn::U6];

    pub fn direction(self) -> Direction {
        match self {
            EvalFn::U1 | EvalFn::U2 | EvalFn::U6 => Direction::Maximize,
            EvalFn::U3 | EvalFn::U4 | EvalFn::U5 => Direction::Minimize,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EvalFn::U1 => "u1",
            EvalFn::U2 => "u2",
            EvalFn::U3 => "u3",
            EvalFn::U4 => "u4",
            EvalFn::U5 => "u5",
            EvalFn::U6 => "u6",
        }
    }
}

impl fmt::Display for EvalFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EvalFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EvalFn::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown evaluation function '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    /// True if `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Maximize => a > b,
            Direction::Minimize => a < b,
        }
    }
}

/// Required state of the dimensions in `s_spec` for U2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum U2Target {
    /// Every listed dimension is 0.
    #[default]
    Zero,
    /// Every listed dimension is 1, as in the least-cost topology.
    MatchOptimum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalContext {
    pub j_spec: Vec<usize>,
    pub s_spec: Vec<usize>,
    pub u2_target: U2Target,
    pub base_topology: Topology,
    pub overload_threshold: f64,
}

impl EvalContext {
    /// Specific actions taken from the least-cost topology.
    pub fn from_least_cost(least_cost: &Topology) -> Self {
        let actions = least_cost.actions();
        Self {
            j_spec: actions.clone(),
            s_spec: actions,
            u2_target: U2Target::Zero,
            base_topology: Topology::base(least_cost.line_open.len(), least_cost.busbar_split.len()),
            overload_threshold: 0.9,
        }
    }

    pub fn with_u2_target(mut self, target: U2Target) -> Self {
        self.u2_target = target;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.base_topology.dim();
        if let Some(&j) = self.j_spec.iter().chain(&self.s_spec).find(|&&j| j >= n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: j + 1,
            });
        }
        if !(self.overload_threshold > 0.0 && self.overload_threshold <= 1.0) {
            return Err(Error::Domain(format!(
                "overload threshold {} outside (0, 1]",
                self.overload_threshold
            )));
        }
        Ok(())
    }
}

/// U1: number of the dimensions in `j_spec` that are switched.
pub fn eval_specific_actions(t: &Topology, ctx: &EvalContext) -> f64 {
    ctx.j_spec.iter().filter(|&&j| t.bit(j)).count() as f64
}

/// U2: 1 if every dimension in `s_spec` is in its target state.
pub fn eval_specific_set(t: &Topology, ctx: &EvalContext) -> f64 {
    let want = ctx.u2_target == U2Target::MatchOptimum;
    f64::from(u8::from(ctx.s_spec.iter().all(|&j| t.bit(j) == want)))
}

/// U3: switching distance from the base topology.
pub fn eval_topological_depth(t: &Topology, ctx: &EvalContext) -> f64 {
    t.bits()
        .zip(ctx.base_topology.bits())
        .filter(|(a, b)| a != b)
        .count() as f64
}

fn loadings(alt: &Alternative, net: &Network) -> Result<Vec<f64>> {
    if alt.flows.len() != net.branches.len() {
        return Err(Error::DimensionMismatch {
            expected: net.branches.len(),
            found: alt.flows.len(),
        });
    }
    net.branches
        .iter()
        .zip(&alt.flows)
        .map(|(b, f)| {
            if b.limit_mw > 0.0 {
                Ok(f.abs() / b.limit_mw)
            } else {
                Err(Error::Data(format!("branch {} has limit {}", b.id, b.limit_mw)))
            }
        })
        .collect()
}

/// U4: Σ max(0, loading - threshold). Open lines carry no flow.
pub fn eval_cumulative_overload(alt: &Alternative, net: &Network, ctx: &EvalContext) -> Result<f64> {
    Ok(cumulative_overload(&loadings(alt, net)?, ctx.overload_threshold))
}

/// U5: Σ loading².
pub fn eval_cumulative_quadratic_load(alt: &Alternative, net: &Network) -> Result<f64> {
    Ok(cumulative_quadratic_load(&loadings(alt, net)?))
}

pub fn cumulative_overload(loadings: &[f64], threshold: f64) -> f64 {
    loadings.iter().map(|p| (p - threshold).max(0.0)).sum()
}

pub fn cumulative_quadratic_load(loadings: &[f64]) -> f64 {
    loadings.iter().map(|p| p * p).sum()
}

/// Value of `fn_id` for one alternative.
pub fn evaluate(
    fn_id: EvalFn,
    alt: &Alternative,
    net: &Network,
    layout: &SwitchLayout,
    ctx: &EvalContext,
) -> Result<f64> {
    Ok(match fn_id {
        EvalFn::U1 => eval_specific_actions(&alt.topology, ctx),
        EvalFn::U2 => eval_specific_set(&alt.topology, ctx),
        EvalFn::U3 => eval_topological_depth(&alt.topology, ctx),
        EvalFn::U4 => eval_cumulative_overload(alt, net, ctx)?,
        EvalFn::U5 => eval_cumulative_quadratic_load(alt, net)?,
        EvalFn::U6 => {
            let r = eval_switching_sequence(alt, net, layout)?;
            f64::from(u8::from(r.feasible))
        }
    })
}

/// Indices sorted best first; ties keep the lower index first.
pub fn rank_by_values(values: &[f64], direction: Direction) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| match direction {
        Direction::Minimize => values[a].total_cmp(&values[b]),
        Direction::Maximize => values[b].total_cmp(&values[a]),
    });
    order
}

/// Ranking of `alts` by `fn_id` (alternative positions, best first).
pub fn rank_alternatives(
    alts: &[Alternative],
    fn_id: EvalFn,
    net: &Network,
    layout: &SwitchLayout,
    ctx: &EvalContext,
) -> Result<Vec<usize>> {
    let values = alts
        .iter()
        .map(|a| evaluate(fn_id, a, net, layout, ctx))
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_by_values(&values, fn_id.direction()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(n: usize, j: &[usize]) -> EvalContext {
        EvalContext {
            j_spec: j.to_vec(),
            s_spec: j.to_vec(),
            u2_target: U2Target::Zero,
            base_topology: Topology::base(n, 0),
            overload_threshold: 0.9,
        }
    }

    fn topo(bits: &[u8]) -> Topology {
        let b: Vec<bool> = bits.iter().map(|&x| x == 1).collect();
        Topology::from_bits(&b, b.len())
    }

    #[test]
    fn specific_actions() {
        let t = topo(&[0, 0, 1, 0, 0, 0]);
        assert_eq!(eval_specific_actions(&t, &ctx(6, &[2, 5])), 1.0);
        assert_eq!(eval_specific_actions(&t, &ctx(6, &[])), 0.0);
        let lc = topo(&[1, 0, 1, 1]);
        let c = EvalContext::from_least_cost(&lc);
        assert_eq!(eval_specific_actions(&lc, &c), 3.0);
    }

    #[test]
    fn specific_set() {
        let c = ctx(4, &[1, 3]);
        assert_eq!(eval_specific_set(&topo(&[1, 0, 1, 0]), &c), 1.0);
        assert_eq!(eval_specific_set(&topo(&[0, 1, 0, 0]), &c), 0.0);
        assert_eq!(eval_specific_set(&topo(&[1, 1, 1, 1]), &ctx(4, &[])), 1.0);
        let m = ctx(4, &[1, 3]).with_u2_target(U2Target::MatchOptimum);
        assert_eq!(eval_specific_set(&topo(&[0, 1, 0, 1]), &m), 1.0);
        assert_eq!(eval_specific_set(&topo(&[0, 1, 0, 0]), &m), 0.0);
    }

    #[test]
    fn depth() {
        assert_eq!(eval_topological_depth(&topo(&[1, 1, 0, 0, 0]), &ctx(5, &[])), 2.0);
        assert_eq!(eval_topological_depth(&topo(&[0, 0, 0, 0, 0]), &ctx(5, &[])), 0.0);
    }

    #[test]
    fn overload_and_quadratic() {
        let p = [0.95, 0.89, 1.10];
        assert!((cumulative_overload(&p, 0.9) - 0.25).abs() < 1e-12);
        assert_eq!(cumulative_overload(&[0.2, 0.9], 0.9), 0.0);
        assert!((cumulative_quadratic_load(&[0.5, 1.0, 0.2]) - 1.29).abs() < 1e-12);
        assert_eq!(cumulative_quadratic_load(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn ranking() {
        assert_eq!(rank_by_values(&[3.2, 1.1, 2.0], Direction::Minimize), vec![1, 2, 0]);
        assert_eq!(rank_by_values(&[3.2, 1.1, 2.0], Direction::Maximize), vec![0, 2, 1]);
        assert_eq!(rank_by_values(&[1.0; 4], Direction::Minimize), vec![0, 1, 2, 3]);
        assert_eq!(rank_by_values(&[1.0; 4], Direction::Maximize), vec![0, 1, 2, 3]);
    }

    #[test]
    fn fn_names_round_trip() {
        for f in EvalFn::ALL {
            assert_eq!(f.name().parse::<EvalFn>().unwrap(), f);
        }
        assert!("u7".parse::<EvalFn>().is_err());
    }
}
