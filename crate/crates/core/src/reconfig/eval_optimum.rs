use serde::{Deserialize, Serialize};

use super::{ReconfigModel, Solver};
use crate::error::{Error, Result};
use crate::evaluation::{Direction, EvalContext, EvalFn, U2Target};
use crate::network::Topology;
use crate::solver::{SolveError, VarId};

/// Tangent cuts used for the quadratic load.
pub const U5_SEGMENTS: usize = 12;
/// Loading range covered by the tangent points.
pub const U5_LOADING_RANGE: (f64, f64) = (0.0, 1.2);

/// Optimum of one evaluation function over the ε-feasible set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalBound {
    pub fn_id: EvalFn,
    pub direction: Direction,
    /// Proven bound: no feasible topology does better than this.
    pub bound: f64,
    /// Value of the best solution found, in evaluation-function units.
    pub incumbent: f64,
    /// For U5: true quadratic load minus its linearization at the incumbent.
    pub approximation_gap: f64,
    pub topology: Topology,
}

/// Optimizes `fn_id` directly under the cost budget `f*(1+ε)`.
///
/// U5 uses tangent cuts at `U5_SEGMENTS + 1` uniform points, which never
/// overestimate the square, so the returned bound stays valid for the exact
/// function.
pub fn solve_eval_optimum(
    model: &ReconfigModel,
    solver: &Solver,
    fn_id: EvalFn,
    ctx: &EvalContext,
    f_star: f64,
    epsilon: f64,
) -> Result<EvalBound> {
    if fn_id == EvalFn::U6 {
        return Err(Error::Unsupported(
            "switching-sequence feasibility cannot be optimized".to_string(),
        ));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::Domain(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    for &j in ctx.j_spec.iter().chain(&ctx.s_spec) {
        if j >= model.n() {
            return Err(Error::DimensionMismatch {
                expected: model.n(),
                found: j + 1,
            });
        }
    }
    let mut pb = model.budget_problem(f_star, epsilon);
    let z = model.z_vars().to_vec();
    let net = model.network().clone();
    let flow = model.flow_vars().to_vec();
    let limits: Vec<f64> = net.branches.iter().map(|b| b.limit_mw).collect();

    let mut aux: Vec<VarId> = Vec::new();
    // objective terms for minimization; maximized functions are negated
    let objective: Vec<(VarId, f64)> = match fn_id {
        EvalFn::U1 => ctx.j_spec.iter().map(|&j| (z[j], -1.0)).collect(),
        EvalFn::U2 => {
            let y = pb.add_binary();
            for &j in &ctx.s_spec {
                match ctx.u2_target {
                    U2Target::Zero => pb.add_le(vec![(y, 1.0), (z[j], 1.0)], 1.0),
                    U2Target::MatchOptimum => pb.add_le(vec![(y, 1.0), (z[j], -1.0)], 0.0),
                };
            }
            vec![(y, -1.0)]
        }
        EvalFn::U3 => z.iter().map(|&v| (v, 1.0)).collect(),
        EvalFn::U4 => {
            let th = ctx.overload_threshold;
            for (&p, &lim) in flow.iter().zip(&limits) {
                let o = pb.add_var(0.0, f64::INFINITY);
                pb.add_le(vec![(p, 1.0 / lim), (o, -1.0)], th);
                pb.add_le(vec![(p, -1.0 / lim), (o, -1.0)], th);
                aux.push(o);
            }
            aux.iter().map(|&o| (o, 1.0)).collect()
        }
        EvalFn::U5 => {
            let (lo, hi) = U5_LOADING_RANGE;
            let step = (hi - lo) / U5_SEGMENTS as f64;
            for (&p, &lim) in flow.iter().zip(&limits) {
                let q = pb.add_var(0.0, f64::INFINITY);
                for k in 0..=U5_SEGMENTS {
                    let u = lo + step * k as f64;
                    // q >= 2u·(±P/lim) - u²
                    pb.add_le(vec![(p, 2.0 * u / lim), (q, -1.0)], u * u);
                    pb.add_le(vec![(p, -2.0 * u / lim), (q, -1.0)], u * u);
                }
                aux.push(q);
            }
            aux.iter().map(|&q| (q, 1.0)).collect()
        }
        EvalFn::U6 => unreachable!(),
    };
    pb.set_objective(&objective);

    let sol = solver.backend.solve(&pb, &solver.options).map_err(|e| match e {
        SolveError::Infeasible => Error::Infeasible(model.diagnose(solver, "evaluation optimum", &pb)),
        SolveError::TimeLimit { incumbent } => Error::Timeout {
            has_incumbent: incumbent.is_some(),
        },
        other => Error::Solver(format!("evaluation optimum: {other}")),
    })?;

    let direction = fn_id.direction();
    let sign = match direction {
        Direction::Maximize => -1.0,
        Direction::Minimize => 1.0,
    };
    let approximation_gap = if fn_id == EvalFn::U5 {
        let exact: f64 = flow
            .iter()
            .zip(&limits)
            .map(|(&p, &lim)| (sol.value(p) / lim).powi(2))
            .sum();
        exact - sol.objective
    } else {
        0.0
    };
    let mut bound = sign * sol.dual_bound.max(f64::MIN);
    if !sol.dual_bound.is_finite() {
        bound = sign * sol.objective;
    }
    Ok(EvalBound {
        fn_id,
        direction,
        // adding zero turns a negated 0.0 into plain 0.0
        bound: bound + 0.0,
        incumbent: sign * sol.objective + 0.0,
        approximation_gap,
        topology: model.topology_of(&sol),
    })
}
