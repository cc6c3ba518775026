//! Independent reference computations: every topology is enumerated and its
//! dispatch solved as a plain LP built directly with HiGHS.

#![allow(dead_code)]

use gridmga_core::Network;
use highs::{HighsModelStatus, RowProblem, Sense};
use itertools::Itertools;

pub const ANGLE_BOUND: f64 = 0.6;

#[derive(Debug, Clone, Copy)]
pub enum LpObjective {
    Cost,
    /// Minimize (sign = 1) or maximize (sign = -1) one generator's output.
    Generator(usize, f64),
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub objective: f64,
    pub cost: f64,
    pub dispatch: Vec<f64>,
    pub flows: Vec<f64>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// DC-OPF dispatch LP for `open` (one flag per branch). Buses cut off from
/// the slack bus must carry no load and get their generators pinned to zero.
pub fn dispatch_lp(
    net: &Network,
    open: &[bool],
    budget: Option<f64>,
    objective: LpObjective,
    fixed: &[(usize, f64)],
) -> Option<LpResult> {
    let nb = net.buses.len();
    let pos = |id: u32| net.buses.iter().position(|b| b.id == id).unwrap();
    let mut parent: Vec<usize> = (0..nb).collect();
    for (br, &o) in net.branches.iter().zip(open) {
        if !o {
            let (a, b) = (find(&mut parent, pos(br.from_bus)), find(&mut parent, pos(br.to_bus)));
            parent[a] = b;
        }
    }
    let slack = net.buses.iter().position(|b| b.is_slack).unwrap();
    let root = find(&mut parent, slack);
    let connected: Vec<bool> = (0..nb).map(|i| find(&mut parent, i) == root).collect();
    if net.buses.iter().zip(&connected).any(|(b, &c)| !c && b.load_mw.abs() > 1e-9) {
        return None;
    }

    let mut pb = RowProblem::default();
    let gens: Vec<_> = net
        .generators
        .iter()
        .enumerate()
        .map(|(g, gen)| {
            let c = match objective {
                LpObjective::Cost => gen.cost_per_mwh,
                LpObjective::Generator(k, sign) if k == g => sign,
                LpObjective::Generator(..) => 0.0,
            };
            let (mut lo, mut hi) = (gen.p_min, gen.p_max);
            if !connected[pos(gen.bus)] {
                hi = 0.0;
                lo = lo.min(0.0);
            }
            if let Some(&(_, v)) = fixed.iter().find(|(k, _)| *k == g) {
                lo = v;
                hi = v;
            }
            pb.add_column(c, lo..=hi)
        })
        .collect();
    let theta: Vec<_> = (0..nb)
        .map(|i| if i == slack { pb.add_column(0.0, 0.0..=0.0) } else { pb.add_column(0.0, -ANGLE_BOUND..=ANGLE_BOUND) })
        .collect();
    let mut balance: Vec<Vec<(highs::Col, f64)>> = vec![Vec::new(); nb];
    for (g, gen) in net.generators.iter().enumerate() {
        balance[pos(gen.bus)].push((gens[g], 1.0));
    }
    for (br, &o) in net.branches.iter().zip(open) {
        if o {
            continue;
        }
        let (f, t) = (pos(br.from_bus), pos(br.to_bus));
        let k = net.base_mva * br.susceptance;
        // flow f->t = k (θf - θt); leaves f, enters t
        balance[f].push((theta[f], -k));
        balance[f].push((theta[t], k));
        balance[t].push((theta[f], k));
        balance[t].push((theta[t], -k));
        pb.add_row(-br.limit_mw..=br.limit_mw, [(theta[f], k), (theta[t], -k)]);
    }
    for (i, terms) in balance.into_iter().enumerate() {
        let d = net.buses[i].load_mw;
        let mut merged: Vec<(highs::Col, f64)> = Vec::new();
        for (c, a) in terms {
            match merged.iter_mut().find(|(m, _)| *m == c) {
                Some(e) => e.1 += a,
                None => merged.push((c, a)),
            }
        }
        pb.add_row(d..=d, merged);
    }
    if let Some(budget) = budget {
        let terms: Vec<_> = gens.iter().zip(&net.generators).map(|(c, g)| (*c, g.cost_per_mwh)).collect();
        pb.add_row(..=budget, terms);
    }
    let mut model = pb.optimise(Sense::Minimise);
    model.make_quiet();
    let solved = model.solve();
    if solved.status() != HighsModelStatus::Optimal {
        return None;
    }
    let sol = solved.get_solution();
    let cols = sol.columns();
    let dispatch: Vec<f64> = cols[..net.generators.len()].to_vec();
    let th = &cols[net.generators.len()..];
    let flows = net
        .branches
        .iter()
        .zip(open)
        .map(|(br, &o)| if o { 0.0 } else { net.base_mva * br.susceptance * (th[pos(br.from_bus)] - th[pos(br.to_bus)]) })
        .collect();
    let cost = dispatch.iter().zip(&net.generators).map(|(p, g)| p * g.cost_per_mwh).sum();
    let objective = match objective {
        LpObjective::Cost => cost,
        LpObjective::Generator(k, sign) => sign * dispatch[k],
    };
    Some(LpResult { objective, cost, dispatch, flows })
}

/// Every combination of at most `max_actions` switchable branches, as
/// `(z bits over switchable branches, open flag per branch)`.
pub fn topologies(net: &Network, max_actions: usize) -> Vec<(Vec<bool>, Vec<bool>)> {
    let switchable: Vec<usize> = (0..net.branches.len()).filter(|&i| net.branches[i].switchable).collect();
    let mut out = Vec::new();
    for k in 0..=max_actions.min(switchable.len()) {
        for combo in switchable.iter().copied().combinations(k) {
            let open: Vec<bool> = (0..net.branches.len()).map(|i| combo.contains(&i)).collect();
            let z: Vec<bool> = switchable.iter().map(|i| open[*i]).collect();
            out.push((z, open));
        }
    }
    out
}

pub fn least_cost(net: &Network, max_actions: usize) -> Option<(f64, Vec<bool>)> {
    topologies(net, max_actions)
        .into_iter()
        .filter_map(|(z, open)| dispatch_lp(net, &open, None, LpObjective::Cost, &[]).map(|r| (r.cost, z)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

/// Minimum of `w·z - (f*(1+ε) - cost) / (100 f*)` over topologies within budget.
pub fn best_alternative(net: &Network, max_actions: usize, weights: &[f64], f_star: f64, epsilon: f64) -> Option<(f64, Vec<bool>)> {
    let budget = f_star * (1.0 + epsilon);
    topologies(net, max_actions)
        .into_iter()
        .filter_map(|(z, open)| {
            let r = dispatch_lp(net, &open, Some(budget), LpObjective::Cost, &[])?;
            let wz: f64 = z.iter().zip(weights).map(|(b, w)| if *b { *w } else { 0.0 }).sum();
            Some((wz - (budget - r.cost) / (100.0 * f_star), z))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

/// Topologies whose least dispatch cost fits the budget.
pub fn feasible_topologies(net: &Network, max_actions: usize, budget: f64) -> Vec<Vec<bool>> {
    topologies(net, max_actions)
        .into_iter()
        .filter(|(_, open)| dispatch_lp(net, open, Some(budget), LpObjective::Cost, &[]).is_some())
        .map(|(z, _)| z)
        .collect()
}

/// Exact minimum of Σ (|P|/limit)² over topologies and dispatches within
/// budget, for networks with exactly two generators (one degree of freedom:
/// the loading is affine in the second generator's output, so the sum is a
/// parabola on the feasible interval).
pub fn min_quadratic_load_two_gens(net: &Network, max_actions: usize, budget: f64) -> Option<f64> {
    assert_eq!(net.generators.len(), 2);
    let u5 = |flows: &[f64]| -> f64 { flows.iter().zip(&net.branches).map(|(f, b)| (f / b.limit_mw).powi(2)).sum() };
    topologies(net, max_actions)
        .into_iter()
        .filter_map(|(_, open)| {
            let lo = dispatch_lp(net, &open, Some(budget), LpObjective::Generator(1, 1.0), &[])?.dispatch[1];
            let hi = dispatch_lp(net, &open, Some(budget), LpObjective::Generator(1, -1.0), &[])?.dispatch[1];
            let at = |p: f64| dispatch_lp(net, &open, None, LpObjective::Cost, &[(1, p)]).map(|r| u5(&r.flows));
            if hi - lo < 1e-9 {
                return at(lo);
            }
            let mid = 0.5 * (lo + hi);
            let (a, m, b) = (at(lo)?, at(mid)?, at(hi)?);
            // parabola through the three samples, minimized on [lo, hi]
            let h = 0.5 * (hi - lo);
            let curv = (a - 2.0 * m + b) / (2.0 * h * h);
            let slope = (b - a) / (2.0 * h);
            let mut best = a.min(b);
            if curv > 0.0 {
                let x = (-slope / (2.0 * curv)).clamp(-h, h);
                best = best.min(m + slope * x + curv * x * x);
            }
            Some(best)
        })
        .min_by(f64::total_cmp)
}
