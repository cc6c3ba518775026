//! Mixed-integer DC-OPF with line switching and two-busbar substation
//! splitting, and the solves built on it: least cost, near-optimal
//! alternatives under an ε-budget, and evaluation-function optima.

mod eval_optimum;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dcpf::{solve_dc_power_flow, PowerFlowError, SplitAssignment, SwitchState};
use crate::error::{Error, Result};
use crate::network::{BranchEnd, Injection, Network, SwitchLayout, Topology};
use crate::solver::{MilpBackend, MilpProblem, MilpSolution, SolveError, SolveOptions, VarId};

pub use eval_optimum::{solve_eval_optimum, EvalBound, U5_SEGMENTS, U5_LOADING_RANGE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwitchingOptions {
    pub allow_line_switching: bool,
    pub allow_busbar_splitting: bool,
    pub max_line_actions: usize,
    pub max_busbar_actions: usize,
    /// Generators at a split substation may move to busbar B.
    pub reassign_generators: bool,
    /// Loads at a split substation may move to busbar B.
    pub reassign_loads: bool,
    /// Bus angles are bounded to [-angle_bound, angle_bound] rad.
    pub angle_bound: f64,
}

impl Default for SwitchingOptions {
    fn default() -> Self {
        Self::lines_only(3)
    }
}

impl SwitchingOptions {
    pub fn lines_only(max_line_actions: usize) -> Self {
        Self {
            allow_line_switching: true,
            allow_busbar_splitting: false,
            max_line_actions,
            max_busbar_actions: 0,
            reassign_generators: true,
            reassign_loads: true,
            angle_bound: 0.6,
        }
    }

    pub fn lines_and_busbars(max_line_actions: usize, max_busbar_actions: usize) -> Self {
        Self {
            allow_busbar_splitting: true,
            max_busbar_actions,
            ..Self::lines_only(max_line_actions)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.allow_line_switching && self.max_line_actions > 0 {
            return Err(Error::Config(
                "line switching is disabled but max_line_actions > 0".to_string(),
            ));
        }
        if !self.allow_busbar_splitting && self.max_busbar_actions > 0 {
            return Err(Error::Config(
                "busbar splitting is disabled but max_busbar_actions > 0".to_string(),
            ));
        }
        if !(self.angle_bound > 0.0) {
            return Err(Error::Config("angle_bound must be positive".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundLabel {
    LeastCost,
    Mga,
    HitlBaseline,
    HitlV1,
    HitlV2,
}

impl fmt::Display for RoundLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RoundLabel::LeastCost => "least-cost",
            RoundLabel::Mga => "mga",
            RoundLabel::HitlBaseline => "hitl-baseline",
            RoundLabel::HitlV1 => "hitl-v1",
            RoundLabel::HitlV2 => "hitl-v2",
        })
    }
}

/// A topology together with its dispatch and the resulting power flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub index: usize,
    pub topology: Topology,
    /// Busbar-B assignments of every split substation.
    pub splits: Vec<SplitAssignment>,
    /// MW per generator.
    pub dispatch: Vec<f64>,
    /// MW per branch, from-end to to-end.
    pub flows: Vec<f64>,
    /// Bus angles in rad.
    pub angles: Vec<f64>,
    /// Generation cost f(x).
    pub cost: f64,
    /// Unused part of the cost budget, f*(1+ε) - f(x).
    pub slack: f64,
    pub objective_value: f64,
    pub solver_gap: f64,
    pub weight_seed: u64,
    pub round: RoundLabel,
    pub unique: bool,
}

impl Alternative {
    /// |flow| / limit per branch.
    pub fn loadings(&self, net: &Network) -> Vec<f64> {
        self.flows
            .iter()
            .zip(&net.branches)
            .map(|(f, b)| f.abs() / b.limit_mw)
            .collect()
    }
}

/// Linear objective over `z` plus a coefficient on the budget slack `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub z_coefficients: Vec<f64>,
    pub slack_coefficient: f64,
}

impl ObjectiveSpec {
    /// `w^T z - s / (100 f*)`.
    pub fn augmented(weights: Vec<f64>, f_star: f64) -> Self {
        Self {
            z_coefficients: weights,
            slack_coefficient: augmentation_coefficient(f_star),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.z_coefficients.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.z_coefficients.len(),
            });
        }
        if !self
            .z_coefficients
            .iter()
            .chain(std::iter::once(&self.slack_coefficient))
            .all(|c| c.is_finite())
        {
            return Err(Error::Domain("objective coefficients must be finite".to_string()));
        }
        Ok(())
    }
}

/// Coefficient of the slack in the augmented objective, `-1 / (100 f*)`.
pub fn augmentation_coefficient(f_star: f64) -> f64 {
    -1.0 / (100.0 * f_star)
}

/// Why a solve found no feasible point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityReport {
    pub stage: String,
    /// Constraint groups whose relaxation restores feasibility.
    pub binding: Vec<String>,
}

impl fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.binding.is_empty() {
            write!(f, "{}: no single relaxation restores feasibility", self.stage)
        } else {
            write!(f, "{}: binding {}", self.stage, self.binding.join(", "))
        }
    }
}

/// Backend plus the settings shared by every solve.
#[derive(Clone)]
pub struct Solver {
    pub backend: Arc<dyn MilpBackend>,
    pub options: SolveOptions,
    /// Re-optimize the dispatch for minimum cost once the topology is fixed.
    pub polish_dispatch: bool,
    /// Islanding no-good cuts tried before giving up.
    pub max_island_cuts: usize,
}

impl fmt::Debug for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Solver")
            .field("backend", &self.backend.name())
            .field("options", &self.options)
            .field("polish_dispatch", &self.polish_dispatch)
            .finish()
    }
}

impl Solver {
    pub fn new(backend: Arc<dyn MilpBackend>, relative_gap: f64) -> Self {
        Self {
            backend,
            options: SolveOptions {
                relative_gap,
                ..SolveOptions::default()
            },
            polish_dispatch: true,
            max_island_cuts: 200,
        }
    }

    /// The compiled-in backend with the given gap.
    pub fn with_default_backend(relative_gap: f64) -> Result<Self> {
        let backend = crate::solver::default_backend()
            .ok_or_else(|| Error::Config("no MILP backend compiled into this build".to_string()))?;
        Ok(Self::new(Arc::from(backend), relative_gap))
    }

    fn run(&self, problem: &MilpProblem) -> std::result::Result<MilpSolution, SolveError> {
        self.backend.solve(problem, &self.options)
    }
}

#[derive(Debug, Clone)]
struct SplitVars {
    substation: usize,
    z: VarId,
    ends: Vec<((u32, BranchEnd), VarId)>,
    injections: Vec<(Injection, VarId)>,
}

/// The reconfiguration MILP for one network and one set of switching options.
#[derive(Debug, Clone)]
pub struct ReconfigModel {
    network: Arc<Network>,
    options: SwitchingOptions,
    layout: SwitchLayout,
    problem: MilpProblem,
    z: Vec<VarId>,
    gen: Vec<VarId>,
    flow: Vec<VarId>,
    splits: Vec<SplitVars>,
    balance_rows: usize,
}

/// Which end of a branch at a split substation carries which angle/flow variable.
#[derive(Clone, Copy)]
struct EndVars {
    theta: VarId,
    flow_a: VarId,
}

impl ReconfigModel {
    pub fn build(network: Arc<Network>, options: SwitchingOptions) -> Result<Self> {
        options.validate()?;
        network.validate().into_result()?;
        let net = &*network;
        let idx = net.index();
        let layout = SwitchLayout::new(net, options.allow_line_switching, options.allow_busbar_splitting);
        let theta_max = options.angle_bound;
        let m_theta = 2.0 * theta_max;
        let mut pb = MilpProblem::new();

        let gen: Vec<VarId> = net.generators.iter().map(|g| pb.add_var(g.p_min, g.p_max)).collect();
        let angle: Vec<VarId> = net
            .buses
            .iter()
            .map(|b| if b.is_slack { pb.add_var(0.0, 0.0) } else { pb.add_var(-theta_max, theta_max) })
            .collect();
        let flow: Vec<VarId> = net.branches.iter().map(|b| pb.add_var(-b.limit_mw, b.limit_mw)).collect();

        let mut z = Vec::with_capacity(layout.dim());
        let mut line_z = vec![None; net.branches.len()];
        for &bi in &layout.line_branches {
            let v = pb.add_binary();
            line_z[bi] = Some(v);
            z.push(v);
        }

        // Busbar-side contributions to the balance rows: (terms, constant load) per bus and per busbar B.
        let nb = net.buses.len();
        let mut bal_a: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); nb];
        let mut rhs_a: Vec<f64> = net.buses.iter().map(|b| b.load_mw).collect();
        let mut end_vars: std::collections::HashMap<(u32, BranchEnd), EndVars> = Default::default();
        let mut gen_on_a: Vec<Option<VarId>> = vec![None; net.generators.len()];
        let mut splits = Vec::new();
        let mut bal_b_rows = Vec::new();

        for &si in &layout.split_substations {
            let sub = &net.substations[si];
            let bus_pos = idx.bus[&sub.bus];
            let theta_a = angle[bus_pos];
            let zb = pb.add_binary();
            z.push(zb);
            let theta_b = pb.add_var(-theta_max, theta_max);
            // busbar coupler: angles equal unless split
            pb.add_le(vec![(theta_a, 1.0), (theta_b, -1.0), (zb, -m_theta)], 0.0);
            pb.add_ge(vec![(theta_a, 1.0), (theta_b, -1.0), (zb, m_theta)], 0.0);

            let mut bal_b: Vec<(VarId, f64)> = Vec::new();
            let mut ends = Vec::new();
            for &(br_id, end) in &sub.attached_branch_ends {
                let br = &net.branches[idx.branch[&br_id]];
                let lim = br.limit_mw;
                let x = pb.add_binary();
                let theta_end = pb.add_var(-theta_max, theta_max);
                let pa = pb.add_var(-lim, lim);
                let pbv = pb.add_var(-lim, lim);
                pb.add_le(vec![(x, 1.0), (zb, -1.0)], 0.0);
                pb.add_le(vec![(theta_end, 1.0), (theta_a, -1.0), (x, -m_theta)], 0.0);
                pb.add_ge(vec![(theta_end, 1.0), (theta_a, -1.0), (x, m_theta)], 0.0);
                pb.add_le(vec![(theta_end, 1.0), (theta_b, -1.0), (x, m_theta)], m_theta);
                pb.add_ge(vec![(theta_end, 1.0), (theta_b, -1.0), (x, -m_theta)], -m_theta);
                pb.add_le(vec![(pa, 1.0), (x, lim)], lim);
                pb.add_ge(vec![(pa, 1.0), (x, -lim)], -lim);
                pb.add_le(vec![(pbv, 1.0), (x, -lim)], 0.0);
                pb.add_ge(vec![(pbv, 1.0), (x, lim)], 0.0);
                pb.add_eq(
                    vec![(flow[idx.branch[&br_id]], 1.0), (pa, -1.0), (pbv, -1.0)],
                    0.0,
                );
                end_vars.insert(
                    (br_id, end),
                    EndVars {
                        theta: theta_end,
                        flow_a: pa,
                    },
                );
                // flow leaves the from end and enters the to end
                let sign = if end == BranchEnd::From { -1.0 } else { 1.0 };
                bal_b.push((pbv, sign));
                ends.push(((br_id, end), x));
            }
            // at least one line end on each busbar when split
            let n_ends = ends.len() as f64;
            let mut terms: Vec<(VarId, f64)> = ends.iter().map(|(_, x)| (*x, 1.0)).collect();
            terms.push((zb, -1.0));
            pb.add_ge(terms, 0.0);
            let mut terms: Vec<(VarId, f64)> = ends.iter().map(|(_, x)| (*x, 1.0)).collect();
            terms.push((zb, 1.0));
            pb.add_le(terms, n_ends);

            let mut injections = Vec::new();
            let mut load_b_terms = Vec::new();
            for &inj in &sub.attached_injections {
                match inj {
                    Injection::Generator(gid) if options.reassign_generators => {
                        let gi = idx.generator[&gid];
                        let pmax = net.generators[gi].p_max;
                        let x = pb.add_binary();
                        let ga = pb.add_var(0.0, pmax);
                        let gb = pb.add_var(0.0, pmax);
                        pb.add_le(vec![(x, 1.0), (zb, -1.0)], 0.0);
                        pb.add_eq(vec![(gen[gi], 1.0), (ga, -1.0), (gb, -1.0)], 0.0);
                        pb.add_le(vec![(ga, 1.0), (x, pmax)], pmax);
                        pb.add_le(vec![(gb, 1.0), (x, -pmax)], 0.0);
                        gen_on_a[gi] = Some(ga);
                        bal_b.push((gb, 1.0));
                        injections.push((inj, x));
                    }
                    Injection::Load(bid) if options.reassign_loads => {
                        let load = net.buses[idx.bus[&bid]].load_mw;
                        let x = pb.add_binary();
                        pb.add_le(vec![(x, 1.0), (zb, -1.0)], 0.0);
                        // A keeps load*(1-x): moving the x term to the left side
                        bal_a[bus_pos].push((x, load));
                        load_b_terms.push((x, -load));
                        injections.push((inj, x));
                    }
                    _ => {}
                }
            }
            bal_b.extend(load_b_terms);
            bal_b_rows.push(bal_b);
            splits.push(SplitVars {
                substation: si,
                z: zb,
                ends,
                injections,
            });
        }

        for (gi, g) in net.generators.iter().enumerate() {
            let v = gen_on_a[gi].unwrap_or(gen[gi]);
            bal_a[idx.bus[&g.bus]].push((v, 1.0));
        }

        for (li, br) in net.branches.iter().enumerate() {
            let f_pos = idx.bus[&br.from_bus];
            let t_pos = idx.bus[&br.to_bus];
            let from = end_vars.get(&(br.id, BranchEnd::From)).copied();
            let to = end_vars.get(&(br.id, BranchEnd::To)).copied();
            let theta_f = from.map_or(angle[f_pos], |e| e.theta);
            let theta_t = to.map_or(angle[t_pos], |e| e.theta);
            bal_a[f_pos].push((from.map_or(flow[li], |e| e.flow_a), -1.0));
            bal_a[t_pos].push((to.map_or(flow[li], |e| e.flow_a), 1.0));

            let k = net.base_mva * br.susceptance;
            let def = vec![(flow[li], 1.0), (theta_f, -k), (theta_t, k)];
            match line_z[li] {
                Some(zl) => {
                    let big_m = k * m_theta;
                    let mut le = def.clone();
                    le.push((zl, -big_m));
                    pb.add_le(le, 0.0);
                    let mut ge = def;
                    ge.push((zl, big_m));
                    pb.add_ge(ge, 0.0);
                    let lim = br.limit_mw;
                    pb.add_le(vec![(flow[li], 1.0), (zl, lim)], lim);
                    pb.add_ge(vec![(flow[li], 1.0), (zl, -lim)], -lim);
                }
                None => {
                    pb.add_eq(def, 0.0);
                }
            }
        }

        let mut balance_rows = 0;
        for (terms, rhs) in bal_a.into_iter().zip(rhs_a.drain(..)) {
            pb.add_eq(terms, rhs);
            balance_rows += 1;
        }
        for terms in bal_b_rows {
            pb.add_eq(terms, 0.0);
            balance_rows += 1;
        }

        let n_lines = layout.line_branches.len();
        if n_lines > 0 {
            pb.add_le(z[..n_lines].iter().map(|v| (*v, 1.0)).collect(), options.max_line_actions as f64);
        }
        if !splits.is_empty() {
            pb.add_le(
                z[n_lines..].iter().map(|v| (*v, 1.0)).collect(),
                options.max_busbar_actions as f64,
            );
        }

        Ok(Self {
            network,
            options,
            layout,
            problem: pb,
            z,
            gen,
            flow,
            splits,
            balance_rows,
        })
    }

    pub fn network(&self) -> &Arc<Network> {
        &self.network
    }

    pub fn options(&self) -> &SwitchingOptions {
        &self.options
    }

    pub fn layout(&self) -> &SwitchLayout {
        &self.layout
    }

    /// Number of switching dimensions in `z`.
    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// Number of continuous and auxiliary binary variables besides `z`.
    pub fn m(&self) -> usize {
        self.problem.vars.len() - self.z.len()
    }

    pub fn balance_rows(&self) -> usize {
        self.balance_rows
    }

    pub fn problem(&self) -> &MilpProblem {
        &self.problem
    }

    /// Pins `z` to `topology` (used for dispatch-only re-solves).
    pub fn fix_topology(&mut self, topology: &Topology) -> Result<()> {
        self.check_dim(topology.dim())?;
        for (v, bit) in self.z.clone().into_iter().zip(topology.bits()) {
            self.problem.fix(v, if bit { 1.0 } else { 0.0 });
        }
        Ok(())
    }

    /// Pins `z` and the busbar assignments of `alt`; only dispatch stays free.
    pub fn fix_configuration(&mut self, alt: &Alternative) -> Result<()> {
        self.fix_topology(&alt.topology)?;
        for sv in self.splits.clone() {
            let sub_bus = self.network.substations[sv.substation].bus;
            let assignment = alt.splits.iter().find(|s| s.bus == sub_bus);
            for (end, x) in &sv.ends {
                let on_b = assignment.is_some_and(|a| a.branch_ends_on_b.contains(end));
                self.problem.fix(*x, f64::from(u8::from(on_b)));
            }
            for (inj, x) in &sv.injections {
                let on_b = assignment.is_some_and(|a| a.injections_on_b.contains(inj));
                self.problem.fix(*x, f64::from(u8::from(on_b)));
            }
        }
        Ok(())
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found,
            });
        }
        Ok(())
    }

    fn cost_terms(&self) -> Vec<(VarId, f64)> {
        self.gen
            .iter()
            .zip(&self.network.generators)
            .map(|(v, g)| (*v, g.cost_per_mwh))
            .collect()
    }

    fn cost_of(&self, dispatch: &[f64]) -> f64 {
        dispatch
            .iter()
            .zip(&self.network.generators)
            .map(|(p, g)| p * g.cost_per_mwh)
            .sum()
    }

    /// Copy of the problem with `f(x) + s = f*(1+ε)`, `s >= 0`.
    fn with_budget(&self, f_star: f64, epsilon: f64) -> (MilpProblem, VarId) {
        let mut pb = self.problem.clone();
        let s = pb.add_var(0.0, f64::INFINITY);
        let mut terms = self.cost_terms();
        terms.push((s, 1.0));
        pb.add_eq(terms, f_star * (1.0 + epsilon));
        (pb, s)
    }

    fn topology_of(&self, sol: &MilpSolution) -> Topology {
        let bits: Vec<bool> = self.z.iter().map(|v| sol.value(*v) > 0.5).collect();
        Topology::from_bits(&bits, self.layout.line_branches.len())
    }

    fn assignments_of(&self, sol: &MilpSolution) -> Vec<SplitAssignment> {
        self.splits
            .iter()
            .filter(|sv| sol.value(sv.z) > 0.5)
            .map(|sv| SplitAssignment {
                bus: self.network.substations[sv.substation].bus,
                branch_ends_on_b: sv
                    .ends
                    .iter()
                    .filter(|(_, x)| sol.value(*x) > 0.5)
                    .map(|(e, _)| *e)
                    .collect(),
                injections_on_b: sv
                    .injections
                    .iter()
                    .filter(|(_, x)| sol.value(*x) > 0.5)
                    .map(|(i, _)| *i)
                    .collect(),
            })
            .collect()
    }

    fn add_no_good_cut(&self, pb: &mut MilpProblem, topology: &Topology) {
        let mut terms = Vec::with_capacity(self.z.len());
        let mut ones = 0.0;
        for (v, bit) in self.z.iter().zip(topology.bits()) {
            if bit {
                terms.push((*v, -1.0));
                ones += 1.0;
            } else {
                terms.push((*v, 1.0));
            }
        }
        pb.add_ge(terms, 1.0 - ones);
    }

    /// Solves `pb`, cutting off topologies that island an injection, and
    /// returns the solution with its power flow.
    fn solve_connected(
        &self,
        solver: &Solver,
        mut pb: MilpProblem,
        stage: &str,
    ) -> Result<(MilpProblem, MilpSolution, Topology, Vec<SplitAssignment>)> {
        for _ in 0..=solver.max_island_cuts {
            let sol = match solver.run(&pb) {
                Ok(sol) => sol,
                Err(e) => return Err(self.solve_failure(solver, e, stage, &pb)),
            };
            let topology = self.topology_of(&sol);
            let assignment = self.assignments_of(&sol);
            let dispatch: Vec<f64> = self.gen.iter().map(|v| sol.value(*v)).collect();
            let state = SwitchState::from_topology(&self.network, &self.layout, &topology, &assignment);
            match solve_dc_power_flow(&self.network, &state, &dispatch) {
                Err(PowerFlowError::Islanded { buses }) => {
                    log::debug!("{stage}: topology {} islands buses {buses:?}, adding cut", topology.to_bit_string());
                    self.add_no_good_cut(&mut pb, &topology);
                }
                _ => return Ok((pb, sol, topology, assignment)),
            }
        }
        Err(Error::Solver(format!(
            "{stage}: more than {} islanding topologies cut off",
            solver.max_island_cuts
        )))
    }

    fn solve_failure(&self, solver: &Solver, err: SolveError, stage: &str, pb: &MilpProblem) -> Error {
        match err {
            SolveError::Infeasible => Error::Infeasible(self.diagnose(solver, stage, pb)),
            SolveError::TimeLimit { incumbent } => Error::Timeout {
                has_incumbent: incumbent.is_some(),
            },
            SolveError::Unbounded => Error::Solver(format!("{stage}: unbounded")),
            SolveError::Backend(m) => Error::Solver(format!("{stage}: {m}")),
        }
    }

    /// Names the constraint groups whose relaxation makes `pb` feasible.
    fn diagnose(&self, solver: &Solver, stage: &str, pb: &MilpProblem) -> InfeasibilityReport {
        let feasible = |mut candidate: MilpProblem| {
            candidate.set_objective(&[]);
            let mut opts = solver.options.clone();
            opts.time_limit = Some(opts.time_limit.unwrap_or(30.0).min(30.0));
            solver.backend.solve(&candidate, &opts).is_ok()
        };
        let mut binding = Vec::new();

        let budget_rows: Vec<usize> = pb
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| {
                r.lower == f64::NEG_INFINITY
                    && !r.terms.is_empty()
                    && r.terms.iter().all(|(v, c)| *c == 1.0 && self.z.contains(v))
                    && r.terms.len() >= self.z.len().min(r.terms.len())
            })
            .map(|(i, _)| i)
            .collect();
        if !budget_rows.is_empty() {
            let mut relaxed = pb.clone();
            for i in &budget_rows {
                relaxed.rows[*i].upper = f64::INFINITY;
            }
            if feasible(relaxed) {
                binding.push("switching action budgets".to_string());
            }
        }

        let mut relaxed = pb.clone();
        for (v, br) in self.flow.iter().zip(&self.network.branches) {
            relaxed.vars[v.0].lower = -1e3 * br.limit_mw;
            relaxed.vars[v.0].upper = 1e3 * br.limit_mw;
        }
        for row in &mut relaxed.rows {
            // capacity rows: flow ± limit·z against ±limit
            if row.terms.len() == 2 && self.flow.contains(&row.terms[0].0) && self.z.contains(&row.terms[1].0) {
                row.lower = f64::NEG_INFINITY;
                row.upper = f64::INFINITY;
            }
        }
        if feasible(relaxed) {
            binding.push("line limits".to_string());
        }

        let mut relaxed = pb.clone();
        for (v, g) in self.gen.iter().zip(&self.network.generators) {
            relaxed.vars[v.0].upper = g.p_max.max(1.0) * 1e3;
        }
        if feasible(relaxed) {
            binding.push("generator limits".to_string());
        }

        InfeasibilityReport {
            stage: stage.to_string(),
            binding,
        }
    }

    /// Re-solves for minimum cost with `z` fixed, keeping the other constraints of `pb`.
    fn polish(&self, solver: &Solver, pb: &MilpProblem, topology: &Topology) -> Result<MilpSolution> {
        let mut polished = pb.clone();
        for (v, bit) in self.z.iter().zip(topology.bits()) {
            polished.fix(*v, if bit { 1.0 } else { 0.0 });
        }
        polished.set_objective(&self.cost_terms());
        solver
            .run(&polished)
            .map_err(|e| self.solve_failure(solver, e, "dispatch polish", &polished))
    }

    fn make_alternative(
        &self,
        sol: &MilpSolution,
        topology: Topology,
        splits: Vec<SplitAssignment>,
        budget: f64,
        round: RoundLabel,
    ) -> Result<Alternative> {
        let dispatch: Vec<f64> = self.gen.iter().map(|v| sol.value(*v)).collect();
        let state = SwitchState::from_topology(&self.network, &self.layout, &topology, &splits);
        let pf = solve_dc_power_flow(&self.network, &state, &dispatch)
            .map_err(|e| Error::Solver(format!("power flow of solved topology failed: {e}")))?;
        let cost = self.cost_of(&dispatch);
        Ok(Alternative {
            index: 0,
            topology,
            splits,
            dispatch,
            flows: pf.flows,
            angles: pf.angles,
            cost,
            slack: budget - cost,
            objective_value: cost,
            solver_gap: sol.gap,
            weight_seed: 0,
            round,
            unique: true,
        })
    }

    /// Minimum generation cost over all admissible topologies.
    ///
    /// Returns `f*` and the least-cost alternative.
    pub fn solve_least_cost(&self, solver: &Solver) -> Result<(f64, Alternative)> {
        let mut pb = self.problem.clone();
        pb.set_objective(&self.cost_terms());
        let (pb, sol, topology, splits) = self.solve_connected(solver, pb, "least-cost solve")?;
        // among the cheapest topologies, take one with the fewest actions
        let (sol, topology, splits) = if topology.action_count() > 0 {
            let mut fewest = pb;
            fewest.add_le(self.cost_terms(), sol.objective);
            fewest.set_objective(&self.z.iter().map(|v| (*v, 1.0)).collect::<Vec<_>>());
            let (fewest, _, t, _) = self.solve_connected(solver, fewest, "least-cost action count")?;
            let polished = self.polish(solver, &fewest, &t)?;
            let splits = self.assignments_of(&polished);
            (polished, t, splits)
        } else {
            (sol, topology, splits)
        };
        let mut alt = self.make_alternative(&sol, topology, splits, sol.objective, RoundLabel::LeastCost)?;
        alt.slack = 0.0;
        alt.objective_value = alt.cost;
        Ok((alt.cost, alt))
    }

    /// Minimizes `obj` over the topologies whose cost stays within `f*(1+ε)`.
    pub fn solve_alternative(
        &self,
        solver: &Solver,
        obj: &ObjectiveSpec,
        f_star: f64,
        epsilon: f64,
    ) -> Result<Alternative> {
        if !(epsilon >= 0.0) {
            return Err(Error::Domain(format!("epsilon must be nonnegative, got {epsilon}")));
        }
        if !(f_star > 0.0) {
            return Err(Error::Domain(format!("f* must be positive, got {f_star}")));
        }
        obj.validate(self.n())?;
        let (mut pb, s) = self.with_budget(f_star, epsilon);
        let mut terms: Vec<(VarId, f64)> = self
            .z
            .iter()
            .zip(&obj.z_coefficients)
            .map(|(v, c)| (*v, *c))
            .collect();
        terms.push((s, obj.slack_coefficient));
        pb.set_objective(&terms);

        let (pb, mut sol, topology, mut splits) = self.solve_connected(solver, pb, "alternative solve")?;
        let gap = sol.gap;
        if solver.polish_dispatch {
            sol = self.polish(solver, &pb, &topology)?;
            splits = self.assignments_of(&sol);
        }
        let budget = f_star * (1.0 + epsilon);
        let mut alt = self.make_alternative(&sol, topology, splits, budget, RoundLabel::Mga)?;
        alt.solver_gap = gap;
        alt.objective_value = alt
            .topology
            .to_vec()
            .iter()
            .zip(&obj.z_coefficients)
            .map(|(z, c)| z * c)
            .sum::<f64>()
            + obj.slack_coefficient * alt.slack;
        Ok(alt)
    }

    /// Minimum cost for a fixed switching configuration (topology and
    /// busbar assignments), or `None` if that configuration is infeasible.
    pub fn dispatch_only_cost(&self, solver: &Solver, alt: &Alternative) -> Result<Option<f64>> {
        let mut fixed = self.clone();
        fixed.fix_configuration(alt)?;
        let mut pb = fixed.problem.clone();
        pb.set_objective(&fixed.cost_terms());
        match solver.run(&pb) {
            Ok(sol) => Ok(Some(sol.objective)),
            Err(SolveError::Infeasible) => Ok(None),
            Err(e) => Err(fixed.solve_failure(solver, e, "dispatch-only solve", &pb)),
        }
    }

    pub(crate) fn z_vars(&self) -> &[VarId] {
        &self.z
    }

    pub(crate) fn flow_vars(&self) -> &[VarId] {
        &self.flow
    }

    pub(crate) fn budget_problem(&self, f_star: f64, epsilon: f64) -> MilpProblem {
        self.with_budget(f_star, epsilon).0
    }
}
