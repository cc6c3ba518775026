//! JSON-in, JSON-out operations behind the browser exports.

use gridmga_core::dcpf::{merit_order_dispatch, solve_dc_power_flow, SwitchState};
use gridmga_core::evaluation::{cumulative_overload, cumulative_quadratic_load, eval_switching_sequence};
use gridmga_core::hitl::{compose_hitl_objective, encode_baseline, encode_v1, encode_v2, HitlParams, HITL_STREAM_OFFSET};
use gridmga_core::mga::{sample_diversity_weights, WeightVector};
use gridmga_core::network::SwitchLayout;
use gridmga_core::reconfig::RoundLabel;
use gridmga_core::{cases, Alternative, Network, Topology};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Loading above which a line counts as overloaded.
pub const OVERLOAD_THRESHOLD: f64 = 0.9;

/// Cases small enough to toggle lines by hand.
pub const CASES: &[&str] = &["triangle", "congested-triangle", "congested-five-bus", "case14"];

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("invalid request: {0}")]
    Request(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] gridmga_core::Error),
    #[error("unknown demo case '{0}'")]
    UnknownCase(String),
    #[error("branch {0} does not exist or is not switchable")]
    NotSwitchable(u32),
    #[error("power flow failed: {0}")]
    PowerFlow(#[from] gridmga_core::dcpf::PowerFlowError),
}

pub type DemoResult = Result<String, DemoError>;

fn to_json<T: Serialize>(value: &T) -> DemoResult {
    Ok(serde_json::to_string(value)?)
}

pub fn case_list() -> String {
    serde_json::to_string(CASES).expect("string list serializes")
}

pub fn demo_case(name: &str) -> Result<Network, DemoError> {
    match name {
        "triangle" => Ok(cases::triangle()),
        "congested-triangle" => Ok(cases::congested_triangle()),
        "congested-five-bus" => Ok(cases::congested_five_bus()),
        "case14" => Ok(cases::case14()),
        _ => Err(DemoError::UnknownCase(name.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchLoading {
    pub id: u32,
    pub from_bus: u32,
    pub to_bus: u32,
    pub switchable: bool,
    pub open: bool,
    pub flow_mw: f64,
    pub limit_mw: f64,
    pub loading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceView {
    pub feasible: bool,
    /// Branch ids in a feasible switching order.
    pub order: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowView {
    pub case: String,
    pub topology: String,
    pub cost: f64,
    pub dispatch_mw: Vec<f64>,
    pub branches: Vec<BranchLoading>,
    pub max_loading: f64,
    pub cumulative_overload: f64,
    pub cumulative_quadratic_load: f64,
    /// Absent when the sequence check itself failed, e.g. too many actions.
    pub sequence: Option<SequenceView>,
    pub sequence_error: Option<String>,
}

pub fn power_flow(case: &str, open_branches_json: &str) -> DemoResult {
    let net = demo_case(case)?;
    let open: Vec<u32> = serde_json::from_str(open_branches_json)?;
    let layout = SwitchLayout::new(&net, true, false);
    let mut line_open = vec![false; layout.line_branches.len()];
    for id in &open {
        let pos = layout
            .line_branches
            .iter()
            .position(|&bi| net.branches[bi].id == *id)
            .ok_or(DemoError::NotSwitchable(*id))?;
        line_open[pos] = true;
    }
    let topology = Topology::from_bits(&line_open, line_open.len());
    let dispatch = merit_order_dispatch(&net);
    let state = SwitchState::from_topology(&net, &layout, &topology, &[]);
    let pf = solve_dc_power_flow(&net, &state, &dispatch)?;
    let mut dispatch_mw = dispatch;
    let slack_gen = net.slack_bus().and_then(|s| net.generators.iter().position(|g| g.bus == s.id));
    if let Some(g) = slack_gen {
        dispatch_mw[g] += pf.slack_adjustment;
    }
    let loadings = pf.loadings(&net);
    let cost = net
        .generators
        .iter()
        .zip(&dispatch_mw)
        .map(|(g, p)| g.cost_per_mwh * p)
        .sum();

    let alt = Alternative {
        index: 0,
        topology: topology.clone(),
        splits: Vec::new(),
        dispatch: dispatch_mw.clone(),
        flows: pf.flows.clone(),
        angles: pf.angles.clone(),
        cost,
        slack: 0.0,
        objective_value: 0.0,
        solver_gap: 0.0,
        weight_seed: 0,
        round: RoundLabel::Mga,
        unique: true,
    };
    let (sequence, sequence_error) = match eval_switching_sequence(&alt, &net, &layout) {
        Ok(r) => (
            Some(SequenceView {
                feasible: r.feasible,
                order: r
                    .order
                    .map(|o| o.into_iter().map(|j| net.branches[layout.line_branches[j]].id).collect()),
            }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };

    let branches = net
        .branches
        .iter()
        .zip(&pf.flows)
        .zip(&loadings)
        .map(|((b, &flow_mw), &loading)| BranchLoading {
            id: b.id,
            from_bus: b.from_bus,
            to_bus: b.to_bus,
            switchable: b.switchable,
            open: open.contains(&b.id),
            flow_mw,
            limit_mw: b.limit_mw,
            loading,
        })
        .collect();
    to_json(&PowerFlowView {
        case: case.to_string(),
        topology: topology.to_bit_string(),
        cost,
        dispatch_mw,
        branches,
        max_loading: loadings.iter().copied().fold(0.0, f64::max),
        cumulative_overload: cumulative_overload(&loadings, OVERLOAD_THRESHOLD),
        cumulative_quadratic_load: cumulative_quadratic_load(&loadings),
        sequence,
        sequence_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodeRequest {
    /// Topologies as bit strings, e.g. "0110" or "0110|01".
    pub topologies: Vec<String>,
    /// Positions into `topologies`, best first.
    pub ranked: Vec<usize>,
    pub tau: f64,
    pub a: f64,
    pub b: f64,
    /// Number of composed objectives to show per encoding.
    pub count: usize,
    pub seed: u64,
}

impl Default for EncodeRequest {
    fn default() -> Self {
        let p = HitlParams::default();
        Self {
            topologies: Vec::new(),
            ranked: Vec::new(),
            tau: p.tau,
            a: p.a,
            b: p.b,
            count: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub feedback: Vec<Vec<f64>>,
    /// Objective coefficients of the first `count` alternatives of a round.
    pub composed: Vec<Vec<f64>>,
    /// Per composed objective, whether the feedback part was nonzero.
    pub feedback_used: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeView {
    pub dim: usize,
    pub diversity: Vec<Vec<f64>>,
    pub baseline: Encoding,
    pub v1: Encoding,
    pub v2: Encoding,
}

fn compose(diversity: &[WeightVector], feedback: Vec<WeightVector>, a: f64, b: f64) -> Result<Encoding, DemoError> {
    let mut composed = Vec::with_capacity(diversity.len());
    let mut feedback_used = Vec::with_capacity(diversity.len());
    for (i, w_d) in diversity.iter().enumerate() {
        // The slack coefficient is not shown, so any positive f* will do.
        let c = compose_hitl_objective(w_d, &feedback[i % feedback.len()], a, b, 1.0)?;
        composed.push(c.objective.z_coefficients);
        feedback_used.push(c.feedback_used);
    }
    Ok(Encoding {
        feedback: feedback.into_iter().map(|w| w.values).collect(),
        composed,
        feedback_used,
    })
}

pub fn encode_feedback(request_json: &str) -> DemoResult {
    let req: EncodeRequest = serde_json::from_str(request_json)?;
    HitlParams {
        tau: req.tau,
        a: req.a,
        b: req.b,
        ..HitlParams::default()
    }
    .validate()?;
    let topologies = req
        .topologies
        .iter()
        .map(|s| Topology::parse_bit_string(s.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    let baseline = encode_baseline(&topologies, &req.ranked, req.tau)?;
    let v1 = encode_v1(&topologies, &req.ranked, req.tau)?;
    let v2 = encode_v2(&topologies, &req.ranked)?;
    let dim = v2.len();
    let diversity = (0..req.count)
        .map(|i| sample_diversity_weights(dim, req.seed, HITL_STREAM_OFFSET + i as u64))
        .collect::<Result<Vec<_>, _>>()?;
    to_json(&EncodeView {
        dim,
        baseline: compose(&diversity, baseline, req.a, req.b)?,
        v1: compose(&diversity, vec![v1], req.a, req.b)?,
        v2: compose(&diversity, vec![v2], req.a, req.b)?,
        diversity: diversity.into_iter().map(|w| w.values).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub valid: bool,
    pub name: String,
    pub buses: usize,
    pub branches: usize,
    pub switchable_branches: usize,
    pub generators: usize,
    pub splittable_substations: usize,
    pub total_load_mw: f64,
    pub issues: Vec<String>,
}

/// Parse errors are returned as errors; a parsed but invalid case is a
/// summary with `valid == false`.
pub fn validate_case(text: &str) -> DemoResult {
    let net = cases::load_text(text)?;
    let report = net.validate();
    to_json(&CaseSummary {
        valid: report.is_valid(),
        name: net.name.clone(),
        buses: net.buses.len(),
        branches: net.branches.len(),
        switchable_branches: net.branches.iter().filter(|b| b.switchable).count(),
        generators: net.generators.len(),
        splittable_substations: net.substations.iter().filter(|s| s.splittable).count(),
        total_load_mw: net.total_load(),
        issues: report.issues,
    })
}
