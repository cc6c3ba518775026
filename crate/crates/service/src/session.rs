//! Persisted session documents, their state machine and the views served to
//! clients.

use std::collections::BTreeMap;

use gridmga_core::evaluation::{evaluate, EvalContext, EvalFn};
use gridmga_core::hitl::{HitlParams, RankingFeedback};
use gridmga_core::mga::{AlternativeSet, WeightVector};
use gridmga_core::network::{hamming_distance, SwitchLayout};
use gridmga_core::reconfig::{InfeasibilityReport, RoundLabel};
use gridmga_core::{Alternative, Network, SwitchingOptions};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Idle,
    Solving,
    AwaitingRanking,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub epsilon: f64,
    pub switching: SwitchingOptions,
    pub gap: f64,
    /// Seconds per solve.
    pub time_limit: Option<f64>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            switching: SwitchingOptions::lines_and_busbars(3, 3),
            gap: 1e-3,
            time_limit: None,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(ServiceError::validation(format!("epsilon {} must be finite and >= 0", self.epsilon)));
        }
        if !(self.gap > 0.0 && self.gap < 1.0) {
            return Err(ServiceError::validation(format!("gap {} outside (0, 1)", self.gap)));
        }
        if self.time_limit.is_some_and(|t| !(t > 0.0)) {
            return Err(ServiceError::validation("time_limit must be positive"));
        }
        self.switching.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub index: usize,
    pub label: RoundLabel,
    pub set: AlternativeSet,
    /// Ranking of the previous round that guided this one.
    pub ranking: Option<RankingFeedback>,
    pub params: Option<HitlParams>,
    pub feedback_weights: Vec<WeightVector>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureInfo {
    pub message: String,
    pub infeasibility: Option<InfeasibilityReport>,
}

impl From<&gridmga_core::Error> for FailureInfo {
    fn from(e: &gridmga_core::Error) -> Self {
        Self {
            message: e.to_string(),
            infeasibility: match e {
                gridmga_core::Error::Infeasible(r) => Some(r.clone()),
                _ => None,
            },
        }
    }
}

/// Everything persisted about one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDoc {
    pub id: String,
    pub network: Network,
    pub config: SessionConfig,
    pub status: SessionStatus,
    pub f_star: Option<f64>,
    pub least_cost: Option<Alternative>,
    pub rounds: Vec<Round>,
    pub last_error: Option<FailureInfo>,
}

impl SessionDoc {
    pub fn new(id: String, network: Network, config: SessionConfig) -> Self {
        Self {
            id,
            network,
            config,
            status: SessionStatus::Idle,
            f_star: None,
            least_cost: None,
            rounds: Vec::new(),
            last_error: None,
        }
    }

    /// Moves to `Solving` for a new initial set.
    pub fn begin_generate(&mut self) -> Result<()> {
        match self.status {
            SessionStatus::Idle | SessionStatus::AwaitingRanking | SessionStatus::Error => {
                self.status = SessionStatus::Solving;
                Ok(())
            }
            SessionStatus::Solving => Err(self.busy()),
        }
    }

    /// Moves to `Solving` for a feedback round guided by a ranking of round `k`.
    pub fn begin_feedback(&mut self, k: usize, ranked: &[usize]) -> Result<()> {
        if self.status == SessionStatus::Solving {
            return Err(self.busy());
        }
        let round = self.round(k)?;
        if k + 1 != self.rounds.len() {
            return Err(ServiceError::validation(format!(
                "round {k} is stale; rankings must reference the latest round {}",
                self.rounds.len() - 1
            )));
        }
        gridmga_core::hitl::validate_ranking(ranked, round.set.len())?;
        if self.status != SessionStatus::AwaitingRanking {
            return Err(ServiceError::Conflict(format!("session {} is not awaiting a ranking", self.id)));
        }
        self.status = SessionStatus::Solving;
        Ok(())
    }

    pub fn finish(&mut self, outcome: std::result::Result<Round, FailureInfo>) {
        match outcome {
            Ok(round) => {
                self.rounds.push(round);
                self.status = SessionStatus::AwaitingRanking;
                self.last_error = None;
            }
            Err(info) => {
                self.status = SessionStatus::Error;
                self.last_error = Some(info);
            }
        }
    }

    /// A solve that was running when the process stopped cannot resume.
    pub fn recover(&mut self) {
        if self.status == SessionStatus::Solving {
            self.finish(Err(FailureInfo {
                message: "solve interrupted by a service restart".to_string(),
                infeasibility: None,
            }));
        }
    }

    pub fn round(&self, k: usize) -> Result<&Round> {
        self.rounds
            .get(k)
            .ok_or_else(|| ServiceError::NotFound(format!("round {k} of session {}", self.id)))
    }

    fn busy(&self) -> ServiceError {
        ServiceError::Conflict(format!("session {} is already solving", self.id))
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            id: self.id.clone(),
            network: self.network.name.clone(),
            status: self.status,
            config: self.config.clone(),
            f_star: self.f_star,
            least_cost_topology: self.least_cost.as_ref().map(|a| a.topology.to_bit_string()),
            rounds: self.rounds.iter().map(RoundSummary::of).collect(),
            last_error: self.last_error.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub index: usize,
    pub label: RoundLabel,
    pub seed: u64,
    pub count: usize,
    pub unique: usize,
    pub ranking: Option<RankingFeedback>,
    pub params: Option<HitlParams>,
    pub feedback_weights: Vec<WeightVector>,
    pub warnings: Vec<String>,
}

impl RoundSummary {
    fn of(r: &Round) -> Self {
        Self {
            index: r.index,
            label: r.label,
            seed: r.set.seed,
            count: r.set.len(),
            unique: r.set.alternatives.iter().filter(|a| a.unique).count(),
            ranking: r.ranking.clone(),
            params: r.params.clone(),
            feedback_weights: r.feedback_weights.clone(),
            warnings: r.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub network: String,
    pub status: SessionStatus,
    pub config: SessionConfig,
    pub f_star: Option<f64>,
    pub least_cost_topology: Option<String>,
    pub rounds: Vec<RoundSummary>,
    pub last_error: Option<FailureInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineLoading {
    pub branch: u32,
    pub from_bus: u32,
    pub to_bus: u32,
    pub flow_mw: f64,
    pub limit_mw: f64,
    /// |flow| / limit; zero for open lines.
    pub loading: f64,
    pub open: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativeView {
    pub index: usize,
    pub topology: String,
    pub actions: Vec<String>,
    pub cost: f64,
    /// Cost above f* in percent.
    pub cost_delta_pct: f64,
    pub slack: f64,
    pub unique: bool,
    pub hamming_to_least_cost: usize,
    pub values: BTreeMap<EvalFn, f64>,
    pub loadings: Vec<LineLoading>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundAlternatives {
    pub session: String,
    pub round: usize,
    pub label: RoundLabel,
    pub f_star: f64,
    pub alternatives: Vec<AlternativeView>,
}

/// Full per-alternative payload of round `k`.
pub fn round_alternatives(doc: &SessionDoc, k: usize) -> Result<RoundAlternatives> {
    let round = doc.round(k)?;
    let least_cost = doc
        .least_cost
        .as_ref()
        .ok_or_else(|| ServiceError::Internal("round without a least-cost solution".to_string()))?;
    let net = &doc.network;
    let opts = &doc.config.switching;
    let layout = SwitchLayout::new(net, opts.allow_line_switching, opts.allow_busbar_splitting);
    let ctx = EvalContext::from_least_cost(&least_cost.topology);
    let f_star = round.set.f_star;
    let alternatives = round
        .set
        .alternatives
        .iter()
        .map(|a| view(a, net, &layout, &ctx, least_cost, f_star))
        .collect::<Result<Vec<_>>>()?;
    Ok(RoundAlternatives {
        session: doc.id.clone(),
        round: k,
        label: round.label,
        f_star,
        alternatives,
    })
}

fn view(
    a: &Alternative,
    net: &Network,
    layout: &SwitchLayout,
    ctx: &EvalContext,
    least_cost: &Alternative,
    f_star: f64,
) -> Result<AlternativeView> {
    let values = EvalFn::ALL
        .iter()
        .filter_map(|&f| match evaluate(f, a, net, layout, ctx) {
            Ok(v) => Some((f, v)),
            Err(e) => {
                log::warn!("{f} of alternative {}: {e}", a.index);
                None
            }
        })
        .collect();
    let open: Vec<usize> = a
        .topology
        .line_open
        .iter()
        .enumerate()
        .filter(|(_, o)| **o)
        .map(|(j, _)| layout.line_branches[j])
        .collect();
    let loadings = net
        .branches
        .iter()
        .zip(a.loadings(net))
        .enumerate()
        .map(|(i, (b, loading))| LineLoading {
            branch: b.id,
            from_bus: b.from_bus,
            to_bus: b.to_bus,
            flow_mw: a.flows[i],
            limit_mw: b.limit_mw,
            loading,
            open: open.contains(&i),
        })
        .collect();
    Ok(AlternativeView {
        index: a.index,
        topology: a.topology.to_bit_string(),
        actions: a.topology.actions().iter().map(|&j| layout.describe(net, j)).collect(),
        cost: a.cost,
        cost_delta_pct: 100.0 * (a.cost - f_star) / f_star,
        slack: a.slack,
        unique: a.unique,
        hamming_to_least_cost: hamming_distance(&a.topology, &least_cost.topology)?,
        values,
        loadings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use gridmga_core::cases;

    fn doc() -> SessionDoc {
        SessionDoc::new("s".to_string(), cases::triangle(), SessionConfig::default())
    }

    fn round(index: usize) -> Round {
        Round {
            index,
            label: RoundLabel::Mga,
            set: AlternativeSet {
                network: "triangle".to_string(),
                f_star: 1.0,
                epsilon: 0.05,
                seed: 1,
                alternatives: Vec::new(),
            },
            ranking: None,
            params: None,
            feedback_weights: Vec::new(),
            warnings: Vec::new(),
        }
    }

    #[test]
    fn generate_cycle() {
        let mut d = doc();
        d.begin_generate().unwrap();
        assert_eq!(d.status, SessionStatus::Solving);
        assert!(matches!(d.begin_generate(), Err(ServiceError::Conflict(_))));
        d.finish(Ok(round(0)));
        assert_eq!(d.status, SessionStatus::AwaitingRanking);
        d.begin_generate().unwrap();
        d.finish(Err(FailureInfo { message: "x".to_string(), infeasibility: None }));
        assert_eq!(d.status, SessionStatus::Error);
        assert_eq!(d.rounds.len(), 1);
        // the session can retry after an error
        d.begin_generate().unwrap();
    }

    #[test]
    fn feedback_needs_latest_round_and_ranking_state() {
        let mut d = doc();
        assert!(matches!(d.begin_feedback(0, &[0]), Err(ServiceError::NotFound(_))));
        let mut r = round(0);
        r.set.alternatives = Vec::new();
        d.rounds.push(r);
        d.rounds.push(round(1));
        d.status = SessionStatus::AwaitingRanking;
        assert!(matches!(d.begin_feedback(0, &[0]), Err(ServiceError::Validation { .. })));
        // empty round: any id is out of range
        assert!(matches!(d.begin_feedback(1, &[0]), Err(ServiceError::Validation { .. })));
        assert!(matches!(d.begin_feedback(1, &[]), Err(ServiceError::Validation { .. })));
    }

    #[test]
    fn restart_marks_running_solve_failed() {
        let mut d = doc();
        d.begin_generate().unwrap();
        d.recover();
        assert_eq!(d.status, SessionStatus::Error);
        assert!(d.last_error.is_some());
    }
}
