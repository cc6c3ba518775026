//! Ranking feedback turned into weight vectors, and feedback-guided rounds.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mga::{mark_unique, sample_diversity_weights, solve_indexed, AlternativeSet, WeightKind, WeightVector};
use crate::network::Topology;
use crate::reconfig::{augmentation_coefficient, ObjectiveSpec, ReconfigModel, RoundLabel, Solver};

/// Diversity weights of round alternatives come from substreams starting here,
/// so they never repeat the weights of the initial set.
pub const HITL_STREAM_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Baseline,
    V1,
    V2,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Baseline, Variant::V1, Variant::V2];

    pub fn label(self) -> RoundLabel {
        match self {
            Variant::Baseline => RoundLabel::HitlBaseline,
            Variant::V1 => RoundLabel::HitlV1,
            Variant::V2 => RoundLabel::HitlV2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::V1 => "v1",
            Variant::V2 => "v2",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeedbackSource {
    Simulated { fn_id: crate::evaluation::EvalFn },
    Human { session: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingFeedback {
    /// Positions in the ranked set, best first.
    pub ranked_ids: Vec<usize>,
    pub source: FeedbackSource,
}

impl RankingFeedback {
    pub fn validate(&self, set_len: usize) -> Result<()> {
        validate_ranking(&self.ranked_ids, set_len)
    }
}

pub fn validate_ranking(ranked: &[usize], set_len: usize) -> Result<()> {
    if ranked.is_empty() {
        return Err(Error::Domain("ranking is empty".to_string()));
    }
    let mut seen = HashSet::new();
    for &id in ranked {
        if id >= set_len {
            return Err(Error::Domain(format!("ranked id {id} not in a set of {set_len}")));
        }
        if !seen.insert(id) {
            return Err(Error::Domain(format!("ranked id {id} appears twice")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HitlParams {
    pub variant: Variant,
    pub tau: f64,
    pub a: f64,
    pub b: f64,
    pub round_count: usize,
}

impl Default for HitlParams {
    fn default() -> Self {
        Self {
            variant: Variant::V2,
            tau: 0.15,
            a: 1.0,
            b: 1.0,
            round_count: 100,
        }
    }
}

impl HitlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.b >= 0.0) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::Domain(format!("a and b must be finite and >= 0, got {} and {}", self.a, self.b)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Domain(format!("tau {} outside [0, 1]", self.tau)));
        }
        Ok(())
    }
}

fn column_means<'a>(rows: impl Iterator<Item = &'a Topology>, n: usize) -> Vec<f64> {
    let mut sums = vec![0.0; n];
    let mut count = 0usize;
    for t in rows {
        for (s, b) in sums.iter_mut().zip(t.bits()) {
            *s += f64::from(u8::from(b));
        }
        count += 1;
    }
    sums.into_iter().map(|s| s / count as f64).collect()
}

fn checked_dim(topologies: &[Topology], ranked: &[usize]) -> Result<usize> {
    validate_ranking(ranked, topologies.len())?;
    let n = topologies[0].dim();
    if let Some(t) = topologies.iter().find(|t| t.dim() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: t.dim() });
    }
    Ok(n)
}

/// τ dead-band: +1 above τ, -1 below -τ, else 0.
pub fn threshold(delta: f64, tau: f64) -> f64 {
    if delta > tau {
        1.0
    } else if delta < -tau {
        -1.0
    } else {
        0.0
    }
}

/// δ per top-ranked alternative: mean over all alternatives minus its own bits.
pub fn baseline_deltas(topologies: &[Topology], ranked: &[usize]) -> Result<Vec<Vec<f64>>> {
    let n = checked_dim(topologies, ranked)?;
    let mean = column_means(topologies.iter(), n);
    Ok(ranked
        .iter()
        .map(|&k| {
            mean.iter()
                .zip(topologies[k].bits())
                .map(|(m, b)| m - f64::from(u8::from(b)))
                .collect()
        })
        .collect())
}

/// Mean over all alternatives minus the mean over the top-ranked ones.
pub fn mean_deltas(topologies: &[Topology], ranked: &[usize]) -> Result<Vec<f64>> {
    let n = checked_dim(topologies, ranked)?;
    let all = column_means(topologies.iter(), n);
    let top = column_means(ranked.iter().map(|&k| &topologies[k]), n);
    Ok(all.iter().zip(&top).map(|(a, t)| a - t).collect())
}

/// One thresholded vector per top-ranked alternative, followed by their sum.
pub fn encode_baseline(topologies: &[Topology], ranked: &[usize], tau: f64) -> Result<Vec<WeightVector>> {
    let mut vectors: Vec<WeightVector> = baseline_deltas(topologies, ranked)?
        .into_iter()
        .map(|d| WeightVector::new(d.into_iter().map(|x| threshold(x, tau)).collect(), WeightKind::Feedback))
        .collect();
    let n = vectors[0].len();
    let sum = (0..n).map(|j| vectors.iter().map(|v| v.values[j]).sum()).collect();
    vectors.push(WeightVector::new(sum, WeightKind::Feedback));
    Ok(vectors)
}

/// The mean difference, thresholded.
pub fn encode_v1(topologies: &[Topology], ranked: &[usize], tau: f64) -> Result<WeightVector> {
    let d = mean_deltas(topologies, ranked)?;
    Ok(WeightVector::new(d.into_iter().map(|x| threshold(x, tau)).collect(), WeightKind::Feedback))
}

/// The mean difference itself.
pub fn encode_v2(topologies: &[Topology], ranked: &[usize]) -> Result<WeightVector> {
    Ok(WeightVector::new(mean_deltas(topologies, ranked)?, WeightKind::Feedback))
}

fn set_topologies(set: &AlternativeSet) -> Vec<Topology> {
    set.topologies().cloned().collect()
}

pub fn encode_feedback_baseline(set: &AlternativeSet, ranking: &RankingFeedback, tau: f64) -> Result<Vec<WeightVector>> {
    encode_baseline(&set_topologies(set), &ranking.ranked_ids, tau)
}

pub fn encode_feedback_v1(set: &AlternativeSet, ranking: &RankingFeedback, tau: f64) -> Result<WeightVector> {
    encode_v1(&set_topologies(set), &ranking.ranked_ids, tau)
}

pub fn encode_feedback_v2(set: &AlternativeSet, ranking: &RankingFeedback) -> Result<WeightVector> {
    encode_v2(&set_topologies(set), &ranking.ranked_ids)
}

/// Feedback vectors of `variant`, in round-robin order.
pub fn encode_feedback(set: &AlternativeSet, ranking: &RankingFeedback, params: &HitlParams) -> Result<Vec<WeightVector>> {
    match params.variant {
        Variant::Baseline => encode_feedback_baseline(set, ranking, params.tau),
        Variant::V1 => Ok(vec![encode_feedback_v1(set, ranking, params.tau)?]),
        Variant::V2 => Ok(vec![encode_feedback_v2(set, ranking)?]),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComposedObjective {
    pub objective: ObjectiveSpec,
    /// False if the feedback vector was all zeros and got dropped.
    pub feedback_used: bool,
}

/// `a·w_d/‖w_d‖ + b·w_h/‖w_h‖` with the augmentation slack coefficient.
pub fn compose_hitl_objective(w_d: &WeightVector, w_hitl: &WeightVector, a: f64, b: f64, f_star: f64) -> Result<ComposedObjective> {
    if w_d.len() != w_hitl.len() {
        return Err(Error::DimensionMismatch { expected: w_d.len(), found: w_hitl.len() });
    }
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::Domain(format!("a and b must be >= 0, got {a} and {b}")));
    }
    let nd = w_d.norm();
    if nd == 0.0 {
        return Err(Error::Domain("diversity weights have zero norm".to_string()));
    }
    let nh = w_hitl.norm();
    let feedback_used = nh > 0.0;
    let z_coefficients = w_d
        .values
        .iter()
        .zip(&w_hitl.values)
        .map(|(d, h)| a * d / nd + if feedback_used { b * h / nh } else { 0.0 })
        .collect();
    Ok(ComposedObjective {
        objective: ObjectiveSpec {
            z_coefficients,
            slack_coefficient: augmentation_coefficient(f_star),
        },
        feedback_used,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitlRound {
    pub set: AlternativeSet,
    pub params: HitlParams,
    pub feedback_weights: Vec<WeightVector>,
    pub warnings: Vec<String>,
}

/// Generates `params.round_count` alternatives guided by `ranking` of `set`.
///
/// Each alternative samples fresh diversity weights; the baseline variant
/// cycles through its feedback vectors.
pub fn run_hitl_round(
    model: &ReconfigModel,
    solver: &Solver,
    set: &AlternativeSet,
    ranking: &RankingFeedback,
    params: &HitlParams,
    seed: u64,
) -> Result<HitlRound> {
    params.validate()?;
    ranking.validate(set.len())?;
    let feedback = encode_feedback(set, ranking, params)?;
    let mut warnings = Vec::new();
    for (k, w) in feedback.iter().enumerate() {
        if w.norm() == 0.0 {
            let msg = format!("{} feedback vector {k} is all zeros; its alternatives use diversity weights only", params.variant);
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    let n = model.n();
    let (f_star, epsilon) = (set.f_star, set.epsilon);
    let mut alternatives = solve_indexed(params.round_count, |i| {
        let w_d = sample_diversity_weights(n, seed, HITL_STREAM_OFFSET + i as u64)?;
        let w_h = &feedback[i % feedback.len()];
        let composed = compose_hitl_objective(&w_d, w_h, params.a, params.b, f_star)?;
        let mut alt = model.solve_alternative(solver, &composed.objective, f_star, epsilon)?;
        alt.weight_seed = seed;
        alt.round = params.variant.label();
        Ok(alt)
    })?;
    let known: HashSet<Topology> = set.topologies().cloned().collect();
    mark_unique(&mut alternatives, &known);
    Ok(HitlRound {
        set: AlternativeSet {
            network: set.network.clone(),
            f_star,
            epsilon,
            seed,
            alternatives,
        },
        params: params.clone(),
        feedback_weights: feedback,
        warnings,
    })
}
