//! End-to-end study: least cost, initial set, simulated feedback rounds for
//! every variant, evaluation bounds, and the "valuable" classification.

mod export;

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cases;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, rank_by_values, Direction, EvalContext, EvalFn, U2Target};
use crate::hitl::{run_hitl_round, FeedbackSource, HitlParams, RankingFeedback, Variant};
use crate::mga::{generate_mga_set, AlternativeSet};
use crate::network::{hamming_distance, Network, Topology};
use crate::reconfig::{solve_eval_optimum, Alternative, EvalBound, ReconfigModel, Solver, SwitchingOptions};

pub use export::{export_report, read_alternatives_csv, report_rows, AlternativeRow};

/// Values are compared after rounding to this resolution.
pub const VALUE_RESOLUTION: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReducedSpec {
    pub alt_count: usize,
    pub top_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub taus: Vec<f64>,
    /// a/b ratios, applied as a = ratio, b = 1.
    pub ab_ratios: Vec<f64>,
    pub reduced: ReducedSpec,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            taus: vec![0.05, 0.15, 0.75, 0.95],
            ab_ratios: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            reduced: ReducedSpec { alt_count: 10, top_k: 3 },
        }
    }
}

impl Default for ReducedSpec {
    fn default() -> Self {
        SweepSpec::default().reduced
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Bundled case name or path to a case file.
    pub case: String,
    /// Multiplier on every line limit; required.
    pub congestion_factor: Option<f64>,
    pub switching: SwitchingOptions,
    pub epsilon: f64,
    pub alt_count: usize,
    /// Alternatives per feedback round; defaults to `alt_count`.
    pub hitl_count: Option<usize>,
    pub top_k: usize,
    pub seeds: usize,
    pub seed_base: u64,
    pub gap: f64,
    pub time_limit: Option<f64>,
    pub tau: f64,
    pub a: f64,
    pub b: f64,
    pub fns: Vec<EvalFn>,
    pub variants: Vec<Variant>,
    pub u2_target: U2Target,
    /// Put the least-cost solution into the initial set.
    pub include_least_cost: bool,
    pub compute_bounds: bool,
    pub sweeps: SweepSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            case: "case57".to_string(),
            congestion_factor: None,
            switching: SwitchingOptions::lines_and_busbars(3, 3),
            epsilon: 0.05,
            alt_count: 100,
            hitl_count: None,
            top_k: 10,
            seeds: 4,
            seed_base: 1,
            gap: 1e-3,
            time_limit: None,
            tau: 0.15,
            a: 1.0,
            b: 1.0,
            fns: EvalFn::ALL.to_vec(),
            variants: Variant::ALL.to_vec(),
            u2_target: U2Target::Zero,
            include_least_cost: false,
            compute_bounds: true,
            sweeps: SweepSpec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let factor = self
            .congestion_factor
            .ok_or_else(|| Error::Config("congestion_factor must be set".to_string()))?;
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(Error::Config(format!("congestion_factor {factor} outside (0, 1]")));
        }
        if self.alt_count == 0 || self.top_k == 0 || self.seeds == 0 || self.hitl_count == Some(0) {
            return Err(Error::Config("alt_count, hitl_count, top_k and seeds must be at least 1".to_string()));
        }
        if self.top_k > self.alt_count {
            return Err(Error::Config(format!("top_k {} exceeds alt_count {}", self.top_k, self.alt_count)));
        }
        if !(self.epsilon >= 0.0) || !(self.gap > 0.0) {
            return Err(Error::Config("epsilon must be >= 0 and gap > 0".to_string()));
        }
        self.switching.validate()?;
        self.hitl_params(Variant::V2).validate()
    }

    pub fn hitl_params(&self, variant: Variant) -> HitlParams {
        HitlParams {
            variant,
            tau: self.tau,
            a: self.a,
            b: self.b,
            round_count: self.hitl_count.unwrap_or(self.alt_count),
        }
    }

    pub fn seed_values(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.seed_base + i).collect()
    }

    /// Loads the case and applies the congestion factor.
    pub fn network(&self) -> Result<Network> {
        self.validate()?;
        let net = cases::load(&self.case)?;
        net.scale_line_capacities(self.congestion_factor.unwrap_or(1.0))
    }

    /// One configuration per sweep point, named for the output subdirectory.
    pub fn sweep_configs(&self) -> Vec<(String, ExperimentConfig)> {
        let mut out = Vec::new();
        for &tau in &self.sweeps.taus {
            let mut c = self.clone();
            c.tau = tau;
            c.variants.retain(|v| *v != Variant::V2);
            out.push((format!("tau-{tau}"), c));
        }
        for &r in &self.sweeps.ab_ratios {
            let mut c = self.clone();
            c.a = r;
            c.b = 1.0;
            out.push((format!("ab-{r}"), c));
        }
        let mut c = self.clone();
        c.alt_count = self.sweeps.reduced.alt_count;
        c.hitl_count = None;
        c.top_k = self.sweeps.reduced.top_k.min(c.alt_count);
        out.push(("reduced".to_string(), c));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Some(Self { median, min: v[0], max: v[n - 1] })
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    Stats::of(values).map(|s| s.median)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativeRecord {
    pub index: usize,
    pub topology: String,
    pub cost: f64,
    pub slack: f64,
    pub unique: bool,
    pub values: BTreeMap<EvalFn, f64>,
    pub hamming_to_reference: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// "mga" or the round label of a feedback round.
    pub label: String,
    /// Function whose ranking guided the round (none for the initial set).
    pub fn_id: Option<EvalFn>,
    pub variant: Option<Variant>,
    pub ranking: Vec<usize>,
    pub warnings: Vec<String>,
    pub alternatives: Vec<AlternativeRecord>,
    pub summary: BTreeMap<EvalFn, Stats>,
}

impl RoundRecord {
    pub fn values(&self, fn_id: EvalFn) -> Vec<f64> {
        self.alternatives.iter().filter_map(|a| a.values.get(&fn_id).copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub mga: RoundRecord,
    pub hitl: Vec<RoundRecord>,
}

impl SeedReport {
    pub fn hitl_round(&self, fn_id: EvalFn, variant: Variant) -> Option<&RoundRecord> {
        self.hitl
            .iter()
            .find(|r| r.fn_id == Some(fn_id) && r.variant == Some(variant))
    }

    pub fn rounds(&self) -> impl Iterator<Item = &RoundRecord> {
        std::iter::once(&self.mga).chain(&self.hitl)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuableFlags {
    pub seed: u64,
    pub fn_id: EvalFn,
    pub mga_valuable: bool,
    pub hitl_more_valuable: BTreeMap<Variant, bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub network: String,
    pub f_star: f64,
    pub least_cost_topology: String,
    pub bounds: Vec<EvalBound>,
    pub seeds: Vec<SeedReport>,
    pub failures: Vec<SeedFailure>,
    pub valuable: Vec<ValuableFlags>,
    /// Topology with the least quadratic load over every generated alternative.
    pub hamming_reference: Option<String>,
}

fn rounded(v: f64) -> f64 {
    (v / VALUE_RESOLUTION).round() * VALUE_RESOLUTION
}

/// The initial set is valuable if its values are not all equal.
pub fn mga_valuable(values: &[f64]) -> bool {
    let mut it = values.iter().map(|&v| rounded(v));
    match it.next() {
        Some(first) => it.any(|v| v != first),
        None => false,
    }
}

/// A feedback round is more valuable if its best beats the initial best, or
/// ties it with more alternatives at that value.
pub fn hitl_more_valuable(mga: &[f64], hitl: &[f64], direction: Direction) -> bool {
    let best = |vs: &[f64]| {
        vs.iter().map(|&v| rounded(v)).reduce(|a, b| if direction.better(b, a) { b } else { a })
    };
    match (best(mga), best(hitl)) {
        (Some(bm), Some(bh)) => {
            if direction.better(bh, bm) {
                return true;
            }
            let count = |vs: &[f64]| vs.iter().filter(|&&v| rounded(v) == bm).count();
            bh == bm && count(hitl) > count(mga)
        }
        (None, Some(_)) => true,
        _ => false,
    }
}

/// Flags per (seed, fn) following the two definitions above.
pub fn classify_valuable(report: &ExperimentReport) -> Vec<ValuableFlags> {
    let mut out = Vec::new();
    for s in &report.seeds {
        for &f in &report.config.fns {
            let mga = s.mga.values(f);
            let hitl_more_valuable = s
                .hitl
                .iter()
                .filter(|r| r.fn_id == Some(f))
                .filter_map(|r| r.variant.map(|v| (v, hitl_more_valuable(&mga, &r.values(f), f.direction()))))
                .collect();
            out.push(ValuableFlags {
                seed: s.seed,
                fn_id: f,
                mga_valuable: mga_valuable(&mga),
                hitl_more_valuable,
            });
        }
    }
    out
}

/// Shared state of one experiment: the model, the least-cost point and the
/// evaluation context.
pub struct Study {
    pub network: Arc<Network>,
    pub model: ReconfigModel,
    pub solver: Solver,
    pub f_star: f64,
    pub least_cost: Alternative,
    pub ctx: EvalContext,
}

impl Study {
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Self> {
        let network = Arc::new(cfg.network()?);
        let model = ReconfigModel::build(network.clone(), cfg.switching.clone())?;
        let mut solver = Solver::with_default_backend(cfg.gap)?;
        solver.options.time_limit = cfg.time_limit;
        let (f_star, least_cost) = model.solve_least_cost(&solver)?;
        let ctx = EvalContext::from_least_cost(&least_cost.topology).with_u2_target(cfg.u2_target);
        Ok(Self { network, model, solver, f_star, least_cost, ctx })
    }

    pub fn evaluate_all(&self, alt: &Alternative, fns: &[EvalFn]) -> Result<BTreeMap<EvalFn, f64>> {
        fns.iter()
            .map(|&f| Ok((f, evaluate(f, alt, &self.network, self.model.layout(), &self.ctx)?)))
            .collect()
    }

    fn record_round(&self, set: &AlternativeSet, fns: &[EvalFn]) -> Result<Vec<AlternativeRecord>> {
        set.alternatives
            .iter()
            .map(|a| {
                Ok(AlternativeRecord {
                    index: a.index,
                    topology: a.topology.to_bit_string(),
                    cost: a.cost,
                    slack: a.slack,
                    unique: a.unique,
                    values: self.evaluate_all(a, fns)?,
                    hamming_to_reference: None,
                })
            })
            .collect()
    }

    fn run_seed(&self, cfg: &ExperimentConfig, seed: u64) -> Result<SeedReport> {
        let mut set = generate_mga_set(&self.model, &self.solver, self.f_star, cfg.epsilon, cfg.alt_count, seed)?;
        if cfg.include_least_cost {
            set.prepend(self.least_cost.clone());
        }
        let mga_alts = self.record_round(&set, &cfg.fns)?;
        let mga = round_record("mga".to_string(), None, None, Vec::new(), Vec::new(), mga_alts, &cfg.fns);
        let mut hitl = Vec::new();
        for &f in &cfg.fns {
            if cfg.variants.is_empty() {
                break;
            }
            let values = mga.values(f);
            let ranking: Vec<usize> = rank_by_values(&values, f.direction()).into_iter().take(cfg.top_k).collect();
            let feedback = RankingFeedback {
                ranked_ids: ranking.clone(),
                source: FeedbackSource::Simulated { fn_id: f },
            };
            for &v in &cfg.variants {
                let round = run_hitl_round(&self.model, &self.solver, &set, &feedback, &cfg.hitl_params(v), seed)?;
                let alts = self.record_round(&round.set, &cfg.fns)?;
                hitl.push(round_record(
                    v.label().to_string(),
                    Some(f),
                    Some(v),
                    ranking.clone(),
                    round.warnings,
                    alts,
                    &cfg.fns,
                ));
            }
        }
        Ok(SeedReport { seed, mga, hitl })
    }
}

fn round_record(
    label: String,
    fn_id: Option<EvalFn>,
    variant: Option<Variant>,
    ranking: Vec<usize>,
    warnings: Vec<String>,
    alternatives: Vec<AlternativeRecord>,
    fns: &[EvalFn],
) -> RoundRecord {
    let mut r = RoundRecord {
        label,
        fn_id,
        variant,
        ranking,
        warnings,
        alternatives,
        summary: BTreeMap::new(),
    };
    r.summary = fns.iter().filter_map(|&f| Stats::of(&r.values(f)).map(|s| (f, s))).collect();
    r
}

fn assign_hamming(report: &mut ExperimentReport) -> Result<()> {
    let reference = report
        .seeds
        .iter()
        .flat_map(|s| s.rounds())
        .flat_map(|r| &r.alternatives)
        .filter_map(|a| a.values.get(&EvalFn::U5).map(|v| (v, &a.topology)))
        .min_by(|a, b| a.0.total_cmp(b.0))
        .map(|(_, t)| t.clone());
    if let Some(reference) = &reference {
        let rt = Topology::parse_bit_string(reference)?;
        for s in &mut report.seeds {
            for r in std::iter::once(&mut s.mga).chain(s.hitl.iter_mut()) {
                for a in &mut r.alternatives {
                    a.hamming_to_reference = Some(hamming_distance(&Topology::parse_bit_string(&a.topology)?, &rt)?);
                }
            }
        }
    }
    report.hamming_reference = reference;
    Ok(())
}

/// Runs the whole study. A failing seed is reported and the others continue;
/// failures before the first seed (network, least cost) abort.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let study = Study::prepare(cfg)?;
    let mut bounds = Vec::new();
    if cfg.compute_bounds {
        for &f in cfg.fns.iter().filter(|f| **f != EvalFn::U6) {
            match solve_eval_optimum(&study.model, &study.solver, f, &study.ctx, study.f_star, cfg.epsilon) {
                Ok(b) => bounds.push(b),
                Err(e) => log::warn!("bound for {f} failed: {e}"),
            }
        }
    }
    let mut seeds = Vec::new();
    let mut failures = Vec::new();
    for seed in cfg.seed_values() {
        log::info!("seed {seed}");
        match study.run_seed(cfg, seed) {
            Ok(r) => seeds.push(r),
            Err(e) => {
                log::error!("seed {seed} failed: {e}");
                failures.push(SeedFailure { seed, error: e.to_string() });
            }
        }
    }
    let mut report = ExperimentReport {
        config: cfg.clone(),
        network: study.network.name.clone(),
        f_star: study.f_star,
        least_cost_topology: study.least_cost.topology.to_bit_string(),
        bounds,
        seeds,
        failures,
        valuable: Vec::new(),
        hamming_reference: None,
    };
    assign_hamming(&mut report)?;
    report.valuable = classify_valuable(&report);
    Ok(report)
}

/// Topologies seen so far across a report, for uniqueness checks.
pub fn distinct_topologies(report: &ExperimentReport) -> HashSet<String> {
    report
        .seeds
        .iter()
        .flat_map(|s| s.rounds())
        .flat_map(|r| r.alternatives.iter().map(|a| a.topology.clone()))
        .collect()
}

/// Where `export_report` writes, by file.
pub fn export_paths(dir: &std::path::Path) -> [PathBuf; 4] {
    [
        dir.join("alternatives.csv"),
        dir.join("summary.json"),
        dir.join("pareto.csv"),
        dir.join("hamming.csv"),
    ]
}
