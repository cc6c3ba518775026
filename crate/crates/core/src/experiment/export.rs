use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{export_paths, ExperimentReport};
use crate::error::Result;
use crate::evaluation::EvalFn;

/// One line of `alternatives.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativeRow {
    pub seed: u64,
    pub round: String,
    /// Ranking function of a feedback round, empty for the initial set.
    pub ranked_by: Option<EvalFn>,
    pub index: usize,
    pub cost: f64,
    pub slack: f64,
    pub u1: Option<f64>,
    pub u2: Option<f64>,
    pub u3: Option<f64>,
    pub u4: Option<f64>,
    pub u5: Option<f64>,
    pub u6: Option<f64>,
    pub unique: bool,
    pub hamming_to_reference: Option<usize>,
    pub topology: String,
}

impl AlternativeRow {
    pub fn value(&self, f: EvalFn) -> Option<f64> {
        match f {
            EvalFn::U1 => self.u1,
            EvalFn::U2 => self.u2,
            EvalFn::U3 => self.u3,
            EvalFn::U4 => self.u4,
            EvalFn::U5 => self.u5,
            EvalFn::U6 => self.u6,
        }
    }
}

fn rows(report: &ExperimentReport) -> Vec<AlternativeRow> {
    let mut out = Vec::new();
    for s in &report.seeds {
        for r in s.rounds() {
            for a in &r.alternatives {
                let v = |f| a.values.get(&f).copied();
                out.push(AlternativeRow {
                    seed: s.seed,
                    round: r.label.clone(),
                    ranked_by: r.fn_id,
                    index: a.index,
                    cost: a.cost,
                    slack: a.slack,
                    u1: v(EvalFn::U1),
                    u2: v(EvalFn::U2),
                    u3: v(EvalFn::U3),
                    u4: v(EvalFn::U4),
                    u5: v(EvalFn::U5),
                    u6: v(EvalFn::U6),
                    unique: a.unique,
                    hamming_to_reference: a.hamming_to_reference,
                    topology: a.topology.clone(),
                });
            }
        }
    }
    out
}

#[derive(Serialize)]
struct SeriesPoint<'a> {
    fn_id: EvalFn,
    seed: u64,
    round: &'a str,
    ranked_by: Option<EvalFn>,
    x: f64,
    value: f64,
}

/// Writes `alternatives.csv`, `summary.json`, and the plot series
/// `pareto.csv` (cost against each value) and `hamming.csv` (distance to
/// the least-quadratic-load topology against each value).
pub fn export_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let [alts_path, summary_path, pareto_path, hamming_path] = export_paths(dir);
    let rows = rows(report);

    let mut w = csv::Writer::from_path(&alts_path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;

    fs::write(&summary_path, serde_json::to_string_pretty(report)?)?;

    let mut pareto = csv::Writer::from_path(&pareto_path)?;
    let mut hamming = csv::Writer::from_path(&hamming_path)?;
    for r in &rows {
        for &f in &report.config.fns {
            let Some(value) = r.value(f) else { continue };
            let point = |x| SeriesPoint {
                fn_id: f,
                seed: r.seed,
                round: &r.round,
                ranked_by: r.ranked_by,
                x,
                value,
            };
            pareto.serialize(point(r.cost))?;
            if let Some(h) = r.hamming_to_reference {
                hamming.serialize(point(h as f64))?;
            }
        }
    }
    pareto.flush()?;
    hamming.flush()?;
    Ok(())
}

pub fn read_alternatives_csv(path: &Path) -> Result<Vec<AlternativeRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

/// Rows that `export_report` writes to `alternatives.csv`.
pub fn report_rows(report: &ExperimentReport) -> Vec<AlternativeRow> {
    rows(report)
}
