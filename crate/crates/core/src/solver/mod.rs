//! Backend-neutral MILP description and the boundary every solver implements.
//!
//! A [`MilpProblem`] is plain data (variables, two-sided rows, a minimized
//! linear objective), so it can be cloned and solved on several threads at
//! once. Backends implement [`MilpBackend`].

#[cfg(feature = "highs")]
mod highs_backend;

#[cfg(feature = "highs")]
pub use highs_backend::HighsBackend;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub terms: Vec<(VarId, f64)>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpProblem {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    /// Dense objective coefficients (minimized).
    pub objective: Vec<f64>,
}

impl MilpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, lower: f64, upper: f64) -> VarId {
        self.push_var(lower, upper, VarKind::Continuous)
    }

    pub fn add_binary(&mut self) -> VarId {
        self.push_var(0.0, 1.0, VarKind::Binary)
    }

    fn push_var(&mut self, lower: f64, upper: f64, kind: VarKind) -> VarId {
        self.vars.push(Variable { lower, upper, kind });
        self.objective.push(0.0);
        VarId(self.vars.len() - 1)
    }

    pub fn add_row(&mut self, terms: Vec<(VarId, f64)>, lower: f64, upper: f64) -> usize {
        self.rows.push(Row { terms, lower, upper });
        self.rows.len() - 1
    }

    pub fn add_le(&mut self, terms: Vec<(VarId, f64)>, rhs: f64) -> usize {
        self.add_row(terms, f64::NEG_INFINITY, rhs)
    }

    pub fn add_ge(&mut self, terms: Vec<(VarId, f64)>, rhs: f64) -> usize {
        self.add_row(terms, rhs, f64::INFINITY)
    }

    pub fn add_eq(&mut self, terms: Vec<(VarId, f64)>, rhs: f64) -> usize {
        self.add_row(terms, rhs, rhs)
    }

    /// Replaces the objective with `terms` (unlisted variables get 0).
    pub fn set_objective(&mut self, terms: &[(VarId, f64)]) {
        self.objective.iter_mut().for_each(|c| *c = 0.0);
        for &(v, c) in terms {
            self.objective[v.0] += c;
        }
    }

    pub fn fix(&mut self, var: VarId, value: f64) {
        self.vars[var.0].lower = value;
        self.vars[var.0].upper = value;
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative MIP optimality gap.
    pub relative_gap: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            relative_gap: 1e-3,
            time_limit: None,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub values: Vec<f64>,
    pub objective: f64,
    /// Best proven lower bound on the objective.
    pub dual_bound: f64,
    /// Relative gap reported by the backend (0 for pure LPs).
    pub gap: f64,
}

impl MilpSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error("time limit reached")]
    TimeLimit { incumbent: Option<Box<MilpSolution>> },
    #[error("backend failure: {0}")]
    Backend(String),
}

pub trait MilpBackend: Send + Sync {
    fn name(&self) -> &str;

    fn solve(&self, problem: &MilpProblem, options: &SolveOptions) -> Result<MilpSolution, SolveError>;
}

/// The backend compiled into this build, if any.
pub fn default_backend() -> Option<Box<dyn MilpBackend>> {
    #[cfg(feature = "highs")]
    {
        Some(Box::new(HighsBackend::default()))
    }
    #[cfg(not(feature = "highs"))]
    {
        None
    }
}
