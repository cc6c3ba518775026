//! Diverse near-optimal alternatives from random diversity weights.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Topology;
use crate::reconfig::{Alternative, ObjectiveSpec, ReconfigModel, RoundLabel, Solver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    Diversity,
    Feedback,
    Composed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub values: Vec<f64>,
    pub kind: WeightKind,
}

impl WeightVector {
    pub fn new(values: Vec<f64>, kind: WeightKind) -> Self {
        Self { values, kind }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `n` weights uniform on [0, 1), fixed by `(seed, index)`.
pub fn sample_diversity_weights(n: usize, seed: u64, index: u64) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::Domain("weight vector needs at least one dimension".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let values = (0..n).map(|_| rng.gen::<f64>()).collect();
    Ok(WeightVector::new(values, WeightKind::Diversity))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativeSet {
    pub network: String,
    pub f_star: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub alternatives: Vec<Alternative>,
}

impl AlternativeSet {
    pub fn len(&self) -> usize {
        self.alternatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alternatives.is_empty()
    }

    pub fn topologies(&self) -> impl Iterator<Item = &Topology> {
        self.alternatives.iter().map(|a| &a.topology)
    }

    /// Puts `least_cost` in front and renumbers.
    pub fn prepend(&mut self, least_cost: Alternative) {
        self.alternatives.insert(0, least_cost);
        mark_unique(&mut self.alternatives, &HashSet::new());
    }

    /// Cost budget `f*(1+ε)`.
    pub fn budget(&self) -> f64 {
        self.f_star * (1.0 + self.epsilon)
    }
}

/// Renumbers `alts` and flags each one unique if neither `known` nor an
/// earlier entry has its topology.
pub fn mark_unique(alts: &mut [Alternative], known: &HashSet<Topology>) {
    let mut seen = known.clone();
    for (i, a) in alts.iter_mut().enumerate() {
        a.index = i;
        a.unique = seen.insert(a.topology.clone());
    }
}

/// Runs `f(0..count)`, in parallel when built with `parallel`, keeping index order.
pub(crate) fn solve_indexed<T: Send>(count: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Generates `count` alternatives, alternative `i` using the weights of
/// substream `i` of `seed`.
pub fn generate_mga_set(
    model: &ReconfigModel,
    solver: &Solver,
    f_star: f64,
    epsilon: f64,
    count: usize,
    seed: u64,
) -> Result<AlternativeSet> {
    if count == 0 {
        return Err(Error::Domain("alternative count must be at least 1".to_string()));
    }
    let n = model.n();
    let mut alternatives = solve_indexed(count, |i| {
        let w = sample_diversity_weights(n, seed, i as u64)?;
        let obj = ObjectiveSpec::augmented(w.values, f_star);
        let mut alt = model.solve_alternative(solver, &obj, f_star, epsilon)?;
        alt.weight_seed = seed;
        alt.round = RoundLabel::Mga;
        Ok(alt)
    })?;
    mark_unique(&mut alternatives, &HashSet::new());
    Ok(AlternativeSet {
        network: model.network().name.clone(),
        f_star,
        epsilon,
        seed,
        alternatives,
    })
}
