//! Continuous black-box minimizers used to evolve encoder genomes.
//!
//! All three optimizers share [`OptimizerRun`] for budget and seeding and
//! return a [`BestSoFar`] whose `history` holds the best-ever fitness after
//! each generation. Every generation costs exactly `population_size`
//! evaluations, plus one initial population for GA and PSO.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::WORST_FITNESS;

mod cmaes;
mod ga;
mod pso;

pub use cmaes::{cmaes_minimize, CmaEs, CmaesParams};
pub use ga::{ga_minimize, GaParams};
pub use pso::{pso_minimize, PsoParams, Swarm};

/// A function to minimize. Implementations must be pure: the same vector
/// always yields the same fitness.
pub trait Objective: Sync {
    fn dimension(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> f64;
}

/// Adapts a closure into an [`Objective`].
pub struct FnObjective<F> {
    dimension: usize,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(dimension: usize, f: F) -> Self {
        Self { dimension, f }
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Evaluates a batch in parallel; NaN is mapped to the worst fitness.
pub(crate) fn evaluate_all<O: Objective + ?Sized>(obj: &O, xs: &[Vec<f64>]) -> Vec<f64> {
    xs.par_iter()
        .map(|x| {
            let f = obj.evaluate(x);
            if f.is_nan() {
                WORST_FITNESS
            } else {
                f
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerRun {
    pub population_size: usize,
    pub generations: usize,
    pub seed: u64,
    pub init_range: (f64, f64),
}

impl OptimizerRun {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::Config(format!(
                "population size {} is below the minimum of 4",
                self.population_size
            )));
        }
        if self.generations == 0 {
            return Err(Error::Config("at least one generation is required".into()));
        }
        let (lo, hi) = self.init_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!(
                "init range [{lo}, {hi}] is not a valid interval"
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.init_range.1 - self.init_range.0
    }

    pub(crate) fn random_point<R: Rng + ?Sized>(&self, rng: &mut R, dim: usize) -> Vec<f64> {
        let (lo, hi) = self.init_range;
        (0..dim).map(|_| rng.random_range(lo..hi)).collect()
    }
}

/// One row of the per-generation progress stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    /// Step size, CMA-ES only.
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestSoFar {
    pub vector: Vec<f64>,
    pub fitness: f64,
    /// Best-ever fitness after each generation.
    pub history: Vec<f64>,
    pub progress: Vec<GenerationRecord>,
    pub evaluations: usize,
    /// CMA-ES covariance resets after a failed eigendecomposition.
    pub restarts: usize,
    /// Smallest covariance eigenvalue seen, CMA-ES only.
    pub min_eigenvalue: Option<f64>,
}

impl BestSoFar {
    pub(crate) fn new(vector: Vec<f64>, fitness: f64) -> Self {
        Self {
            vector,
            fitness,
            history: Vec::new(),
            progress: Vec::new(),
            evaluations: 0,
            restarts: 0,
            min_eigenvalue: None,
        }
    }

    /// Keeps `(x, f)` if it beats the current best.
    pub(crate) fn offer(&mut self, x: &[f64], f: f64) {
        if f < self.fitness {
            self.fitness = f;
            self.vector.clear();
            self.vector.extend_from_slice(x);
        }
    }

    pub(crate) fn close_generation(&mut self, fitness: &[f64], sigma: Option<f64>) {
        self.history.push(self.fitness);
        self.progress.push(GenerationRecord {
            generation: self.history.len(),
            best: self.fitness,
            mean: mean(fitness),
            sigma,
        });
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Index of the smallest value; the first one on ties.
pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Writes progress records as `generation,best,mean,sigma`.
pub fn write_progress_csv<W: Write>(out: W, records: &[GenerationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["generation", "best", "mean", "sigma"])?;
    for r in records {
        w.write_record([
            r.generation.to_string(),
            r.best.to_string(),
            r.mean.to_string(),
            r.sigma.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
