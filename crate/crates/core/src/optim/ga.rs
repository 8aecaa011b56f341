//! Real-coded generational GA: tournament selection, arithmetic crossover
//! with a per-coordinate blend factor, sparse Gaussian mutation and a
//! single elite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{argmin, evaluate_all, BestSoFar, Objective, OptimizerRun};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaParams {
    pub tournament_size: usize,
    pub crossover_rate: f64,
    /// Per-coordinate mutation probability; `None` means `1 / dimension`.
    pub mutation_rate: Option<f64>,
    /// Mutation sigma as a fraction of the init-range width.
    pub mutation_scale: f64,
    pub elitism: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            tournament_size: 3,
            crossover_rate: 0.9,
            mutation_rate: None,
            mutation_scale: 0.1,
            elitism: 1,
        }
    }
}

fn tournament<R: Rng>(rng: &mut R, fitness: &[f64], size: usize) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.random_range(0..fitness.len());
        if fitness[c] < fitness[best] {
            best = c;
        }
    }
    best
}

pub fn ga_minimize<O: Objective + ?Sized>(obj: &O, run: &OptimizerRun, params: &GaParams) -> Result<BestSoFar> {
    run.validate()?;
    let dim = obj.dimension();
    let pop_size = run.population_size;
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let p_mut = params.mutation_rate.unwrap_or(1.0 / dim.max(1) as f64);
    let noise = Normal::new(0.0, params.mutation_scale * run.width()).expect("finite sigma");

    let mut pop: Vec<Vec<f64>> = (0..pop_size).map(|_| run.random_point(&mut rng, dim)).collect();
    let mut fitness = evaluate_all(obj, &pop);
    let first = argmin(&fitness);
    let mut best = BestSoFar::new(pop[first].clone(), fitness[first]);
    best.evaluations = pop_size;

    for _ in 0..run.generations {
        let mut elites: Vec<usize> = (0..pop_size).collect();
        elites.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
        elites.truncate(params.elitism.min(pop_size));

        let mut offspring = Vec::with_capacity(pop_size);
        while offspring.len() < pop_size {
            let a = &pop[tournament(&mut rng, &fitness, params.tournament_size)];
            let b = &pop[tournament(&mut rng, &fitness, params.tournament_size)];
            let (mut c1, mut c2) = (a.clone(), b.clone());
            if rng.random_bool(params.crossover_rate) {
                for i in 0..dim {
                    let alpha: f64 = rng.random();
                    c1[i] = alpha * a[i] + (1.0 - alpha) * b[i];
                    c2[i] = (1.0 - alpha) * a[i] + alpha * b[i];
                }
            }
            for child in [&mut c1, &mut c2] {
                for v in child.iter_mut() {
                    if rng.random_bool(p_mut) {
                        *v += noise.sample(&mut rng);
                    }
                }
            }
            offspring.push(c1);
            if offspring.len() < pop_size {
                offspring.push(c2);
            }
        }

        let mut child_fitness = evaluate_all(obj, &offspring);
        best.evaluations += pop_size;

        // Elites replace the worst offspring.
        let mut worst: Vec<usize> = (0..pop_size).collect();
        worst.sort_by(|&a, &b| child_fitness[b].total_cmp(&child_fitness[a]));
        for (&e, &w) in elites.iter().zip(&worst) {
            if fitness[e] < child_fitness[w] {
                offspring[w] = pop[e].clone();
                child_fitness[w] = fitness[e];
            }
        }

        pop = offspring;
        fitness = child_fitness;
        let i = argmin(&fitness);
        best.offer(&pop[i], fitness[i]);
        best.close_generation(&fitness, None);
    }
    Ok(best)
}
