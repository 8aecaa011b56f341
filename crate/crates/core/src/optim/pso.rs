//! Global-best particle swarm with inertia weight and velocity clamping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmin, evaluate_all, BestSoFar, Objective, OptimizerRun};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoParams {
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
}

impl Default for PsoParams {
    /// Constriction-equivalent coefficients.
    fn default() -> Self {
        Self {
            inertia: 0.7298,
            cognitive: 1.49618,
            social: 1.49618,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Swarm {
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub pbest: Vec<Vec<f64>>,
    pub pbest_fitness: Vec<f64>,
    pub gbest: Vec<f64>,
    pub gbest_fitness: f64,
    /// Velocity components are clamped to `[-vmax, vmax]`.
    pub vmax: f64,
}

impl Swarm {
    /// Evaluates the given particles and sets personal and global bests.
    pub fn from_state<O: Objective + ?Sized>(
        obj: &O,
        positions: Vec<Vec<f64>>,
        velocities: Vec<Vec<f64>>,
        vmax: f64,
    ) -> Self {
        let fitness = evaluate_all(obj, &positions);
        let g = argmin(&fitness);
        Self {
            gbest: positions[g].clone(),
            gbest_fitness: fitness[g],
            pbest: positions.clone(),
            pbest_fitness: fitness,
            positions,
            velocities,
            vmax,
        }
    }

    fn random<O: Objective + ?Sized, R: Rng>(obj: &O, run: &OptimizerRun, rng: &mut R) -> Self {
        let dim = obj.dimension();
        let half = run.width() / 2.0;
        let positions = (0..run.population_size).map(|_| run.random_point(rng, dim)).collect();
        let velocities = (0..run.population_size)
            .map(|_| (0..dim).map(|_| rng.random_range(-half..half)).collect())
            .collect();
        Self::from_state(obj, positions, velocities, run.width())
    }

    /// Moves every particle once, then evaluates and updates the bests.
    /// Returns the fitness of the new positions.
    pub fn step<O: Objective + ?Sized, R: Rng>(&mut self, obj: &O, params: &PsoParams, rng: &mut R) -> Vec<f64> {
        for p in 0..self.positions.len() {
            let (x, v) = (&mut self.positions[p], &mut self.velocities[p]);
            for i in 0..x.len() {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let vi = params.inertia * v[i]
                    + params.cognitive * r1 * (self.pbest[p][i] - x[i])
                    + params.social * r2 * (self.gbest[i] - x[i]);
                v[i] = vi.clamp(-self.vmax, self.vmax);
                x[i] += v[i];
            }
        }
        let fitness = evaluate_all(obj, &self.positions);
        for (p, &f) in fitness.iter().enumerate() {
            if f < self.pbest_fitness[p] {
                self.pbest_fitness[p] = f;
                self.pbest[p].clone_from(&self.positions[p]);
            }
            if f < self.gbest_fitness {
                self.gbest_fitness = f;
                self.gbest.clone_from(&self.positions[p]);
            }
        }
        fitness
    }
}

pub fn pso_minimize<O: Objective + ?Sized>(obj: &O, run: &OptimizerRun, params: &PsoParams) -> Result<BestSoFar> {
    run.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let mut swarm = Swarm::random(obj, run, &mut rng);
    let mut best = BestSoFar::new(swarm.gbest.clone(), swarm.gbest_fitness);
    best.evaluations = run.population_size;
    for _ in 0..run.generations {
        let fitness = swarm.step(obj, params, &mut rng);
        best.evaluations += run.population_size;
        best.offer(&swarm.gbest, swarm.gbest_fitness);
        best.close_generation(&fitness, None);
    }
    Ok(best)
}
