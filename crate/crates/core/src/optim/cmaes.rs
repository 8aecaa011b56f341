//! CMA-ES with cumulative step-size adaptation, rank-one plus rank-mu
//! covariance update and lazily refreshed eigendecomposition.
//!
//! Follows Hansen's tutorial formulation. Samples are kept in the
//! `y = B D z` space so that the update equations never see absolute
//! coordinates, which keeps the algorithm translation invariant.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{evaluate_all, BestSoFar, Objective, OptimizerRun};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmaesParams {
    /// Initial step size as a fraction of the init-range width.
    pub sigma_scale: f64,
}

impl Default for CmaesParams {
    fn default() -> Self {
        Self { sigma_scale: 0.3 }
    }
}

#[derive(Clone, Debug)]
pub struct CmaEs {
    n: usize,
    lambda: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    cc: f64,
    cs: f64,
    c1: f64,
    cmu: f64,
    damps: f64,
    chi_n: f64,

    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    pc: DVector<f64>,
    ps: DVector<f64>,

    generation: usize,
    evaluations: usize,
    eigen_evaluations: usize,
    restarts: usize,
    min_eigenvalue: f64,

    // Last `ask`: standard normal draws and their images B D z.
    z: Vec<DVector<f64>>,
    y: Vec<DVector<f64>>,
}

impl CmaEs {
    pub fn new(mean: Vec<f64>, sigma: f64, lambda: usize) -> Result<Self> {
        let n = mean.len();
        if n == 0 {
            return Err(Error::Config("CMA-ES needs at least one dimension".into()));
        }
        if lambda < 4 {
            return Err(Error::Config(format!("CMA-ES needs lambda >= 4, got {lambda}")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("initial sigma {sigma} must be positive")));
        }
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let cc = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let cs = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let c1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let cmu = (1.0 - c1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let damps = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

        Ok(Self {
            n,
            lambda,
            weights,
            mu_eff,
            cc,
            cs,
            c1,
            cmu,
            damps,
            chi_n,
            mean: DVector::from_vec(mean),
            sigma,
            cov: DMatrix::identity(n, n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            pc: DVector::zeros(n),
            ps: DVector::zeros(n),
            generation: 0,
            evaluations: 0,
            eigen_evaluations: 0,
            restarts: 0,
            min_eigenvalue: 1.0,
            z: Vec::new(),
            y: Vec::new(),
        })
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn mu(&self) -> usize {
        self.weights.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn restarts(&self) -> usize {
        self.restarts
    }

    /// Smallest eigenvalue of C over all decompositions so far.
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// Draws `lambda` candidates.
    pub fn ask<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<Vec<f64>> {
        self.z.clear();
        self.y.clear();
        let mut xs = Vec::with_capacity(self.lambda);
        for _ in 0..self.lambda {
            let z = DVector::from_fn(self.n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = &self.basis * z.component_mul(&self.scales);
            let x = &self.mean + self.sigma * &y;
            xs.push(x.as_slice().to_vec());
            self.z.push(z);
            self.y.push(y);
        }
        xs
    }

    /// Updates the distribution from the fitness of the last `ask`.
    pub fn tell(&mut self, fitness: &[f64]) {
        assert_eq!(fitness.len(), self.y.len(), "tell() needs one fitness per candidate");
        let mut order: Vec<usize> = (0..fitness.len()).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
        let n = self.n;
        let nf = n as f64;

        let mut y_w = DVector::zeros(n);
        let mut z_w = DVector::zeros(n);
        for (w, &k) in self.weights.iter().zip(&order) {
            y_w.axpy(*w, &self.y[k], 1.0);
            z_w.axpy(*w, &self.z[k], 1.0);
        }
        self.mean.axpy(self.sigma, &y_w, 1.0);

        // B z_w = C^(-1/2) y_w
        let cs = self.cs;
        let bz = &self.basis * z_w;
        self.ps *= 1.0 - cs;
        self.ps.axpy((cs * (2.0 - cs) * self.mu_eff).sqrt(), &bz, 1.0);

        let ps_norm = self.ps.norm();
        let decay = 1.0 - (1.0 - cs).powi(2 * (self.generation as i32 + 1));
        let hsig = ps_norm / decay.sqrt() / self.chi_n < 1.4 + 2.0 / (nf + 1.0);
        let hsig_f = if hsig { 1.0 } else { 0.0 };

        let cc = self.cc;
        self.pc *= 1.0 - cc;
        self.pc.axpy(hsig_f * (cc * (2.0 - cc) * self.mu_eff).sqrt(), &y_w, 1.0);

        let (c1, cmu) = (self.c1, self.cmu);
        let keep = 1.0 - c1 - cmu + (1.0 - hsig_f) * c1 * cc * (2.0 - cc);
        let mut selected = DMatrix::zeros(n, self.weights.len());
        for (j, (w, &k)) in self.weights.iter().zip(&order).enumerate() {
            selected.set_column(j, &(w.sqrt() * &self.y[k]));
        }
        self.cov.ger(c1, &self.pc, &self.pc, keep);
        self.cov.gemm(cmu, &selected, &selected.transpose(), 1.0);

        self.sigma *= ((cs / self.damps) * (ps_norm / self.chi_n - 1.0)).exp();

        self.generation += 1;
        self.evaluations += self.lambda;
        let gap = self.lambda as f64 / (c1 + cmu) / nf / 10.0;
        if (self.evaluations - self.eigen_evaluations) as f64 > gap {
            self.decompose();
        }
    }

    fn decompose(&mut self) {
        self.eigen_evaluations = self.evaluations;
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        self.cov.copy_from(&sym);
        let eig = SymmetricEigen::new(sym);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > 0.0 && min.is_finite() && eig.eigenvalues.iter().all(|v| v.is_finite())) {
            log::warn!(
                "CMA-ES covariance lost positive definiteness (min eigenvalue {min:e}) at generation {}; resetting to identity",
                self.generation
            );
            self.reset_covariance();
            return;
        }
        self.min_eigenvalue = self.min_eigenvalue.min(min);
        self.scales = eig.eigenvalues.map(f64::sqrt);
        self.basis = eig.eigenvectors;
    }

    fn reset_covariance(&mut self) {
        let n = self.n;
        self.cov = DMatrix::identity(n, n);
        self.basis = DMatrix::identity(n, n);
        self.scales = DVector::from_element(n, 1.0);
        self.pc = DVector::zeros(n);
        self.ps = DVector::zeros(n);
        self.restarts += 1;
    }
}

/// Runs CMA-ES with `lambda = population_size`, the mean drawn uniformly
/// from the init range and `sigma0 = sigma_scale * width`.
pub fn cmaes_minimize<O: Objective + ?Sized>(obj: &O, run: &OptimizerRun, params: &CmaesParams) -> Result<BestSoFar> {
    run.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let mean = run.random_point(&mut rng, obj.dimension());
    let mut es = CmaEs::new(mean, params.sigma_scale * run.width(), run.population_size)?;
    let mut best = BestSoFar::new(es.mean().to_vec(), f64::INFINITY);
    for _ in 0..run.generations {
        let xs = es.ask(&mut rng);
        let fitness = evaluate_all(obj, &xs);
        for (x, &f) in xs.iter().zip(&fitness) {
            best.offer(x, f);
        }
        es.tell(&fitness);
        best.close_generation(&fitness, Some(es.sigma()));
    }
    best.evaluations = es.evaluations();
    best.restarts = es.restarts();
    best.min_eigenvalue = Some(es.min_eigenvalue());
    Ok(best)
}
