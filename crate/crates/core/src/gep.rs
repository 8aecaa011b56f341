//! Standard gene expression programming over single-gene chromosomes.
//!
//! Operators follow the usual GEP definitions: point mutation respecting the
//! head/tail split, one-point recombination, IS and RIS transposition of
//! short segments (at most `transposon_max_len` symbols) and head inversion.
//! Every operator maps valid genes to valid genes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{mse_fitness, Alphabet, Dataset};
use crate::kexpr::{decode, random_gene, random_head_symbol, random_terminal, Gene};
use crate::optim::GenerationRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GepParams {
    /// Set from the experiment settings when run as part of a suite.
    #[serde(skip)]
    pub pop_size: usize,
    #[serde(skip)]
    pub generations: usize,
    pub head_len: usize,
    pub crossover_rate: f64,
    /// Per-position mutation probability.
    pub mutation_rate: f64,
    pub is_rate: f64,
    pub ris_rate: f64,
    pub inversion_rate: f64,
    pub tournament_size: usize,
    pub elitism: usize,
    pub transposon_max_len: usize,
}

impl Default for GepParams {
    fn default() -> Self {
        Self {
            pop_size: 100,
            generations: 500,
            head_len: 30,
            crossover_rate: 0.7,
            mutation_rate: 0.1,
            is_rate: 0.1,
            ris_rate: 0.1,
            inversion_rate: 0.1,
            tournament_size: 3,
            elitism: 1,
            transposon_max_len: 3,
        }
    }
}

impl GepParams {
    pub fn validate(&self) -> Result<()> {
        for (name, rate) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
            ("is_rate", self.is_rate),
            ("ris_rate", self.ris_rate),
            ("inversion_rate", self.inversion_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Config(format!("{name} {rate} is outside [0, 1]")));
            }
        }
        if self.pop_size < 2 {
            return Err(Error::Config("GEP needs a population of at least 2".into()));
        }
        if self.head_len == 0 || self.tournament_size == 0 || self.transposon_max_len == 0 {
            return Err(Error::Config(
                "head_len, tournament_size and transposon_max_len must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Replaces each position with probability `rate`; head positions draw from
/// the whole alphabet, tail positions from the terminals.
pub fn mutate<R: Rng + ?Sized>(gene: &Gene, rng: &mut R, rate: f64, alphabet: &Alphabet) -> Gene {
    let h = gene.head_len();
    let mut symbols = gene.symbols().to_vec();
    for (i, s) in symbols.iter_mut().enumerate() {
        if rng.random_bool(rate) {
            *s = if i < h {
                random_head_symbol(rng, alphabet)
            } else {
                random_terminal(rng, alphabet)
            };
        }
    }
    Gene::from_parts(symbols, h)
}

/// Exchanges the suffixes after a uniform cut point in `[0, len)`.
pub fn one_point_crossover<R: Rng + ?Sized>(a: &Gene, b: &Gene, rng: &mut R) -> Result<(Gene, Gene)> {
    if a.len() != b.len() || a.head_len() != b.head_len() {
        return Err(Error::Usage(format!(
            "crossover of genes with shapes {}+{} and {}+{}",
            a.head_len(),
            a.tail_len(),
            b.head_len(),
            b.tail_len()
        )));
    }
    let cut = rng.random_range(0..a.len());
    Ok(crossover_at(a, b, cut))
}

pub fn crossover_at(a: &Gene, b: &Gene, cut: usize) -> (Gene, Gene) {
    let (sa, sb) = (a.symbols(), b.symbols());
    let c1 = [&sa[..cut], &sb[cut..]].concat();
    let c2 = [&sb[..cut], &sa[cut..]].concat();
    (Gene::from_parts(c1, a.head_len()), Gene::from_parts(c2, a.head_len()))
}

/// Copies `segment` into the head at `at`, shifting the rest of the head
/// right and dropping what falls off its end.
fn insert_into_head(gene: &Gene, at: usize, segment: &[crate::expr::Symbol]) -> Gene {
    let h = gene.head_len();
    let mut head = Vec::with_capacity(h + segment.len());
    head.extend_from_slice(&gene.head()[..at]);
    head.extend_from_slice(segment);
    head.extend_from_slice(&gene.head()[at..]);
    head.truncate(h);
    head.extend_from_slice(gene.tail());
    Gene::from_parts(head, h)
}

fn segment_len<R: Rng + ?Sized>(rng: &mut R, max_len: usize, start: usize, gene_len: usize) -> usize {
    rng.random_range(1..=max_len).min(gene_len - start)
}

/// IS transposition: a random segment is copied to a random head position
/// other than the root.
pub fn is_transposition<R: Rng + ?Sized>(gene: &Gene, rng: &mut R, max_len: usize) -> Gene {
    let h = gene.head_len();
    if h < 2 {
        return gene.clone();
    }
    let start = rng.random_range(0..gene.len());
    let len = segment_len(rng, max_len, start, gene.len());
    let target = rng.random_range(1..h);
    let segment = gene.symbols()[start..start + len].to_vec();
    insert_into_head(gene, target, &segment)
}

/// RIS transposition: scanning the head from a random point, the first
/// function found starts a segment that is copied to the root. Genes with
/// no function past that point are returned unchanged.
pub fn ris_transposition<R: Rng + ?Sized>(gene: &Gene, rng: &mut R, max_len: usize) -> Gene {
    let h = gene.head_len();
    let from = rng.random_range(0..h);
    let Some(offset) = gene.head()[from..].iter().position(|s| s.is_function()) else {
        return gene.clone();
    };
    let start = from + offset;
    let len = segment_len(rng, max_len, start, gene.len());
    let segment = gene.symbols()[start..start + len].to_vec();
    insert_into_head(gene, 0, &segment)
}

/// Reverses a random segment of the head.
pub fn inversion<R: Rng + ?Sized>(gene: &Gene, rng: &mut R) -> Gene {
    let h = gene.head_len();
    let start = rng.random_range(0..h);
    let end = rng.random_range(start..h);
    invert_head(gene, start, end)
}

/// Reverses head positions `start..=end` (0-based).
pub fn invert_head(gene: &Gene, start: usize, end: usize) -> Gene {
    assert!(start <= end && end < gene.head_len());
    let mut symbols = gene.symbols().to_vec();
    symbols[start..=end].reverse();
    Gene::from_parts(symbols, gene.head_len())
}

#[derive(Clone, Debug, PartialEq)]
pub struct GepResult {
    pub gene: Gene,
    pub fitness: f64,
    /// Best-ever training fitness after each generation.
    pub history: Vec<f64>,
    pub progress: Vec<GenerationRecord>,
    pub evaluations: usize,
}

fn tournament<R: Rng + ?Sized>(rng: &mut R, fitness: &[f64], size: usize) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.random_range(0..fitness.len());
        if fitness[c] < fitness[best] {
            best = c;
        }
    }
    best
}

fn fitness_of(genes: &[Gene], data: &Dataset) -> Vec<f64> {
    genes
        .par_iter()
        .map(|g| mse_fitness(&decode(g), data).expect("dataset checked non-empty"))
        .collect()
}

/// Generational GEP minimizing training MSE. With zero generations the best
/// random individual is returned.
pub fn gep_evolve(params: &GepParams, data: &Dataset, alphabet: &Alphabet, seed: u64) -> Result<GepResult> {
    params.validate()?;
    if data.is_empty() {
        return Err(Error::Usage("GEP needs a non-empty training set".into()));
    }
    if alphabet.n_terminals() != data.n_vars() {
        return Err(Error::Dimension {
            expected: data.n_vars(),
            found: alphabet.n_terminals(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.pop_size;
    let mut pop: Vec<Gene> = (0..n)
        .map(|_| random_gene(&mut rng, params.head_len, alphabet))
        .collect();
    let mut fitness = fitness_of(&pop, data);
    let mut evaluations = n;
    let mut best_i = crate::optim::argmin(&fitness);
    let mut best = (pop[best_i].clone(), fitness[best_i]);
    let mut history = Vec::with_capacity(params.generations);
    let mut progress = Vec::with_capacity(params.generations);

    for generation in 1..=params.generations {
        let mut ranked: Vec<usize> = (0..n).collect();
        ranked.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
        let elites: Vec<usize> = ranked.into_iter().take(params.elitism.min(n)).collect();

        let mut next: Vec<Gene> = (0..n)
            .map(|_| pop[tournament(&mut rng, &fitness, params.tournament_size)].clone())
            .collect();
        for g in next.iter_mut() {
            *g = mutate(g, &mut rng, params.mutation_rate, alphabet);
            if rng.random_bool(params.inversion_rate) {
                *g = inversion(g, &mut rng);
            }
            if rng.random_bool(params.is_rate) {
                *g = is_transposition(g, &mut rng, params.transposon_max_len);
            }
            if rng.random_bool(params.ris_rate) {
                *g = ris_transposition(g, &mut rng, params.transposon_max_len);
            }
        }
        for pair in next.chunks_exact_mut(2) {
            if rng.random_bool(params.crossover_rate) {
                let (a, b) = one_point_crossover(&pair[0], &pair[1], &mut rng)?;
                pair[0] = a;
                pair[1] = b;
            }
        }

        let mut next_fitness = fitness_of(&next, data);
        evaluations += n;

        let mut worst: Vec<usize> = (0..n).collect();
        worst.sort_by(|&a, &b| next_fitness[b].total_cmp(&next_fitness[a]));
        for (&e, &w) in elites.iter().zip(&worst) {
            if fitness[e] < next_fitness[w] {
                next[w] = pop[e].clone();
                next_fitness[w] = fitness[e];
            }
        }
        pop = next;
        fitness = next_fitness;

        best_i = crate::optim::argmin(&fitness);
        if fitness[best_i] < best.1 {
            best = (pop[best_i].clone(), fitness[best_i]);
        }
        history.push(best.1);
        progress.push(GenerationRecord {
            generation,
            best: best.1,
            mean: crate::optim::mean(&fitness),
            sigma: None,
        });
    }

    Ok(GepResult {
        gene: best.0,
        fitness: best.1,
        history,
        progress,
        evaluations,
    })
}
