//! Recurrent gene generator.
//!
//! A fully connected recurrent layer with fixed, sparse hidden-to-hidden
//! weights runs without external input. Its trainable part is the output
//! layer: one neuron per alphabet symbol plus a position neuron. Every
//! `time_steps` recurrent steps the outputs are read; the strongest symbol
//! neuron picks a symbol and the position neuron picks where it is inserted
//! into the growing string. After `h + t` insertions the string is a valid
//! K-expression gene.
//!
//! All activations are `exp(-x^2)`. The hidden state starts at zero and
//! persists across insertions.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Alphabet, Symbol};
use crate::kexpr::{tail_len, Gene};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub n_hidden: usize,
    pub time_steps: usize,
    /// Fraction of hidden-to-hidden weights forced to zero.
    pub sparsity: f64,
    /// Range for initial output weights (the genome).
    pub init_weight_range: (f64, f64),
    /// Range for the nonzero fixed hidden weights.
    pub fixed_weight_range: (f64, f64),
    pub head_len: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            n_hidden: 40,
            time_steps: 10,
            sparsity: 0.5,
            init_weight_range: (-2.0, 2.0),
            fixed_weight_range: (-1.0, 1.0),
            head_len: 30,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_hidden == 0 {
            return Err(Error::Config("n_hidden must be at least 1".into()));
        }
        if self.time_steps == 0 {
            return Err(Error::Config("time_steps must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(Error::Config(format!("sparsity {} is outside [0, 1]", self.sparsity)));
        }
        if self.head_len == 0 {
            return Err(Error::Config("head_len must be at least 1".into()));
        }
        for (name, (lo, hi)) in [
            ("init_weight_range", self.init_weight_range),
            ("fixed_weight_range", self.fixed_weight_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("{name} [{lo}, {hi}] is not a valid interval")));
            }
        }
        Ok(())
    }

    /// Output neurons: one per symbol plus the position neuron.
    pub fn n_outputs(&self, alphabet: &Alphabet) -> usize {
        alphabet.len() + 1
    }

    pub fn genome_len(&self, alphabet: &Alphabet) -> usize {
        self.n_outputs(alphabet) * self.n_hidden
    }

    pub fn gene_len(&self, alphabet: &Alphabet) -> usize {
        self.head_len + tail_len(self.head_len, alphabet)
    }
}

/// `exp(-x^2)`; in `(0, 1]` up to floating-point underflow for `|x| > 26`.
#[inline]
pub fn gaussian_activation(x: f64) -> f64 {
    (-x * x).exp()
}

/// Hidden-to-hidden weights shared by every individual of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedHiddenWeights {
    n: usize,
    matrix: Vec<f64>,
    seed: u64,
}

impl FixedHiddenWeights {
    /// Row-major `n x n` matrix, for tests and replays.
    pub fn from_matrix(n: usize, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                found: matrix.len(),
            });
        }
        Ok(Self { n, matrix, seed: 0 })
    }

    pub fn n_hidden(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }

    pub fn zero_count(&self) -> usize {
        self.matrix.iter().filter(|&&w| w == 0.0).count()
    }
}

/// Draws the fixed weights: exactly `round(sparsity * n^2)` zeros at
/// uniformly chosen positions, the rest uniform on `fixed_weight_range`.
pub fn make_fixed_weights(config: &EncoderConfig, seed: u64) -> FixedHiddenWeights {
    let n = config.n_hidden;
    let total = n * n;
    let zeros = ((config.sparsity * total as f64).round() as usize).min(total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; total];
    for i in index::sample(&mut rng, total, zeros) {
        keep[i] = false;
    }
    let (lo, hi) = config.fixed_weight_range;
    let matrix = keep
        .into_iter()
        .map(|k| {
            if !k {
                return 0.0;
            }
            loop {
                let w = rng.random_range(lo..hi);
                if w != 0.0 {
                    break w;
                }
            }
        })
        .collect();
    FixedHiddenWeights { n, matrix, seed }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderState {
    pub hidden: Vec<f64>,
}

impl EncoderState {
    pub fn zeros(n_hidden: usize) -> Self {
        Self {
            hidden: vec![0.0; n_hidden],
        }
    }
}

/// One recurrent update `h'_i = f(sum_j A_ij h_j)`.
pub fn step(state: &EncoderState, weights: &FixedHiddenWeights) -> EncoderState {
    assert_eq!(state.hidden.len(), weights.n, "hidden size mismatch");
    let hidden = weights
        .matrix
        .chunks_exact(weights.n)
        .map(|row| gaussian_activation(dot(row, &state.hidden)))
        .collect();
    EncoderState { hidden }
}

/// Output activations `o_j = f(sum_k W_jk h_k)` for a row-major genome.
pub fn read_outputs(hidden: &[f64], genome: &[f64]) -> Result<Vec<f64>> {
    let n = hidden.len();
    if n == 0 || !genome.len().is_multiple_of(n) {
        return Err(Error::Config(format!(
            "genome of length {} does not fit {n} hidden neurons",
            genome.len()
        )));
    }
    Ok(genome
        .chunks_exact(n)
        .map(|row| gaussian_activation(dot(row, hidden)))
        .collect())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Head,
    Tail,
}

impl Phase {
    /// Head while the string is shorter than the head length.
    pub fn for_length(current_len: usize, head_len: usize) -> Self {
        if current_len < head_len {
            Phase::Head
        } else {
            Phase::Tail
        }
    }
}

/// `floor(x + 0.5)`
fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// 1-based insertion index for the next symbol.
///
/// Head: `round(i_out * L + 1)` clamped to `[1, L + 1]`.
/// Tail: `round(i_out * (L - h + 1) + h)` clamped to `[h + 1, L + 1]`.
///
/// `i_out == 0` is accepted as the underflowed limit of the activation.
pub fn insertion_position(i_out: f64, current_len: usize, head_len: usize, phase: Phase) -> usize {
    assert!((0.0..=1.0).contains(&i_out), "position rate {i_out} outside (0, 1]");
    let l = current_len as f64;
    match phase {
        Phase::Head => round_half_up(i_out * l + 1.0).clamp(1, current_len + 1),
        Phase::Tail => {
            debug_assert!(current_len >= head_len);
            let h = head_len as f64;
            round_half_up(i_out * (l - h + 1.0) + h).clamp(head_len + 1, current_len + 1)
        }
    }
}

/// Argmax over symbol neurons; the tail only considers terminals. Ties go
/// to the lowest alphabet index.
pub fn select_symbol(outputs: &[f64], phase: Phase, alphabet: &Alphabet) -> Symbol {
    let nf = alphabet.n_functions();
    let range = match phase {
        Phase::Head => 0..alphabet.len(),
        Phase::Tail => nf..alphabet.len(),
    };
    let mut best = range.start;
    for i in range {
        if outputs[i] > outputs[best] {
            best = i;
        }
    }
    alphabet.symbol(best).expect("index in range")
}

fn insert_next(gene: &mut Vec<Symbol>, outputs: &[f64], head_len: usize, alphabet: &Alphabet) {
    let phase = Phase::for_length(gene.len(), head_len);
    let symbol = select_symbol(outputs, phase, alphabet);
    let i_out = outputs[alphabet.len()];
    let p = insertion_position(i_out, gene.len(), head_len, phase);
    gene.insert(p - 1, symbol);
}

fn check_genome(genome: &[f64], config: &EncoderConfig, alphabet: &Alphabet) -> Result<()> {
    let expected = config.genome_len(alphabet);
    if genome.len() != expected {
        return Err(Error::Dimension {
            expected,
            found: genome.len(),
        });
    }
    Ok(())
}

/// Generates a gene by running the network step by step.
pub fn generate_gene(
    genome: &[f64],
    weights: &FixedHiddenWeights,
    config: &EncoderConfig,
    alphabet: &Alphabet,
) -> Result<Gene> {
    generate_gene_counted(genome, weights, config, alphabet).map(|(g, _)| g)
}

fn generate_gene_counted(
    genome: &[f64],
    weights: &FixedHiddenWeights,
    config: &EncoderConfig,
    alphabet: &Alphabet,
) -> Result<(Gene, usize)> {
    check_genome(genome, config, alphabet)?;
    if weights.n_hidden() != config.n_hidden {
        return Err(Error::Dimension {
            expected: config.n_hidden,
            found: weights.n_hidden(),
        });
    }
    let total = config.gene_len(alphabet);
    let mut state = EncoderState::zeros(config.n_hidden);
    let mut steps = 0;
    let mut symbols = Vec::with_capacity(total);
    for _ in 0..total {
        for _ in 0..config.time_steps {
            state = step(&state, weights);
            steps += 1;
        }
        let outputs = read_outputs(&state.hidden, genome)?;
        insert_next(&mut symbols, &outputs, config.head_len, alphabet);
    }
    Ok((Gene::from_parts(symbols, config.head_len), steps))
}

/// Gene generator with the hidden trajectory precomputed.
///
/// The recurrent layer has no input and its weights are fixed, so the
/// hidden state read at each insertion is the same for every genome. Only
/// the output layer is evaluated per call.
#[derive(Clone, Debug)]
pub struct Encoder {
    config: EncoderConfig,
    alphabet: Alphabet,
    /// Hidden state at each insertion, `gene_len x n_hidden`.
    trajectory: Vec<f64>,
}

impl Encoder {
    pub fn new(weights: &FixedHiddenWeights, config: EncoderConfig, alphabet: Alphabet) -> Result<Self> {
        config.validate()?;
        if weights.n_hidden() != config.n_hidden {
            return Err(Error::Dimension {
                expected: config.n_hidden,
                found: weights.n_hidden(),
            });
        }
        let total = config.gene_len(&alphabet);
        let mut state = EncoderState::zeros(config.n_hidden);
        let mut trajectory = Vec::with_capacity(total * config.n_hidden);
        for _ in 0..total {
            for _ in 0..config.time_steps {
                state = step(&state, weights);
            }
            trajectory.extend_from_slice(&state.hidden);
        }
        Ok(Self {
            config,
            alphabet,
            trajectory,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn genome_len(&self) -> usize {
        self.config.genome_len(&self.alphabet)
    }

    pub fn generate(&self, genome: &[f64]) -> Result<Gene> {
        check_genome(genome, &self.config, &self.alphabet)?;
        let n = self.config.n_hidden;
        let mut symbols = Vec::with_capacity(self.trajectory.len() / n);
        let mut outputs = vec![0.0; self.config.n_outputs(&self.alphabet)];
        for hidden in self.trajectory.chunks_exact(n) {
            for (o, row) in outputs.iter_mut().zip(genome.chunks_exact(n)) {
                *o = gaussian_activation(dot(row, hidden));
            }
            insert_next(&mut symbols, &outputs, self.config.head_len, &self.alphabet);
        }
        Ok(Gene::from_parts(symbols, self.config.head_len))
    }
}
