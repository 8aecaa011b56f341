//! Trials, suites and result files.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{self, BenchmarkSpec, CsvSource, DataSplit, TargetColumn};
use crate::config::SuiteConfig;
use crate::encoder::{make_fixed_weights, Encoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::expr::{mse_fitness, Alphabet, Dataset, WORST_FITNESS};
use crate::gep::{gep_evolve, GepParams};
use crate::kexpr::decode;
use crate::optim::{
    cmaes_minimize, ga_minimize, pso_minimize, CmaesParams, GaParams, Objective, OptimizerRun, PsoParams,
};
use crate::seed;
use crate::stats::{median_and_std, rank_table, wilcoxon_rank_sum, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GaNeep,
    PsoNeep,
    CmaesNeep,
    Gep,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::GaNeep, Method::PsoNeep, Method::CmaesNeep, Method::Gep];

    /// Command-line and file name.
    pub fn name(self) -> &'static str {
        match self {
            Method::GaNeep => "ga-neep",
            Method::PsoNeep => "pso-neep",
            Method::CmaesNeep => "cmaes-neep",
            Method::Gep => "gep",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::GaNeep => "GA-NEEP",
            Method::PsoNeep => "PSO-NEEP",
            Method::CmaesNeep => "CMAES-NEEP",
            Method::Gep => "GEP",
        }
    }

    pub fn is_neep(self) -> bool {
        self != Method::Gep
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key || m.name().replace('-', "") == key)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!(
                    "unknown method `{s}`{}; valid methods: {}",
                    suggestion(s, &names),
                    names.join(", ")
                ))
            })
    }
}

/// `" (did you mean `x`?)"` for the closest candidate, or empty.
pub fn suggestion(input: &str, candidates: &[&str]) -> String {
    let input = input.to_ascii_lowercase();
    candidates
        .iter()
        .map(|c| (strsim::jaro_winkler(&input, &c.to_ascii_lowercase()), c))
        .filter(|(score, _)| *score > 0.75)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| format!(" (did you mean `{c}`?)"))
        .unwrap_or_default()
}

/// Looks up a benchmark, with a suggestion on failure.
pub fn find_benchmark(name: &str) -> Result<&'static BenchmarkSpec> {
    bench::find(name).ok_or_else(|| {
        let names: Vec<&str> = bench::registry().iter().map(|b| b.name).collect();
        Error::Config(format!(
            "unknown benchmark `{name}`{}; valid benchmarks: {}",
            suggestion(name, &names),
            names.join(", ")
        ))
    })
}

/// Everything one (method, benchmark) cell needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub benchmark: String,
    pub trials: usize,
    pub seed: u64,
    pub pop_size: usize,
    pub generations: usize,
    pub encoder: EncoderConfig,
    pub ga: GaParams,
    pub pso: PsoParams,
    pub cmaes: CmaesParams,
    pub gep: GepParams,
    /// Draw the fixed hidden weights once per master seed instead of per trial.
    pub shared_fixed_weights: bool,
    pub data: Option<std::path::PathBuf>,
    pub target_column: TargetColumn,
}

impl RunConfig {
    /// Reference settings for one method on one benchmark.
    pub fn new(method: Method, benchmark: &str) -> Self {
        Self {
            method,
            benchmark: benchmark.to_string(),
            trials: 50,
            seed: 0,
            pop_size: 100,
            generations: 500,
            encoder: EncoderConfig::default(),
            ga: GaParams::default(),
            pso: PsoParams::default(),
            cmaes: CmaesParams::default(),
            gep: GepParams::default(),
            shared_fixed_weights: false,
            data: None,
            target_column: TargetColumn::Last,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        let spec = find_benchmark(&self.benchmark)?;
        if !spec.is_synthetic() && self.data.is_none() {
            return Err(Error::Config(format!(
                "{} is data-backed; pass a CSV file with --data",
                spec.name
            )));
        }
        self.optimizer_run(0).validate()?;
        self.encoder.validate()?;
        self.gep_params().validate()
    }

    fn optimizer_run(&self, seed: u64) -> OptimizerRun {
        OptimizerRun {
            population_size: self.pop_size,
            generations: self.generations,
            seed,
            init_range: self.encoder.init_weight_range,
        }
    }

    fn gep_params(&self) -> GepParams {
        GepParams {
            pop_size: self.pop_size,
            generations: self.generations,
            ..self.gep.clone()
        }
    }

    /// Seed of trial `index`; shared by every method so trials with the
    /// same index see the same data.
    pub fn trial_seed(&self, index: usize) -> u64 {
        seed::derive(self.seed, index as u64)
    }

    fn datasets(&self, trial_seed: u64) -> Result<DataSplit> {
        let spec = find_benchmark(&self.benchmark)?;
        let csv = self.data.as_deref().map(|path| CsvSource {
            path,
            target: self.target_column.clone(),
        });
        spec.datasets(seed::derive(trial_seed, 0), csv.as_ref())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialResult {
    pub method: Method,
    pub benchmark: String,
    pub trial: usize,
    pub seed: u64,
    pub gene: String,
    pub expression: String,
    pub train_mse: f64,
    pub test_mse: f64,
    /// Best-so-far training MSE after each generation.
    pub trace: Vec<f64>,
    pub evaluations: usize,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Training objective of the neuro-encoded methods: genome to gene to
/// tree to MSE.
pub struct NeepObjective<'a> {
    pub encoder: &'a Encoder,
    pub data: &'a Dataset,
}

impl Objective for NeepObjective<'_> {
    fn dimension(&self) -> usize {
        self.encoder.genome_len()
    }

    fn evaluate(&self, genome: &[f64]) -> f64 {
        match self.encoder.generate(genome) {
            Ok(gene) => mse_fitness(&decode(&gene), self.data).unwrap_or(WORST_FITNESS),
            Err(_) => WORST_FITNESS,
        }
    }
}

pub fn run_trial(config: &RunConfig, trial_index: usize) -> Result<TrialResult> {
    let start = Instant::now();
    let spec = find_benchmark(&config.benchmark)?;
    let alphabet = spec.alphabet();
    let trial_seed = config.trial_seed(trial_index);
    let split = config.datasets(trial_seed)?;
    let optimizer_seed = seed::derive(trial_seed, 2);

    let (gene, trace, evaluations) = if config.method == Method::Gep {
        let result = gep_evolve(&config.gep_params(), &split.train, &alphabet, optimizer_seed)?;
        (result.gene, result.history, result.evaluations)
    } else {
        let weight_seed = if config.shared_fixed_weights {
            seed::derive(config.seed, u64::MAX)
        } else {
            seed::derive(trial_seed, 1)
        };
        let weights = make_fixed_weights(&config.encoder, weight_seed);
        let encoder = Encoder::new(&weights, config.encoder.clone(), alphabet.clone())?;
        let objective = NeepObjective {
            encoder: &encoder,
            data: &split.train,
        };
        let run = config.optimizer_run(optimizer_seed);
        let best = match config.method {
            Method::GaNeep => ga_minimize(&objective, &run, &config.ga)?,
            Method::PsoNeep => pso_minimize(&objective, &run, &config.pso)?,
            Method::CmaesNeep => cmaes_minimize(&objective, &run, &config.cmaes)?,
            Method::Gep => unreachable!(),
        };
        (encoder.generate(&best.vector)?, best.history, best.evaluations)
    };

    let tree = decode(&gene);
    let result = TrialResult {
        method: config.method,
        benchmark: spec.name.to_string(),
        trial: trial_index,
        seed: trial_seed,
        gene: gene.to_text(&alphabet),
        expression: alphabet.format_tree(&tree),
        train_mse: mse_fitness(&tree, &split.train)?,
        test_mse: mse_fitness(&tree, &split.test)?,
        trace,
        evaluations,
        wall_time: start.elapsed(),
    };
    log::info!(
        "{} {} trial {}: test MSE {} ({:.1?})",
        result.method,
        result.benchmark,
        trial_index,
        result.test_mse,
        result.wall_time
    );
    Ok(result)
}

/// All trials of one (method, benchmark) pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellResult {
    pub method: Method,
    pub benchmark: String,
    pub trials: Vec<TrialResult>,
    /// First failure, if any trial failed.
    pub error: Option<String>,
}

impl CellResult {
    pub fn test_errors(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.test_mse).collect()
    }

    /// Mean over trials of the best-so-far training MSE per generation.
    pub fn mean_trace(&self) -> Vec<f64> {
        let len = self.trials.iter().map(|t| t.trace.len()).min().unwrap_or(0);
        (0..len)
            .map(|g| self.trials.iter().map(|t| t.trace[g]).sum::<f64>() / self.trials.len() as f64)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: Method,
    pub benchmark: String,
    pub median: f64,
    pub std: f64,
    /// Rank among the methods on this benchmark; 1 = lowest median.
    pub rank: usize,
    /// Rank-sum verdict against the baseline; empty for the baseline itself
    /// or when it is absent.
    pub verdict: Option<Verdict>,
    pub p_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub cells: Vec<CellResult>,
    pub summary: Vec<SummaryRow>,
    /// Average rank per method over the benchmarks they were all run on.
    pub average_ranks: Vec<(Method, f64)>,
}

/// Runs every cell on a pool of `workers` threads (0 = all cores).
pub fn run_suite(configs: &[RunConfig], workers: usize, baseline: Method, alpha: f64) -> Result<SuiteResult> {
    for c in configs {
        c.validate()?;
    }
    let jobs: Vec<(usize, usize)> = configs
        .iter()
        .enumerate()
        .flat_map(|(c, cfg)| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Result<TrialResult>> =
        pool.install(|| jobs.par_iter().map(|&(c, t)| run_trial(&configs[c], t)).collect());

    let mut cells: Vec<CellResult> = configs
        .iter()
        .map(|c| CellResult {
            method: c.method,
            benchmark: find_benchmark(&c.benchmark).map_or(c.benchmark.clone(), |b| b.name.to_string()),
            trials: Vec::with_capacity(c.trials),
            error: None,
        })
        .collect();
    for (&(c, t), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(r) => cells[c].trials.push(r),
            Err(e) => {
                log::error!("{} {} trial {t} failed: {e}", cells[c].method, cells[c].benchmark);
                cells[c].error.get_or_insert(e.to_string());
            }
        }
    }
    let (summary, average_ranks) = summarize(&cells, baseline, alpha)?;
    Ok(SuiteResult {
        cells,
        summary,
        average_ranks,
    })
}

type Summary = (Vec<SummaryRow>, Vec<(Method, f64)>);

fn summarize(cells: &[CellResult], baseline: Method, alpha: f64) -> Result<Summary> {
    let done: Vec<&CellResult> = cells.iter().filter(|c| !c.trials.is_empty()).collect();
    let mut benchmarks: Vec<&str> = Vec::new();
    let mut methods: Vec<Method> = Vec::new();
    for c in &done {
        if !benchmarks.contains(&c.benchmark.as_str()) {
            benchmarks.push(&c.benchmark);
        }
        if !methods.contains(&c.method) {
            methods.push(c.method);
        }
    }

    let mut rows = Vec::new();
    for &b in &benchmarks {
        let here: Vec<&&CellResult> = done.iter().filter(|c| c.benchmark == b).collect();
        let medians: Vec<f64> = here
            .iter()
            .map(|c| median_and_std(&c.test_errors()).map(|m| m.0))
            .collect::<Result<_>>()?;
        let ranks = crate::stats::rank_values(&medians);
        let reference = here.iter().find(|c| c.method == baseline);
        for (c, rank) in here.iter().zip(ranks) {
            let (median, std) = median_and_std(&c.test_errors())?;
            let test = match reference {
                Some(r) if c.method != baseline && c.trials.len() >= 3 && r.trials.len() >= 3 => {
                    Some(wilcoxon_rank_sum(&c.test_errors(), &r.test_errors(), alpha)?)
                }
                _ => None,
            };
            rows.push(SummaryRow {
                method: c.method,
                benchmark: b.to_string(),
                median,
                std,
                rank,
                verdict: test.map(|t| t.verdict),
                p_value: test.map(|t| t.p_value),
            });
        }
    }

    // Average ranks over benchmarks covered by every method.
    let complete: Vec<&str> = benchmarks
        .iter()
        .copied()
        .filter(|&b| {
            methods
                .iter()
                .all(|&m| done.iter().any(|c| c.method == m && c.benchmark == b))
        })
        .collect();
    let medians: Vec<Vec<f64>> = methods
        .iter()
        .map(|&m| {
            complete
                .iter()
                .map(|&b| rows.iter().find(|r| r.method == m && r.benchmark == b).unwrap().median)
                .collect()
        })
        .collect();
    let table = rank_table(&medians);
    Ok((rows, methods.into_iter().zip(table.average).collect()))
}

/// Column documentation for the files written by [`write_results`].
pub const SUMMARY_COLUMNS: [&str; 7] = ["method", "benchmark", "median", "std", "rank", "verdict", "p_value"];
pub const TRACE_COLUMNS: [&str; 4] = ["method", "benchmark", "generation", "mean_best_mse"];
pub const TRIAL_COLUMNS: [&str; 9] = [
    "method",
    "benchmark",
    "trial",
    "seed",
    "train_mse",
    "test_mse",
    "evaluations",
    "expression",
    "gene",
];

/// Writes `summary.csv`, `trace.csv`, `trials.csv`, `summary.json` and the
/// effective `config.toml` into `dir`. Wall times are left out so repeated
/// runs give identical files.
pub fn write_results(dir: &Path, result: &SuiteResult, config: &SuiteConfig) -> Result<()> {
    fs::create_dir_all(dir)?;

    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(SUMMARY_COLUMNS)?;
    for r in &result.summary {
        w.write_record([
            r.method.name().to_string(),
            r.benchmark.clone(),
            r.median.to_string(),
            r.std.to_string(),
            r.rank.to_string(),
            r.verdict.map(|v| v.to_string()).unwrap_or_default(),
            r.p_value.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("trace.csv"))?;
    w.write_record(TRACE_COLUMNS)?;
    for cell in result.cells.iter().filter(|c| !c.trials.is_empty()) {
        for (g, v) in cell.mean_trace().iter().enumerate() {
            w.write_record([
                cell.method.name(),
                &cell.benchmark,
                &(g + 1).to_string(),
                &v.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("trials.csv"))?;
    w.write_record(TRIAL_COLUMNS)?;
    for t in result.cells.iter().flat_map(|c| &c.trials) {
        w.write_record([
            t.method.name().to_string(),
            t.benchmark.clone(),
            t.trial.to_string(),
            t.seed.to_string(),
            t.train_mse.to_string(),
            t.test_mse.to_string(),
            t.evaluations.to_string(),
            t.expression.clone(),
            t.gene.clone(),
        ])?;
    }
    w.flush()?;

    let json = serde_json::json!({
        "summary": result.summary,
        "average_ranks": result.average_ranks,
        "errors": result
            .cells
            .iter()
            .filter_map(|c| c.error.as_ref().map(|e| serde_json::json!({
                "method": c.method,
                "benchmark": c.benchmark,
                "error": e,
            })))
            .collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&json).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join("summary.json"), text + "\n")?;

    fs::write(dir.join("config.toml"), config.to_toml()?)?;
    Ok(())
}

/// Convenience for tests and scripts: a single alphabet-checked dataset
/// split for a benchmark.
pub fn benchmark_data(name: &str, seed: u64) -> Result<(Alphabet, DataSplit)> {
    let spec = find_benchmark(name)?;
    Ok((spec.alphabet(), spec.datasets(seed, None)?))
}
