//! Command-line interface. The binary is a thin wrapper around [`main_with`].

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::bench::{self, Source};
use crate::config::SuiteConfig;
use crate::error::{Error, Result};
use crate::experiment::{find_benchmark, run_suite, write_results, Method, SuiteResult};
use crate::expr::{Alphabet, Func};
use crate::kexpr::{decode, effective_length, Gene};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "NEEP_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "neep",
    version,
    about = "Neuro-encoded expression programming for symbolic regression"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List benchmark problems, optionally filtered by name.
    List { filter: Option<String> },
    /// Run methods on benchmarks and write result tables.
    Run(RunArgs),
    /// Decode a gene written as whitespace-separated symbols.
    Decode(DecodeArgs),
    /// Print the reference configuration file.
    Config,
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Methods (comma-separated or repeated): ga-neep, pso-neep, cmaes-neep, gep.
    #[arg(long = "method", value_delimiter = ',')]
    pub methods: Vec<String>,
    /// Benchmarks (comma-separated or repeated), see `neep list`.
    #[arg(long = "problem", value_delimiter = ',')]
    pub problems: Vec<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Population size.
    #[arg(long)]
    pub pop: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// CSV file for Energy or Concrete.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Target column of the CSV file: `last`, a 0-based index, or a header name.
    #[arg(long)]
    pub target_column: Option<String>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = "neep-results")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Gene text, e.g. "sqrt + - * * x x sin x y y y x y x x y".
    pub gene: String,
    /// Variable names, comma-separated.
    #[arg(long, default_value = "x,y", value_delimiter = ',')]
    pub vars: Vec<String>,
    /// Function set, comma-separated; defaults to every supported function.
    #[arg(long, value_delimiter = ',')]
    pub functions: Vec<String>,
    /// Head length; inferred from the gene length when omitted.
    #[arg(long)]
    pub head: Option<usize>,
}

pub fn cmd_list(filter: Option<&str>, out: &mut dyn Write) -> Result<usize> {
    let specs = bench::list(filter);
    writeln!(
        out,
        "{:<10} {:>4}  {:<3} {:<28} {:<28} formula",
        "name", "vars", "set", "train", "test"
    )?;
    for s in &specs {
        let (train, test) = match s.source {
            Source::Synthetic { train, test, .. } => (train.describe(), test.describe()),
            Source::Csv { .. } => ("CSV, 70% split".into(), "CSV, 30% split".into()),
        };
        writeln!(
            out,
            "{:<10} {:>4}  {:<3} {:<28} {:<28} {}",
            s.name,
            s.n_vars,
            s.function_set.label(),
            train,
            test,
            s.formula
        )?;
    }
    Ok(specs.len())
}

/// Effective configuration: file (or defaults) with flag overrides.
pub fn effective_config(args: &RunArgs) -> Result<SuiteConfig> {
    let mut cfg = match &args.config {
        Some(path) => SuiteConfig::load(path)?,
        None => SuiteConfig::default(),
    };
    let e = &mut cfg.experiment;
    if !args.methods.is_empty() {
        e.methods = args
            .methods
            .iter()
            .map(|m| m.parse())
            .collect::<Result<Vec<Method>>>()?;
    }
    if !args.problems.is_empty() {
        e.benchmarks = args
            .problems
            .iter()
            .map(|p| find_benchmark(p).map(|b| b.name.to_string()))
            .collect::<Result<_>>()?;
    }
    if let Some(v) = args.trials {
        e.trials = v;
    }
    if let Some(v) = args.seed {
        e.seed = v;
    }
    if let Some(v) = args.pop {
        e.pop_size = v;
    }
    if let Some(v) = args.generations {
        e.generations = v;
    }
    if let Some(v) = args.workers {
        e.workers = v;
    }
    if let Some(v) = &args.data {
        e.data = Some(v.clone());
    }
    if let Some(v) = &args.target_column {
        e.target_column = v.clone();
    }
    Ok(cfg)
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<SuiteResult> {
    let cfg = effective_config(args)?;
    let cells = cfg.run_configs()?;
    let e = &cfg.experiment;
    let result = run_suite(&cells, e.workers, e.baseline, e.alpha)?;
    write_results(&args.out, &result, &cfg)?;

    writeln!(
        out,
        "{:<11} {:<10} {:>11} {:>11} {:>4} verdict",
        "method", "benchmark", "median", "std", "rank"
    )?;
    for r in &result.summary {
        writeln!(
            out,
            "{:<11} {:<10} {:>11.3e} {:>11.3e} {:>4} {}",
            r.method.name(),
            r.benchmark,
            r.median,
            r.std,
            r.rank,
            r.verdict.map(|v| v.to_string()).unwrap_or_default()
        )?;
    }
    for (m, avg) in &result.average_ranks {
        writeln!(out, "average rank {:<11} {avg:.2}", m.name())?;
    }
    writeln!(out, "results written to {}", args.out.display())?;

    if let Some(c) = result.cells.iter().find(|c| c.error.is_some()) {
        return Err(Error::Usage(format!(
            "{} on {} failed: {}",
            c.method,
            c.benchmark,
            c.error.as_deref().unwrap_or_default()
        )));
    }
    Ok(result)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub expression: String,
    pub effective_length: usize,
    pub head_len: usize,
}

pub fn cmd_decode(args: &DecodeArgs, out: &mut dyn Write) -> Result<Decoded> {
    let functions = if args.functions.is_empty() {
        Func::ALL.to_vec()
    } else {
        args.functions
            .iter()
            .map(|f| Func::from_name(f.trim()).ok_or_else(|| Error::Alphabet(format!("unknown function `{f}`"))))
            .collect::<Result<_>>()?
    };
    let names = args.vars.iter().map(|v| v.trim().to_string()).collect();
    let alphabet = Alphabet::with_names(functions, names)?;
    let gene = Gene::parse(&args.gene, args.head, &alphabet)?;
    let decoded = Decoded {
        expression: alphabet.format_tree(&decode(&gene)),
        effective_length: effective_length(&gene),
        head_len: gene.head_len(),
    };
    writeln!(out, "{}", decoded.expression)?;
    writeln!(
        out,
        "effective length {} of {} (head {})",
        decoded.effective_length,
        gene.len(),
        decoded.head_len
    )?;
    Ok(decoded)
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::List { filter } => cmd_list(filter.as_deref(), out).map(drop),
        Command::Run(args) => cmd_run(args, out).map(drop),
        Command::Decode(args) => cmd_decode(args, out).map(drop),
        Command::Config => {
            out.write_all(SuiteConfig::reference_toml().as_bytes())?;
            Ok(())
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 on success, 1 for user errors, 2 for internal errors.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_user_error() {
                1
            } else {
                2
            }
        }
    }
}
