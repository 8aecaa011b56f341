//! Suite configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench;
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::experiment::{find_benchmark, Method, RunConfig};
use crate::gep::GepParams;
use crate::optim::{CmaesParams, GaParams, PsoParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub methods: Vec<Method>,
    pub benchmarks: Vec<String>,
    pub trials: usize,
    pub seed: u64,
    pub pop_size: usize,
    pub generations: usize,
    /// Worker threads; 0 uses every core. Does not affect results.
    pub workers: usize,
    /// Method the others are tested against.
    pub baseline: Method,
    pub alpha: f64,
    pub shared_fixed_weights: bool,
    /// CSV file for data-backed benchmarks.
    pub data: Option<PathBuf>,
    /// `last`, a 0-based column index, or a header name.
    pub target_column: String,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            benchmarks: bench::registry()
                .iter()
                .filter(|b| b.is_synthetic())
                .map(|b| b.name.to_string())
                .collect(),
            trials: 50,
            seed: 0,
            pop_size: 100,
            generations: 500,
            workers: 0,
            baseline: Method::Gep,
            alpha: 0.05,
            shared_fixed_weights: false,
            data: None,
            target_column: "last".into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub experiment: ExperimentSection,
    pub encoder: EncoderConfig,
    pub ga: GaParams,
    pub pso: PsoParams,
    pub cmaes: CmaesParams,
    /// Population size and generations come from `[experiment]`.
    pub gep: GepParams,
}

impl SuiteConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Ingest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text).map_err(|e| Error::Ingest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The default configuration as a commented TOML document.
    pub fn reference_toml() -> String {
        let body = SuiteConfig::default().to_toml().expect("default config serializes");
        format!(
            "# Reference configuration. Every key is optional.\n\
             # [experiment] data = \"file.csv\" is required for Energy and Concrete.\n\
             # [experiment] target_column: \"last\", a 0-based index, or a header name.\n\
             # [ga] mutation_rate defaults to 1 / genome length when omitted.\n\
             \n{body}"
        )
    }

    /// One run configuration per (method, benchmark) pair, methods outer.
    pub fn run_configs(&self) -> Result<Vec<RunConfig>> {
        let e = &self.experiment;
        if !(e.alpha > 0.0 && e.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", e.alpha)));
        }
        let target_column: bench::TargetColumn = e.target_column.parse().unwrap_or_default();
        let mut out = Vec::new();
        for &method in &e.methods {
            for name in &e.benchmarks {
                let spec = find_benchmark(name)?;
                let cfg = RunConfig {
                    method,
                    benchmark: spec.name.to_string(),
                    trials: e.trials,
                    seed: e.seed,
                    pop_size: e.pop_size,
                    generations: e.generations,
                    encoder: self.encoder.clone(),
                    ga: self.ga.clone(),
                    pso: self.pso.clone(),
                    cmaes: self.cmaes.clone(),
                    gep: self.gep.clone(),
                    shared_fixed_weights: e.shared_fixed_weights,
                    data: e.data.clone(),
                    target_column: target_column.clone(),
                };
                cfg.validate()?;
                out.push(cfg);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_round_trip() {
        let text = SuiteConfig::reference_toml();
        assert!(text.contains("[experiment]") && text.contains("[encoder]"));
        assert!(text.contains("n_hidden = 40"));
        assert!(text.contains("generations = 500"));
        assert_eq!(SuiteConfig::from_toml_str(&text).unwrap(), SuiteConfig::default());
        let cells = SuiteConfig::default().run_configs().unwrap();
        assert_eq!(cells.len(), 4 * 14);
    }

    #[test]
    fn partial_files_keep_defaults() {
        let cfg = SuiteConfig::from_toml_str(
            "[experiment]\nmethods = [\"cmaes-neep\"]\nbenchmarks = [\"nguyen6\"]\ntrials = 3\n[encoder]\nn_hidden = 8\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment.pop_size, 100);
        assert_eq!(cfg.encoder.time_steps, 10);
        let cells = cfg.run_configs().unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].benchmark, "Nguyen6");
        assert_eq!(cells[0].encoder.n_hidden, 8);
    }

    #[test]
    fn bad_files() {
        assert!(SuiteConfig::from_toml_str("[experiment]\ntrails = 3\n").is_err());
        assert!(SuiteConfig::from_toml_str("[experiment]\nmethods = [\"gp\"]\n").is_err());
        let cfg = SuiteConfig::from_toml_str("[experiment]\nbenchmarks = [\"Concrete\"]\n").unwrap();
        assert!(cfg.run_configs().is_err());
        let cfg = SuiteConfig::from_toml_str("[experiment]\nalpha = 2.0\n").unwrap();
        assert!(cfg.run_configs().is_err());
        assert!(SuiteConfig::load(Path::new("/no/such.toml")).is_err());
    }
}
