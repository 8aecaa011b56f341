//! Benchmark problems, point samplers and CSV ingestion.
//!
//! Each synthetic problem carries its closed-form target twice: as a plain
//! function used to label samples, and as an engine expression tree. Both
//! are written with the same floating-point operation order (constants are
//! built as `exp(x - x) = 1`, `tan` as `sin / cos`) so the tree reproduces
//! the labels bit for bit.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{Alphabet, Dataset, ExpressionTree};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FunctionSet {
    /// `{+, -, *, /}`
    Arithmetic,
    /// `{+, -, *, /, sin, cos, exp, ln}`
    Elementary,
}

impl FunctionSet {
    pub fn label(self) -> &'static str {
        match self {
            FunctionSet::Arithmetic => "A",
            FunctionSet::Elementary => "B",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sampler {
    /// `count` points, every coordinate uniform on `[a, b]`.
    Uniform { a: f64, b: f64, count: usize },
    /// Cartesian grid; one `(a, b, step)` axis per variable, or a single
    /// axis shared by all variables.
    Mesh(&'static [(f64, f64, f64)]),
}

impl Sampler {
    pub fn describe(&self) -> String {
        match self {
            Sampler::Uniform { a, b, count } => format!("U[{a}, {b}, {count}]"),
            Sampler::Mesh(axes) => axes
                .iter()
                .map(|(a, b, s)| format!("E[{a}, {b}, {s}]"))
                .collect::<Vec<_>>()
                .join(" x "),
        }
    }
}

#[derive(Clone, Copy)]
pub enum Source {
    Synthetic {
        target: fn(&[f64]) -> f64,
        tree: fn() -> ExpressionTree,
        train: Sampler,
        test: Sampler,
        /// Redraw uniform points with an exactly-zero coordinate.
        reject_zero: bool,
    },
    /// Loaded from a user-supplied CSV file.
    Csv { description: &'static str },
}

#[derive(Clone, Copy)]
pub struct BenchmarkSpec {
    pub name: &'static str,
    pub n_vars: usize,
    pub function_set: FunctionSet,
    pub formula: &'static str,
    pub source: Source,
}

impl std::fmt::Debug for BenchmarkSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchmarkSpec")
            .field("name", &self.name)
            .field("n_vars", &self.n_vars)
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataSplit {
    pub train: Dataset,
    pub test: Dataset,
}

impl BenchmarkSpec {
    pub fn alphabet(&self) -> Alphabet {
        match self.function_set {
            FunctionSet::Arithmetic => Alphabet::arithmetic(self.n_vars),
            FunctionSet::Elementary => Alphabet::elementary(self.n_vars),
        }
        .expect("registry alphabets are valid")
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self.source, Source::Synthetic { .. })
    }

    /// Closed-form target value; `None` for data-backed problems.
    pub fn target_eval(&self, point: &[f64]) -> Option<f64> {
        match self.source {
            Source::Synthetic { target, .. } => Some(target(point)),
            Source::Csv { .. } => None,
        }
    }

    pub fn target_tree(&self) -> Option<ExpressionTree> {
        match self.source {
            Source::Synthetic { tree, .. } => Some(tree()),
            Source::Csv { .. } => None,
        }
    }

    pub fn samplers(&self) -> Option<(Sampler, Sampler)> {
        match self.source {
            Source::Synthetic { train, test, .. } => Some((train, test)),
            Source::Csv { .. } => None,
        }
    }

    /// Builds train and test sets. Synthetic problems sample from `seed`
    /// with independent streams; CSV problems need `csv` and are split
    /// 70/30 with a `seed`-driven shuffle.
    pub fn datasets(&self, seed: u64, csv: Option<&CsvSource<'_>>) -> Result<DataSplit> {
        match self.source {
            Source::Synthetic {
                target,
                train,
                test,
                reject_zero,
                ..
            } => {
                let mut train_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, 0));
                let mut test_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, 1));
                Ok(DataSplit {
                    train: self.sample(train, target, reject_zero, &mut train_rng)?,
                    test: self.sample(test, target, reject_zero, &mut test_rng)?,
                })
            }
            Source::Csv { .. } => {
                let csv =
                    csv.ok_or_else(|| Error::Usage(format!("{} needs a data file (--data path.csv)", self.name)))?;
                let data = load_csv_dataset(csv.path, &csv.target)?;
                if data.n_vars() != self.n_vars {
                    return Err(Error::Ingest {
                        path: csv.path.to_path_buf(),
                        message: format!(
                            "{} expects {} feature columns, found {}",
                            self.name,
                            self.n_vars,
                            data.n_vars()
                        ),
                    });
                }
                Ok(split_train_test(&data, 0.7, seed))
            }
        }
    }

    fn sample(
        &self,
        sampler: Sampler,
        target: fn(&[f64]) -> f64,
        reject_zero: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Dataset> {
        let inputs = match sampler {
            Sampler::Uniform { a, b, count } => sample_uniform_where(a, b, count, self.n_vars, rng, |p| {
                !(reject_zero && p.contains(&0.0)) && target(p).is_finite()
            }),
            Sampler::Mesh(axes) => {
                let axes: Vec<_> = if axes.len() == 1 {
                    vec![axes[0]; self.n_vars]
                } else {
                    axes.to_vec()
                };
                sample_mesh(&axes)
            }
        };
        let targets = inputs.chunks_exact(self.n_vars).map(target).collect();
        Dataset::new(self.n_vars, inputs, targets)
    }
}

/// CSV file plus target column selection.
#[derive(Clone, Debug)]
pub struct CsvSource<'a> {
    pub path: &'a Path,
    pub target: TargetColumn,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub enum TargetColumn {
    #[default]
    Last,
    Index(usize),
    Name(String),
}

impl std::str::FromStr for TargetColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "" | "last" => TargetColumn::Last,
            _ => s
                .parse()
                .map(TargetColumn::Index)
                .unwrap_or_else(|_| TargetColumn::Name(s.to_string())),
        })
    }
}

/// `count` points with every coordinate uniform on `[a, b]`, row-major.
pub fn sample_uniform<R: Rng + ?Sized>(a: f64, b: f64, count: usize, n_vars: usize, rng: &mut R) -> Vec<f64> {
    sample_uniform_where(a, b, count, n_vars, rng, |_| true)
}

fn sample_uniform_where<R: Rng + ?Sized>(
    a: f64,
    b: f64,
    count: usize,
    n_vars: usize,
    rng: &mut R,
    accept: impl Fn(&[f64]) -> bool,
) -> Vec<f64> {
    assert!(a < b, "empty sampling interval [{a}, {b}]");
    let mut out = Vec::with_capacity(count * n_vars);
    let mut point = vec![0.0; n_vars];
    while out.len() < count * n_vars {
        for v in point.iter_mut() {
            *v = rng.random_range(a..=b);
        }
        if accept(&point) {
            out.extend_from_slice(&point);
        }
    }
    out
}

/// Grid values `a, a + step, ...` up to `b` inclusive.
pub fn mesh_axis(a: f64, b: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0, "mesh step must be positive");
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|k| a + k as f64 * step).collect()
}

/// Cartesian product of per-variable axes, first variable slowest.
pub fn sample_mesh(axes: &[(f64, f64, f64)]) -> Vec<f64> {
    let grids: Vec<Vec<f64>> = axes.iter().map(|&(a, b, s)| mesh_axis(a, b, s)).collect();
    let total: usize = grids.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total * axes.len());
    let mut idx = vec![0usize; grids.len()];
    for _ in 0..total {
        out.extend(idx.iter().zip(&grids).map(|(&i, g)| g[i]));
        for d in (0..grids.len()).rev() {
            idx[d] += 1;
            if idx[d] < grids[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

/// Reads a comma-separated numeric table. A first row with any non-numeric
/// cell is taken as a header. Rows with non-numeric or missing cells are
/// skipped and reported through the log.
pub fn load_csv_dataset(path: &Path, target: &TargetColumn) -> Result<Dataset> {
    let ingest = |message: String| Error::Ingest {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ingest(e.to_string()))?;

    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rejected: Vec<String> = Vec::new();
    let mut width: Option<usize> = None;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| ingest(e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, usize>> = record
            .iter()
            .enumerate()
            .map(|(col, cell)| cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or(col))
            .collect();
        if line == 0 && parsed.iter().any(|c| c.is_err()) {
            header = Some(record.iter().map(str::to_string).collect());
            width = Some(record.len());
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            rejected.push(format!("row {}: {} columns, expected {w}", line + 1, record.len()));
            continue;
        }
        match parsed.into_iter().collect::<std::result::Result<Vec<f64>, usize>>() {
            Ok(values) => rows.push(values),
            Err(col) => rejected.push(format!("row {}: column {} is not numeric", line + 1, col + 1)),
        }
    }
    if !rejected.is_empty() {
        log::warn!(
            "{}: skipped {} row(s); first: {}",
            path.display(),
            rejected.len(),
            rejected[0]
        );
    }
    if rows.is_empty() {
        return Err(ingest("no numeric data rows (empty dataset)".into()));
    }
    let width = width.unwrap_or(0);
    if width < 2 {
        return Err(ingest(format!(
            "need at least one feature and a target, found {width} column(s)"
        )));
    }
    let target_col = match target {
        TargetColumn::Last => width - 1,
        TargetColumn::Index(i) if *i < width => *i,
        TargetColumn::Index(i) => {
            return Err(ingest(format!("target column {i} out of range (0..{width})")));
        }
        TargetColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| ingest(format!("no column named `{name}`")))?,
    };
    let targets = rows.iter().map(|r| r[target_col]).collect();
    let features: Vec<Vec<f64>> = rows
        .into_iter()
        .map(|mut r| {
            r.remove(target_col);
            r
        })
        .collect();
    Dataset::from_rows(&features, targets)
}

/// Seeded shuffle split; the train part gets `round(fraction * n)` rows.
pub fn split_train_test(data: &Dataset, train_fraction: f64, seed: u64) -> DataSplit {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (train_fraction * data.len() as f64).round() as usize;
    DataSplit {
        train: data.select(&idx[..n_train]),
        test: data.select(&idx[n_train..]),
    }
}

// Tree-building helpers. Variables are 0-based.

fn x(k: usize) -> ExpressionTree {
    ExpressionTree::var(k)
}

/// exp(x1 - x1) == 1 for every finite input.
fn one() -> ExpressionTree {
    (x(0) - x(0)).exp()
}

fn two() -> ExpressionTree {
    one() + one()
}

fn tan_tree(k: usize) -> ExpressionTree {
    x(k).sin() / x(k).cos()
}

// Opaque arguments keep release builds from fusing sin and cos into one
// sincos call, which can round differently from the tree evaluator.
fn sin(v: f64) -> f64 {
    std::hint::black_box(v).sin()
}

fn cos(v: f64) -> f64 {
    std::hint::black_box(v).cos()
}

fn tan(v: f64) -> f64 {
    sin(v) / cos(v)
}

const UNIT_1_11: Sampler = Sampler::Uniform {
    a: 1.0,
    b: 11.0,
    count: 1000,
};
const UNIT_M5_5: Sampler = Sampler::Uniform {
    a: -5.0,
    b: 5.0,
    count: 1000,
};

static REGISTRY: [BenchmarkSpec; 16] = [
    BenchmarkSpec {
        name: "Sphere5",
        n_vars: 5,
        function_set: FunctionSet::Arithmetic,
        formula: "x1^2 + x2^2 + x3^2 + x4^2 + x5^2",
        source: Source::Synthetic {
            target: |p| p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3] + p[4] * p[4],
            tree: || x(0) * x(0) + x(1) * x(1) + x(2) * x(2) + x(3) * x(3) + x(4) * x(4),
            train: UNIT_1_11,
            test: UNIT_1_11,
            reject_zero: false,
        },
    },
    BenchmarkSpec {
        name: "Dic1",
        n_vars: 10,
        function_set: FunctionSet::Elementary,
        formula: "x1 + x2 + x3 + x4 + x5",
        source: Source::Synthetic {
            target: |p| p[0] + p[1] + p[2] + p[3] + p[4],
            tree: || x(0) + x(1) + x(2) + x(3) + x(4),
            train: UNIT_1_11,
            test: UNIT_1_11,
            reject_zero: false,
        },
    },
    BenchmarkSpec {
        name: "Dic3",
        n_vars: 10,
        function_set: FunctionSet::Elementary,
        formula: "x1 + x2*x3/x4 + x3*x4/x5",
        source: Source::Synthetic {
            target: |p| p[0] + p[1] * p[2] / p[3] + p[2] * p[3] / p[4],
            tree: || x(0) + x(1) * x(2) / x(3) + x(2) * x(3) / x(4),
            train: UNIT_1_11,
            test: UNIT_1_11,
            reject_zero: false,
        },
    },
    BenchmarkSpec {
        name: "Dic4",
        n_vars: 10,
        function_set: FunctionSet::Elementary,
        formula: "x1*x2 + x2*x3 + x3*x4*x5 + x5*x6",
        source: Source::Synthetic {
            target: |p| p[0] * p[1] + p[1] * p[2] + p[2] * p[3] * p[4] + p[4] * p[5],
            tree: || x(0) * x(1) + x(1) * x(2) + x(2) * x(3) * x(4) + x(4) * x(5),
            train: UNIT_1_11,
            test: UNIT_1_11,
            reject_zero: false,
        },
    },
    BenchmarkSpec {
        name: "Dic5",
        n_vars: 10,
        function_set: FunctionSet::Elementary,
        formula: "sqrt(x1) + sin(x2) + ln(x3)",
        source: Source::Synthetic {
            target: |p| p[0].sqrt() + sin(p[1]) + p[2].ln(),
            tree: || x(0).sqrt() + x(1).sin() + x(2).ln(),
            train: UNIT_1_11,
            test: UNIT_1_11,
            reject_zero: false,
        },
    },
    BenchmarkSpec {
        name: "Nico9",
        n_vars: 2,
        function_set: FunctionSet::Elementary,
        formula: "x1^4 - x1^3 + x2^2/2 - x2",
        source: Source::Synthetic {
            target: |p| p[0] * p[0] * p[0] * p[0] - p[0] * p[0] * p[0] + p[1] * p[1] / 2.0 - p[1],
            tree: || x(0) * x(0) * x(0) * x(0) - x(0) * x(0) * x(0) + x(1) * x(1) / two() - x(1),
            train: UNIT_M5_5,
            test: UNIT_M5_5,
            reject_zero: false,
        },
    },
    BenchmarkSpec {
        name: "Nico14",
        n_vars: 6,
        function_set: FunctionSet::Elementary,
        formula: "(x5*x6) / ((x1/x2) * (x3/x4))",
        source: Source::Synthetic {
            target: |p| p[4] * p[5] / ((p[0] / p[1]) * (p[2] / p[3])),
            tree: || x(4) * x(5) / ((x(0) / x(1)) * (x(2) / x(3))),
            train: UNIT_M5_5,
            test: UNIT_M5_5,
            reject_zero: true,
        },
    },
    BenchmarkSpec {
        name: "Nico16",
        n_vars: 4,
        function_set: FunctionSet::Elementary,
        formula: "32 - 3 * (tan(x1)/tan(x2)) * (tan(x3)/tan(x4))",
        source: Source::Synthetic {
            target: |p| 32.0 - 3.0 * (tan(p[0]) / tan(p[1])) * (tan(p[2]) / tan(p[3])),
            tree: || {
                let three = one() + one() + one();
                let thirty_two = two() * two() * two() * two() * two();
                thirty_two - three * (tan_tree(0) / tan_tree(1)) * (tan_tree(2) / tan_tree(3))
            },
            train: UNIT_M5_5,
            test: UNIT_M5_5,
            reject_zero: true,
        },
    },
    BenchmarkSpec {
        name: "Nico20",
        n_vars: 10,
        function_set: FunctionSet::Elementary,
        formula: "1/x1 + 1/x2 + 1/x3 + 1/x4 + 1/x5",
        source: Source::Synthetic {
            target: |p| 1.0 / p[0] + 1.0 / p[1] + 1.0 / p[2] + 1.0 / p[3] + 1.0 / p[4],
            tree: || one() / x(0) + one() / x(1) + one() / x(2) + one() / x(3) + one() / x(4),
            train: UNIT_M5_5,
            test: UNIT_M5_5,
            reject_zero: true,
        },
    },
    BenchmarkSpec {
        name: "Poly10",
        n_vars: 10,
        function_set: FunctionSet::Arithmetic,
        formula: "x1*x2 + x2*x3 + x3*x4 + x4*x5 + x5*x6 + x1*x7*x9 + x3*x6*x10",
        source: Source::Synthetic {
            target: |p| {
                p[0] * p[1]
                    + p[1] * p[2]
                    + p[2] * p[3]
                    + p[3] * p[4]
                    + p[4] * p[5]
                    + p[0] * p[6] * p[8]
                    + p[2] * p[5] * p[9]
            },
            tree: || {
                x(0) * x(1)
                    + x(1) * x(2)
                    + x(2) * x(3)
                    + x(3) * x(4)
                    + x(4) * x(5)
                    + x(0) * x(6) * x(8)
                    + x(2) * x(5) * x(9)
            },
            train: Sampler::Uniform {
                a: -1.0,
                b: 1.0,
                count: 250,
            },
            test: Sampler::Uniform {
                a: -1.0,
                b: 1.0,
                count: 250,
            },
            reject_zero: false,
        },
    },
    BenchmarkSpec {
        name: "Pagie1",
        n_vars: 2,
        function_set: FunctionSet::Elementary,
        formula: "1/(1 + x1^-4) + 1/(1 + x2^-4)",
        source: Source::Synthetic {
            target: |p| {
                1.0 / (1.0 + 1.0 / (p[0] * p[0] * p[0] * p[0])) + 1.0 / (1.0 + 1.0 / (p[1] * p[1] * p[1] * p[1]))
            },
            tree: || {
                let term = |k: usize| one() / (one() + one() / (x(k) * x(k) * x(k) * x(k)));
                term(0) + term(1)
            },
            train: Sampler::Mesh(&[(-5.0, 5.0, 0.4)]),
            test: Sampler::Mesh(&[(-4.95, 5.05, 0.4)]),
            reject_zero: false,
        },
    },
    BenchmarkSpec {
        name: "Nguyen6",
        n_vars: 1,
        function_set: FunctionSet::Elementary,
        formula: "sin(x) + sin(x + x^2)",
        source: Source::Synthetic {
            target: |p| sin(p[0]) + sin(p[0] + p[0] * p[0]),
            tree: || x(0).sin() + (x(0) + x(0) * x(0)).sin(),
            train: Sampler::Uniform {
                a: -1.0,
                b: 1.0,
                count: 20,
            },
            test: Sampler::Uniform {
                a: -1.0,
                b: 1.0,
                count: 20,
            },
            reject_zero: false,
        },
    },
    BenchmarkSpec {
        name: "Nguyen7",
        n_vars: 1,
        function_set: FunctionSet::Elementary,
        formula: "ln(x + 1) + ln(x^2 + 1)",
        source: Source::Synthetic {
            target: |p| (p[0] + 1.0).ln() + (p[0] * p[0] + 1.0).ln(),
            tree: || (x(0) + one()).ln() + (x(0) * x(0) + one()).ln(),
            train: Sampler::Uniform {
                a: 0.0,
                b: 2.0,
                count: 20,
            },
            test: Sampler::Uniform {
                a: 0.0,
                b: 2.0,
                count: 20,
            },
            reject_zero: false,
        },
    },
    BenchmarkSpec {
        name: "Vlad3",
        n_vars: 2,
        function_set: FunctionSet::Elementary,
        formula: "exp(-x) * x^3 * (cos(x)*sin(x)) * (cos(x)*sin(x)^2 - 1) * (y - 5)",
        source: Source::Synthetic {
            target: |p| {
                let (x, y) = (p[0], p[1]);
                (-x).exp() * (x * x * x) * (cos(x) * sin(x)) * (cos(x) * (sin(x) * sin(x)) - 1.0) * (y - 5.0)
            },
            tree: || {
                let five = one() + one() + one() + one() + one();
                (x(0) - x(0) - x(0)).exp()
                    * (x(0) * x(0) * x(0))
                    * (x(0).cos() * x(0).sin())
                    * (x(0).cos() * (x(0).sin() * x(0).sin()) - one())
                    * (x(1) - five)
            },
            train: Sampler::Mesh(&[(0.05, 10.0, 0.1), (0.05, 10.05, 2.0)]),
            test: Sampler::Mesh(&[(-0.5, 10.5, 0.05), (-0.5, 10.5, 0.5)]),
            reject_zero: false,
        },
    },
    BenchmarkSpec {
        name: "Energy",
        n_vars: 8,
        function_set: FunctionSet::Elementary,
        formula: "energy efficiency of buildings (UCI)",
        source: Source::Csv {
            description: "8 building features; heating or cooling load as target",
        },
    },
    BenchmarkSpec {
        name: "Concrete",
        n_vars: 8,
        function_set: FunctionSet::Elementary,
        formula: "concrete compressive strength (UCI)",
        source: Source::Csv {
            description: "8 mixture features; compressive strength as target",
        },
    },
];

pub fn registry() -> &'static [BenchmarkSpec] {
    &REGISTRY
}

/// Case-insensitive exact name lookup.
pub fn find(name: &str) -> Option<&'static BenchmarkSpec> {
    REGISTRY.iter().find(|b| b.name.eq_ignore_ascii_case(name))
}

/// Problems whose name contains `filter` (case-insensitive).
pub fn list(filter: Option<&str>) -> Vec<&'static BenchmarkSpec> {
    let needle = filter.unwrap_or("").to_ascii_lowercase();
    REGISTRY
        .iter()
        .filter(|b| b.name.to_ascii_lowercase().contains(&needle))
        .collect()
}
