//! Config-driven synthesis and evaluation runs.
//!
//! The copula generator learns dependence on the ECDF-normalized source
//! sample and injects the target marginals through pseudo-inverse
//! transforms. The other generators are the baselines it is compared with.

use std::collections::BTreeMap;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::baselines::sample_independent;
use crate::bayesnet::{self, fit_parameters, learn_structure, BayesNet};
use crate::copula::{cell_table, denormalize, jitter_cells, marginal_ecdfs, normalize, NormalizedTable};
use crate::dataset::{
    load_marginals_csv, load_micro_csv, marginals_of, split, MarginalTable, MicroTable, Schema,
    VariableKind, VariableSpec,
};
use crate::error::{Error, Result};
use crate::ipf;
use crate::metrics::{
    default_exclusions, evaluate, srmse_projected, write_marginal_csv, EvaluationInput,
    EvaluationReport, MAX_PROJECTION,
};
use crate::rng::{self, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Independent,
    Ipf,
    Bn,
    BnCopula,
    ExternalCopula,
}

impl GeneratorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::Independent => "independent",
            GeneratorKind::Ipf => "ipf",
            GeneratorKind::Bn => "bn",
            GeneratorKind::BnCopula => "bn_copula",
            GeneratorKind::ExternalCopula => "external_copula",
        }
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| Error::invalid(format!("unknown method `{s}`")))
    }
}

pub const FROM_SOURCE: &str = "from-source";
pub const FROM_REFERENCE: &str = "from-reference";

/// Experiment configuration, read from JSON. Relative paths are resolved
/// against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    pub source_data: PathBuf,
    pub schema: PathBuf,
    /// Path to a marginals CSV, `"from-source"` or `"from-reference"`.
    /// Missing means `"from-source"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_marginals: Option<String>,
    pub method: GeneratorKind,
    pub output_size: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_parents: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// IPF tolerance relative to the total target mass.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    /// Variables dropped before counting zeros and coverage. Missing means
    /// every ordinal variable with more than 20 categories.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclude_variables: Option<Vec<String>>,
    pub output_dir: PathBuf,
    /// Target microdata used as the evaluation reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_data: Option<PathBuf>,
    /// Table treated as the complete population for structural zeros.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_data: Option<PathBuf>,
    /// When set, the source is split and only this fraction is used for
    /// training; the rest becomes the reference unless `reference_data` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    /// Independent baseline only: draw from the target marginals instead of
    /// the training marginals.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub independent_from_target: bool,
    /// external_copula only: program and leading arguments of the plug-in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plugin_command: Option<Vec<String>>,
    /// Largest SRMSE projection size (default 5).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_srmse_n: Option<usize>,
}

impl SynthesisConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: SynthesisConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_relative_to(base);
        Ok(config)
    }

    fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.source_data);
        fix(&mut self.schema);
        fix(&mut self.output_dir);
        for p in [&mut self.reference_data, &mut self.population_data].into_iter().flatten() {
            fix(p);
        }
        if let Some(t) = &mut self.target_marginals {
            if t != FROM_SOURCE && t != FROM_REFERENCE && Path::new(t.as_str()).is_relative() {
                *t = base.join(t.as_str()).to_string_lossy().into_owned();
            }
        }
    }

    pub fn params(&self) -> SynthesisParams {
        SynthesisParams {
            method: self.method,
            output_size: self.output_size,
            seed: self.seed,
            max_parents: self.max_parents.unwrap_or(bayesnet::DEFAULT_MAX_PARENTS),
            alpha: self.alpha.unwrap_or(bayesnet::DEFAULT_SAMPLING_ALPHA),
            tol: self.tol.unwrap_or(ipf::DEFAULT_RELATIVE_TOL),
            max_iter: self.max_iter.unwrap_or(ipf::DEFAULT_MAX_ITER),
            independent_from_target: self.independent_from_target,
            plugin_command: self.plugin_command.clone(),
        }
    }
}

/// Generator settings, independent of any files.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisParams {
    pub method: GeneratorKind,
    pub output_size: usize,
    pub seed: u64,
    pub max_parents: usize,
    pub alpha: f64,
    /// IPF tolerance relative to the total target mass.
    pub tol: f64,
    pub max_iter: usize,
    pub independent_from_target: bool,
    pub plugin_command: Option<Vec<String>>,
}

impl SynthesisParams {
    pub fn new(method: GeneratorKind, output_size: usize, seed: u64) -> Self {
        SynthesisParams {
            method,
            output_size,
            seed,
            max_parents: bayesnet::DEFAULT_MAX_PARENTS,
            alpha: bayesnet::DEFAULT_SAMPLING_ALPHA,
            tol: ipf::DEFAULT_RELATIVE_TOL,
            max_iter: ipf::DEFAULT_MAX_ITER,
            independent_from_target: false,
            plugin_command: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub table: MicroTable,
    pub warnings: Vec<String>,
    /// Fitted network, for the BN-based methods.
    pub network: Option<BayesNet>,
}

/// Generates `params.output_size` rows from a training sample and target
/// marginals with the chosen method.
pub fn synthesize(
    train: &MicroTable,
    targets: &MarginalTable,
    params: &SynthesisParams,
) -> Result<Synthesis> {
    train.schema().ensure_same(targets.schema())?;
    if train.is_empty() {
        return Err(Error::EmptyTable);
    }
    let n = params.output_size;
    let seed = params.seed;
    match params.method {
        GeneratorKind::Independent => {
            let marginals = if params.independent_from_target {
                targets.clone()
            } else {
                marginals_of(train)?
            };
            let table = sample_independent(&marginals, n, &mut rng::stream(seed, substream::BASELINE))?;
            Ok(Synthesis {
                table,
                warnings: Vec::new(),
                network: None,
            })
        }
        GeneratorKind::Ipf => {
            let seed_table = ipf::build_seed(train)?;
            let total = targets.total(0) as f64;
            let fitted = ipf::fit(&seed_table, targets, params.tol * total, params.max_iter)?;
            let mut warnings = fitted.warnings();
            if !fitted.converged && fitted.unreachable.is_empty() {
                warnings.push(format!(
                    "ipf: stopped after {} cycles with axis-sum deviation {}",
                    fitted.cycles, fitted.max_deviation
                ));
            }
            let table = ipf::allocate(&fitted.table, n, &mut rng::stream(seed, substream::ALLOCATE))?;
            Ok(Synthesis {
                table,
                warnings,
                network: None,
            })
        }
        GeneratorKind::Bn => {
            let dag = learn_structure(train, params.max_parents, seed)?;
            let bn = fit_parameters(train, &dag, params.alpha)?;
            let table = bn.sample(n, &mut rng::stream(seed, substream::MODEL_SAMPLE));
            Ok(Synthesis {
                table,
                warnings: Vec::new(),
                network: Some(bn),
            })
        }
        GeneratorKind::BnCopula => {
            // cast the source into the unit hypercube
            let (normalized, ecdfs) = normalize(train)?;
            // learn the dependence on the normalized values, seen as the
            // categorical table of their ECDF levels.
            let cells = cell_table(&normalized, &ecdfs)?;
            let dag = learn_structure(&cells, params.max_parents, seed)?;
            let bn = fit_parameters(&cells, &dag, params.alpha)?;
            // sample cells, then spread each one over its ECDF interval
            let sampled = bn.sample(n, &mut rng::stream(seed, substream::MODEL_SAMPLE));
            let u = jitter_cells(&sampled, &ecdfs, train.schema(), seed)?;
            // pseudo-inverse against the target marginals
            let table = denormalize(&u, &marginal_ecdfs(targets)?)?;
            Ok(Synthesis {
                table,
                warnings: Vec::new(),
                network: Some(bn),
            })
        }
        GeneratorKind::ExternalCopula => {
            let command = params
                .plugin_command
                .as_ref()
                .filter(|c| !c.is_empty())
                .ok_or_else(|| Error::invalid("external_copula requires plugin_command"))?;
            let (normalized, _) = normalize(train)?;
            let u = run_plugin(command, &normalized, n, seed)?;
            let table = denormalize(&u, &marginal_ecdfs(targets)?)?;
            Ok(Synthesis {
                table,
                warnings: Vec::new(),
                network: None,
            })
        }
    }
}

/// Runs an external copula generator: the normalized table goes to its
/// standard input as CSV, `--n <count> --seed <int>` are appended to its
/// arguments, and `n` rows of values in `(0,1]` are read from its output.
pub fn run_plugin(
    command: &[String],
    normalized: &NormalizedTable,
    n: usize,
    seed: u64,
) -> Result<NormalizedTable> {
    let mut child = Command::new(&command[0])
        .args(&command[1..])
        .arg("--n")
        .arg(n.to_string())
        .arg("--seed")
        .arg(seed.to_string())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::External(format!("cannot start `{}`: {e}", command[0])))?;
    let mut input = Vec::new();
    normalized.write_csv(&mut input)?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let writer = std::thread::spawn(move || stdin.write_all(&input));
    let output = child
        .wait_with_output()
        .map_err(|e| Error::External(format!("plug-in did not finish: {e}")))?;
    // A plug-in may exit without reading all of its input; only its exit status matters.
    let _ = writer.join();
    if !output.status.success() {
        return Err(Error::External(format!(
            "plug-in exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    let table = NormalizedTable::read_csv(BufReader::new(output.stdout.as_slice()), normalized.schema())
        .map_err(|e| Error::External(format!("bad plug-in output: {e}")))?;
    if table.n_rows() != n {
        return Err(Error::External(format!(
            "plug-in returned {} rows, expected {n}",
            table.n_rows()
        )));
    }
    Ok(table)
}

/// Everything a run reads from disk, after splitting.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub train: MicroTable,
    pub reference: MicroTable,
    pub targets: MarginalTable,
    pub population: Option<MicroTable>,
    pub exclude: Vec<usize>,
    pub notices: Vec<String>,
}

impl ExperimentData {
    pub fn load(config: &SynthesisConfig) -> Result<Self> {
        let schema = Schema::from_json_file(&config.schema)?;
        let source = load_micro_csv(&config.source_data, &schema)?;
        if source.is_empty() {
            return Err(Error::EmptyTable);
        }
        let (train, holdout) = match config.train_fraction {
            Some(f) => {
                let (a, b) = split(&source, f, config.seed)?;
                (a, Some(b))
            }
            None => (source, None),
        };
        let reference = match (&config.reference_data, holdout) {
            (Some(p), _) => load_micro_csv(p, &schema)?,
            (None, Some(h)) => h,
            (None, None) => train.clone(),
        };
        if reference.is_empty() {
            return Err(Error::invalid("reference table is empty"));
        }
        let mut notices = Vec::new();
        let targets = match config.target_marginals.as_deref() {
            None => {
                notices.push(format!(
                    "no target marginals given; using {FROM_SOURCE} (training marginals)"
                ));
                marginals_of(&train)?
            }
            Some(FROM_SOURCE) => marginals_of(&train)?,
            Some(FROM_REFERENCE) => marginals_of(&reference)?,
            Some(path) => load_marginals_csv(path, &schema)?,
        };
        let population = config
            .population_data
            .as_ref()
            .map(|p| load_micro_csv(p, &schema))
            .transpose()?;
        let exclude = match &config.exclude_variables {
            Some(names) => names
                .iter()
                .map(|n| schema.index_of(n).ok_or_else(|| Error::UnknownVariable(n.clone())))
                .collect::<Result<Vec<_>>>()?,
            None => default_exclusions(&schema),
        };
        Ok(ExperimentData {
            train,
            reference,
            targets,
            population,
            exclude,
            notices,
        })
    }

    /// Same data with categorical labels reordered: `perms` holds, per
    /// variable, `None` or a map from old code to new code.
    pub fn recoded(&self, perms: &[Option<Vec<u32>>]) -> Result<Self> {
        let mut out = self.clone();
        for (var, perm) in perms.iter().enumerate() {
            if let Some(p) = perm {
                out.train = out.train.recode(var, p)?;
                out.reference = out.reference.recode(var, p)?;
                out.targets = out.targets.recode(var, p)?;
                out.population = out.population.map(|t| t.recode(var, p)).transpose()?;
            }
        }
        Ok(out)
    }

    pub fn evaluate(&self, method: &str, synthetic: &MicroTable, max_n: usize) -> Result<EvaluationReport> {
        evaluate(
            method,
            EvaluationInput {
                reference: &self.reference,
                training: Some(&self.train),
                synthetic,
                population: self.population.as_ref(),
                exclude: &self.exclude,
                max_n,
            },
        )
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: EvaluationReport,
    pub synthetic: MicroTable,
    pub notices: Vec<String>,
}

/// Loads the inputs, synthesizes, evaluates, and writes `synthetic.csv`,
/// `report.json` and `marginals.csv` into the output directory.
pub fn run_experiment(config: &SynthesisConfig) -> Result<ExperimentOutput> {
    if config.output_size == 0 {
        return Err(Error::invalid("output_size must be positive"));
    }
    let data = ExperimentData::load(config)?;
    let synthesis = synthesize(&data.train, &data.targets, &config.params())?;
    let max_n = config.max_srmse_n.unwrap_or(MAX_PROJECTION);
    let mut report = data.evaluate(config.method.as_str(), &synthesis.table, max_n)?;
    report.warnings = synthesis.warnings;

    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    synthesis.table.save_csv(dir.join("synthetic.csv"))?;
    write_file(&dir.join("report.json"), report.to_json_string().as_bytes())?;
    let mut marginals = Vec::new();
    write_marginal_csv(&report.marginal_series, &mut marginals)?;
    write_file(&dir.join("marginals.csv"), &marginals)?;
    if let Some(bn) = &synthesis.network {
        write_file(&dir.join("network.json"), bn.to_json_string().as_bytes())?;
    }
    Ok(ExperimentOutput {
        report,
        synthetic: synthesis.table,
        notices: data.notices,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationRun {
    /// Per categorical variable name, the label order used.
    pub label_orders: BTreeMap<String, Vec<String>>,
    pub srmse_by_n: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationSummary {
    pub n_permutations: usize,
    pub srmse_mean: BTreeMap<usize, f64>,
    /// Sample standard deviation; 0 for a single permutation.
    pub srmse_std: BTreeMap<usize, f64>,
    pub runs: Vec<PermutationRun>,
}

impl PermutationSummary {
    pub fn coefficient_of_variation(&self, n: usize) -> Option<f64> {
        Some(self.srmse_std.get(&n)? / self.srmse_mean.get(&n)?)
    }

    pub fn summary_table(&self) -> String {
        let mut out = format!("{:<10}{:>12}{:>12}\n", "srmse", "mean", "std");
        for (n, mean) in &self.srmse_mean {
            out.push_str(&format!("{:<10}{:>12.4}{:>12.4}\n", n, mean, self.srmse_std[n]));
        }
        out
    }
}

/// Reruns the copula generator with random label orders on every
/// categorical variable and summarizes SRMSE across orders. The generator
/// seed stays fixed; only the labeling changes.
pub fn permutation_study(
    data: &ExperimentData,
    params: &SynthesisParams,
    n_permutations: usize,
    max_n: usize,
) -> Result<PermutationSummary> {
    if params.method != GeneratorKind::BnCopula {
        return Err(Error::invalid("the permutation study runs the bn_copula method"));
    }
    if n_permutations == 0 {
        return Err(Error::invalid("need at least one permutation"));
    }
    let schema = data.train.schema();
    let categorical: Vec<usize> = (0..schema.len())
        .filter(|&i| schema.variable(i).kind() == VariableKind::Categorical)
        .collect();
    if categorical.is_empty() {
        return Err(Error::invalid("no categorical variables to permute"));
    }
    let base = rng::derive_seed(params.seed, substream::PERMUTATION);
    let runs = (0..n_permutations)
        .into_par_iter()
        .map(|p| {
            let mut r = rng::stream(base, p as u64);
            let perms: Vec<Option<Vec<u32>>> = (0..schema.len())
                .map(|i| {
                    categorical.contains(&i).then(|| {
                        let mut perm: Vec<u32> = (0..schema.variable(i).cardinality() as u32).collect();
                        perm.shuffle(&mut r);
                        perm
                    })
                })
                .collect();
            let recoded = data.recoded(&perms)?;
            let synthesis = synthesize(&recoded.train, &recoded.targets, params)?;
            let max_n = max_n.min(schema.len()).max(1);
            let srmse_by_n = (1..=max_n)
                .map(|n| Ok((n, srmse_projected(&recoded.reference, &synthesis.table, n)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            let label_orders = categorical
                .iter()
                .map(|&i| {
                    let v = recoded.train.schema().variable(i);
                    (v.name().to_owned(), v.labels().to_vec())
                })
                .collect();
            Ok(PermutationRun {
                label_orders,
                srmse_by_n,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut srmse_mean = BTreeMap::new();
    let mut srmse_std = BTreeMap::new();
    for &n in runs[0].srmse_by_n.keys() {
        let values: Vec<f64> = runs.iter().map(|r| r.srmse_by_n[&n]).collect();
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        srmse_mean.insert(n, mean);
        srmse_std.insert(n, std);
    }
    Ok(PermutationSummary {
        n_permutations,
        srmse_mean,
        srmse_std,
        runs,
    })
}

/// File-driven permutation study; writes `permutation_study.json`.
pub fn run_permutation_study(config: &SynthesisConfig, n_permutations: usize) -> Result<PermutationSummary> {
    if config.method != GeneratorKind::BnCopula {
        return Err(Error::invalid("the permutation study runs the bn_copula method"));
    }
    let data = ExperimentData::load(config)?;
    let summary = permutation_study(
        &data,
        &config.params(),
        n_permutations,
        config.max_srmse_n.unwrap_or(MAX_PROJECTION),
    )?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = serde_json::to_string_pretty(&summary)?;
    write_file(&dir.join("permutation_study.json"), json.as_bytes())?;
    Ok(summary)
}

/// Latent correlation between variables `i` and `j` of the benchmark.
pub const BENCHMARK_CORRELATION: f64 = 0.7;
/// Latent threshold shift, in standard deviations, per unit of skew.
pub const BENCHMARK_SHIFT_PER_SKEW: f64 = 0.8;
/// Population size behind the benchmark's target marginal totals.
pub const BENCHMARK_POPULATION: u64 = 1_000_000;

/// Two populations sharing a Gaussian copula but with different marginals.
#[derive(Debug, Clone)]
pub struct TransferBenchmark {
    pub source: MicroTable,
    pub target: MicroTable,
    /// Expected target marginal counts for a population of
    /// `BENCHMARK_POPULATION`, as published area totals would provide.
    pub target_marginals: MarginalTable,
}

fn benchmark_schema(d: usize) -> Result<Schema> {
    let variables = (0..d)
        .map(|i| {
            let m = [4, 3, 5][i % 3];
            if i % 2 == 0 {
                VariableSpec::new(format!("X{i}"), (0..m).map(|c| c.to_string()).collect(), VariableKind::Ordinal)
            } else {
                let labels = (0..m).map(|c| format!("{}", (b'a' + c as u8) as char)).collect();
                VariableSpec::new(format!("X{i}"), labels, VariableKind::Categorical)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Schema::new(variables)
}

/// Lower-triangular factor of the AR(1) correlation matrix.
fn ar1_cholesky(d: usize, rho: f64) -> Vec<Vec<f64>> {
    let corr = |i: usize, j: usize| rho.powi((i as i32 - j as i32).abs());
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            l[i][j] = if i == j {
                (corr(i, i) - s).sqrt()
            } else {
                (corr(i, j) - s) / l[j][j]
            };
        }
    }
    l
}

/// Builds a source and a target population that share a copula.
///
/// Each row draws a latent Gaussian vector with AR(1) correlation, then
/// discretizes every component with monotone thresholds. The source uses
/// equal-probability bins; the target shifts the same thresholds by
/// `skew * BENCHMARK_SHIFT_PER_SKEW` standard deviations, alternating the
/// direction across variables.
pub fn make_transfer_benchmark(
    seed: u64,
    d: usize,
    n_source: usize,
    n_target: usize,
    skew: f64,
) -> Result<TransferBenchmark> {
    if d < 2 {
        return Err(Error::invalid("benchmark needs at least two variables"));
    }
    if !(0.0..=1.0).contains(&skew) {
        return Err(Error::invalid(format!("skew {skew} not in [0,1]")));
    }
    let schema = benchmark_schema(d)?;
    let normal = Normal::standard();
    let thresholds = |shift_sign: f64| -> Vec<Vec<f64>> {
        (0..d)
            .map(|i| {
                let m = schema.variable(i).cardinality();
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let shift = shift_sign * sign * skew * BENCHMARK_SHIFT_PER_SKEW;
                (1..m)
                    .map(|k| normal.inverse_cdf(k as f64 / m as f64) + shift)
                    .collect()
            })
            .collect()
    };
    let source_cuts = thresholds(0.0);
    let target_cuts = thresholds(1.0);
    let chol = ar1_cholesky(d, BENCHMARK_CORRELATION);

    let draw = |n: usize, cuts: &[Vec<f64>], stream: u64| {
        let mut r = rng::stream(seed, stream);
        let mut codes = Vec::with_capacity(n * d);
        let mut z = vec![0.0; d];
        for _ in 0..n {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut r);
            }
            for i in 0..d {
                let latent: f64 = (0..=i).map(|k| chol[i][k] * z[k]).sum();
                codes.push(cuts[i].partition_point(|&t| t < latent) as u32);
            }
        }
        MicroTable::from_flat(schema.clone(), codes)
    };
    let source = draw(n_source, &source_cuts, substream::BENCHMARK_SOURCE)?;
    let target = draw(n_target, &target_cuts, substream::BENCHMARK_TARGET)?;

    let counts = target_cuts
        .iter()
        .map(|cuts| {
            let mut edges = vec![0.0];
            edges.extend(cuts.iter().map(|&t| normal.cdf(t)));
            edges.push(1.0);
            edges
                .windows(2)
                .map(|w| ((w[1] - w[0]) * BENCHMARK_POPULATION as f64).round() as u64)
                .collect()
        })
        .collect();
    let target_marginals = MarginalTable::new(schema, counts)?;
    Ok(TransferBenchmark {
        source,
        target,
        target_marginals,
    })
}

/// Default benchmark sizes.
pub const BENCHMARK_DIM: usize = 5;
pub const BENCHMARK_SOURCE_ROWS: usize = 6000;
pub const BENCHMARK_TARGET_ROWS: usize = 6000;

/// Writes a benchmark as files ready for `synth`: `schema.json`,
/// `source.csv`, `target.csv`, `target_marginals.csv` and `config.json`
/// (bn_copula, target as reference).
pub fn write_benchmark(dir: &Path, bench: &TransferBenchmark, seed: u64) -> Result<SynthesisConfig> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("schema.json"), bench.source.schema().to_json_string().as_bytes())?;
    bench.source.save_csv(dir.join("source.csv"))?;
    bench.target.save_csv(dir.join("target.csv"))?;
    bench.target_marginals.save_csv(dir.join("target_marginals.csv"))?;
    let config = SynthesisConfig {
        source_data: "source.csv".into(),
        schema: "schema.json".into(),
        target_marginals: Some("target_marginals.csv".into()),
        method: GeneratorKind::BnCopula,
        output_size: bench.target.n_rows().max(1),
        seed,
        max_parents: None,
        alpha: None,
        tol: None,
        max_iter: None,
        exclude_variables: Some(Vec::new()),
        output_dir: "out".into(),
        reference_data: Some("target.csv".into()),
        population_data: None,
        train_fraction: None,
        independent_from_target: false,
        plugin_command: None,
        max_srmse_n: None,
    };
    write_file(&dir.join("config.json"), serde_json::to_string_pretty(&config)?.as_bytes())?;
    Ok(config)
}
