//! Python bindings for the `popsynth` crate.
//!
//! Tables are exchanged as lists of integer codes; reports as JSON strings.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use popsynth::bayesnet;
use popsynth::copula;
use popsynth::dataset;
use popsynth::metrics;
use popsynth::pipeline::{self, GeneratorKind, SynthesisParams};
use popsynth::rng;

fn to_py(err: popsynth::Error) -> PyErr {
    match err {
        popsynth::Error::Io { .. } => PyIOError::new_err(err.to_string()),
        _ => PyValueError::new_err(format!("[{}] {}", err.kind(), err)),
    }
}

#[pyclass(name = "Schema", module = "popsynth_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PySchema(dataset::Schema);

#[pymethods]
impl PySchema {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        dataset::Schema::from_json_str(text).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        dataset::Schema::from_json_file(path).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn infer_from_csv(path: PathBuf) -> PyResult<Self> {
        dataset::Schema::infer_from_csv(path).map(Self).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.0.to_json_string()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.0.variables().iter().map(|v| v.name().to_owned()).collect()
    }

    #[getter]
    fn cardinalities(&self) -> Vec<usize> {
        self.0.cardinalities()
    }

    fn labels(&self, variable: usize) -> PyResult<Vec<String>> {
        self.0
            .variables()
            .get(variable)
            .map(|v| v.labels().to_vec())
            .ok_or_else(|| PyValueError::new_err("variable index out of range"))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "MicroTable", module = "popsynth_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyMicroTable(dataset::MicroTable);

#[pymethods]
impl PyMicroTable {
    #[new]
    fn new(schema: &PySchema, rows: Vec<Vec<u32>>) -> PyResult<Self> {
        dataset::MicroTable::new(schema.0.clone(), rows).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn load_csv(path: PathBuf, schema: &PySchema) -> PyResult<Self> {
        dataset::load_micro_csv(path, &schema.0).map(Self).map_err(to_py)
    }

    fn save_csv(&self, path: PathBuf) -> PyResult<()> {
        self.0.save_csv(path).map_err(to_py)
    }

    #[getter]
    fn schema(&self) -> PySchema {
        PySchema(self.0.schema().clone())
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.0.n_rows()
    }

    #[getter]
    fn n_vars(&self) -> usize {
        self.0.n_vars()
    }

    fn rows(&self) -> Vec<Vec<u32>> {
        self.0.to_rows()
    }

    fn column(&self, index: usize) -> PyResult<Vec<u32>> {
        if index >= self.0.n_vars() {
            return Err(PyValueError::new_err("column index out of range"));
        }
        Ok(self.0.column(index))
    }

    fn marginals(&self) -> PyResult<PyMarginalTable> {
        dataset::marginals_of(&self.0).map(PyMarginalTable).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.n_rows()
    }
}

#[pyclass(name = "MarginalTable", module = "popsynth_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyMarginalTable(dataset::MarginalTable);

#[pymethods]
impl PyMarginalTable {
    #[new]
    fn new(schema: &PySchema, counts: Vec<Vec<u64>>) -> PyResult<Self> {
        dataset::MarginalTable::new(schema.0.clone(), counts).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn load_csv(path: PathBuf, schema: &PySchema) -> PyResult<Self> {
        dataset::load_marginals_csv(path, &schema.0).map(Self).map_err(to_py)
    }

    fn save_csv(&self, path: PathBuf) -> PyResult<()> {
        self.0.save_csv(path).map_err(to_py)
    }

    fn counts(&self, variable: usize) -> PyResult<Vec<u64>> {
        self.0
            .all_counts()
            .get(variable)
            .cloned()
            .ok_or_else(|| PyValueError::new_err("variable index out of range"))
    }

    fn frequencies(&self, variable: usize) -> PyResult<Vec<f64>> {
        if variable >= self.0.all_counts().len() {
            return Err(PyValueError::new_err("variable index out of range"));
        }
        Ok(self.0.frequencies(variable))
    }
}

#[pyclass(name = "EmpiricalMarginal", module = "popsynth_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyEmpiricalMarginal(copula::EmpiricalMarginal);

#[pymethods]
impl PyEmpiricalMarginal {
    #[staticmethod]
    fn fit(column: Vec<u32>) -> PyResult<Self> {
        copula::fit_ecdf(&column).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn from_counts(counts: Vec<u64>) -> PyResult<Self> {
        copula::EmpiricalMarginal::from_counts(&counts).map(Self).map_err(to_py)
    }

    #[getter]
    fn values(&self) -> Vec<u32> {
        self.0.values().to_vec()
    }

    #[getter]
    fn cumprobs(&self) -> Vec<f64> {
        self.0.cumprobs().to_vec()
    }

    fn evaluate(&self, code: u32) -> f64 {
        self.0.evaluate(code)
    }

    fn pseudo_inverse(&self, u: f64) -> PyResult<u32> {
        self.0.pseudo_inverse(u).map_err(to_py)
    }
}

/// ECDF-normalizes a table; returns the rows in `(0,1]` and the per-variable ECDFs.
#[pyfunction]
fn normalize(table: &PyMicroTable) -> PyResult<(Vec<Vec<f64>>, Vec<PyEmpiricalMarginal>)> {
    let (norm, ecdfs) = copula::normalize(&table.0).map_err(to_py)?;
    let rows = norm.rows().map(<[f64]>::to_vec).collect();
    Ok((rows, ecdfs.into_iter().map(PyEmpiricalMarginal).collect()))
}

/// Maps rows of `(0,1]` values back to codes through the targets' pseudo-inverses.
#[pyfunction]
fn denormalize(
    schema: &PySchema,
    rows: Vec<Vec<f64>>,
    targets: Vec<PyEmpiricalMarginal>,
) -> PyResult<PyMicroTable> {
    let d = schema.0.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err(format!("every row needs {d} values")));
    }
    let values = rows.into_iter().flatten().collect();
    let norm = copula::NormalizedTable::new(schema.0.clone(), values).map_err(to_py)?;
    let targets: Vec<_> = targets.into_iter().map(|t| t.0).collect();
    copula::denormalize(&norm, &targets).map(PyMicroTable).map_err(to_py)
}

#[pyclass(name = "BayesNet", module = "popsynth_py", frozen)]
pub struct PyBayesNet(bayesnet::BayesNet);

#[pymethods]
impl PyBayesNet {
    /// Learns structure by score search, then fits smoothed CPTs.
    #[staticmethod]
    #[pyo3(signature = (table, max_parents = bayesnet::DEFAULT_MAX_PARENTS, seed = 0, alpha = bayesnet::DEFAULT_SAMPLING_ALPHA))]
    fn learn(table: &PyMicroTable, max_parents: usize, seed: u64, alpha: f64) -> PyResult<Self> {
        let dag = bayesnet::learn_structure(&table.0, max_parents, seed).map_err(to_py)?;
        bayesnet::fit_parameters(&table.0, &dag, alpha).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        bayesnet::BayesNet::from_json_str(text).map(Self).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.0.to_json_string()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.dag().edges()
    }

    fn sample(&self, n: usize, seed: u64) -> PyMicroTable {
        PyMicroTable(self.0.sample(n, &mut rng::stream(seed, rng::substream::MODEL_SAMPLE)))
    }

    fn joint_prob(&self, row: Vec<u32>) -> PyResult<f64> {
        let schema = self.0.schema();
        if row.len() != schema.len()
            || row.iter().zip(schema.cardinalities()).any(|(&c, m)| c as usize >= m)
        {
            return Err(PyValueError::new_err("row does not fit the schema"));
        }
        Ok(self.0.joint_prob(&row))
    }
}

/// SRMSE averaged over every subset of `n` variables.
#[pyfunction]
fn srmse(reference: &PyMicroTable, synthetic: &PyMicroTable, n: usize) -> PyResult<f64> {
    metrics::srmse_projected(&reference.0, &synthetic.0, n).map_err(to_py)
}

/// Full evaluation report as a JSON string.
#[pyfunction]
#[pyo3(signature = (reference, synthetic, training = None, max_n = metrics::MAX_PROJECTION))]
fn evaluate(
    reference: &PyMicroTable,
    synthetic: &PyMicroTable,
    training: Option<PyRef<'_, PyMicroTable>>,
    max_n: usize,
) -> PyResult<String> {
    let exclude = metrics::default_exclusions(reference.0.schema());
    let report = metrics::evaluate(
        "external",
        metrics::EvaluationInput {
            reference: &reference.0,
            training: training.as_ref().map(|t| &t.0),
            synthetic: &synthetic.0,
            population: None,
            exclude: &exclude,
            max_n,
        },
    )
    .map_err(to_py)?;
    Ok(report.to_json_string())
}

/// Generates `output_size` rows with one of `independent`, `ipf`, `bn`, `bn_copula`.
#[pyfunction]
#[pyo3(signature = (train, targets, method, output_size, seed = 0))]
fn synthesize(
    train: &PyMicroTable,
    targets: &PyMarginalTable,
    method: &str,
    output_size: usize,
    seed: u64,
) -> PyResult<PyMicroTable> {
    let method: GeneratorKind = method.parse().map_err(to_py)?;
    let params = SynthesisParams::new(method, output_size, seed);
    pipeline::synthesize(&train.0, &targets.0, &params)
        .map(|s| PyMicroTable(s.table))
        .map_err(to_py)
}

/// Runs a config file end to end; returns the report as JSON.
#[pyfunction]
fn run_experiment(config_path: PathBuf) -> PyResult<String> {
    let config = pipeline::SynthesisConfig::load(config_path).map_err(to_py)?;
    let out = pipeline::run_experiment(&config).map_err(to_py)?;
    Ok(out.report.to_json_string())
}

/// Source table, target table and target marginals sharing a copula.
#[pyfunction]
#[pyo3(signature = (seed = 0, d = pipeline::BENCHMARK_DIM, n_source = pipeline::BENCHMARK_SOURCE_ROWS, n_target = pipeline::BENCHMARK_TARGET_ROWS, skew = 0.5))]
fn make_transfer_benchmark(
    seed: u64,
    d: usize,
    n_source: usize,
    n_target: usize,
    skew: f64,
) -> PyResult<(PyMicroTable, PyMicroTable, PyMarginalTable)> {
    let b = pipeline::make_transfer_benchmark(seed, d, n_source, n_target, skew).map_err(to_py)?;
    Ok((
        PyMicroTable(b.source),
        PyMicroTable(b.target),
        PyMarginalTable(b.target_marginals),
    ))
}

#[pymodule]
fn popsynth_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySchema>()?;
    m.add_class::<PyMicroTable>()?;
    m.add_class::<PyMarginalTable>()?;
    m.add_class::<PyEmpiricalMarginal>()?;
    m.add_class::<PyBayesNet>()?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(denormalize, m)?)?;
    m.add_function(wrap_pyfunction!(srmse, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(make_transfer_benchmark, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
