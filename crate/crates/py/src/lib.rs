//! Python bindings. Distortion arguments default to Hamming when omitted.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyOverflowError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use switchrd::game_sim::{
    build_covering_codebook, converse_bound as converse, simulate_game as simulate,
};
use switchrd::optimizer::{self, MaximizerResult, OptimizerConfig};
use switchrd::probcore::{DistortionMatrix, Distribution, SourceList};
use switchrd::rate_distortion::RdSolver;
use switchrd::region::{self, RegionSpec, SubsetTable, SymbolSubset};
use switchrd::strategy;
use switchrd::Error;

create_exception!(switchrd, InfeasibleError, PyValueError);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Infeasible(_) | Error::NotAttainable { .. } => {
            InfeasibleError::new_err(e.to_string())
        }
        Error::GuardExceeded { .. } => PyOverflowError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for switchrd::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn distortion(matrix: Option<Vec<Vec<f64>>>, alphabet: usize) -> PyResult<DistortionMatrix> {
    match matrix {
        Some(rows) => DistortionMatrix::new(rows).py(),
        None => Ok(DistortionMatrix::hamming(alphabet)),
    }
}

/// The switchable sources, independent or jointly distributed.
#[pyclass(name = "Sources", module = "switchrd", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySources {
    inner: SourceList,
    table: SubsetTable,
}

impl PySources {
    fn wrap(inner: SourceList) -> PyResult<Self> {
        let table = SubsetTable::new(&inner).py()?;
        Ok(Self { inner, table })
    }
}

#[pymethods]
impl PySources {
    #[new]
    fn new(sources: Vec<Vec<f64>>) -> PyResult<Self> {
        Self::wrap(SourceList::from_vecs(sources).py()?)
    }

    /// Joint PMF over `X^m`, source 1 as the most significant digit.
    #[staticmethod]
    fn joint(alphabet: usize, num_sources: usize, pmf: Vec<f64>) -> PyResult<Self> {
        Self::wrap(SourceList::joint(alphabet, num_sources, pmf).py()?)
    }

    #[getter]
    fn alphabet_size(&self) -> usize {
        self.inner.alphabet_size()
    }

    #[getter]
    fn num_sources(&self) -> usize {
        self.inner.num_sources()
    }

    /// Probability that every source lands in the subset with this bitmask.
    fn q(&self, mask: u32) -> f64 {
        self.table.q(SymbolSubset::from_mask(mask))
    }

    /// Probability that the set of available symbols is exactly `mask`.
    fn beta(&self, mask: u32) -> f64 {
        self.table.beta(SymbolSubset::from_mask(mask))
    }

    fn attainable_interval(&self, symbol: usize) -> PyResult<(f64, f64)> {
        region::attainable_interval(&self.inner, symbol).py()
    }

    /// Violated constraints as `(mask, lhs, rhs)`; empty means member.
    #[pyo3(signature = (p, delta = 0.0))]
    fn violations(&self, p: Vec<f64>, delta: f64) -> PyResult<Vec<(u32, f64, f64)>> {
        let spec = RegionSpec::new(self.inner.clone(), delta).py()?;
        let report = region::is_member(&Distribution::new(p).py()?, &spec).py()?;
        Ok(report
            .violations
            .iter()
            .map(|v| (v.subset.mask(), v.lhs, v.rhs))
            .collect())
    }

    #[pyo3(signature = (p, delta = 0.0))]
    fn is_member(&self, p: Vec<f64>, delta: f64) -> PyResult<bool> {
        Ok(self.violations(p, delta)?.is_empty())
    }

    #[pyo3(signature = (p, tol = 1e-9))]
    fn in_hull(&self, p: Vec<f64>, tol: f64) -> PyResult<bool> {
        region::hull_member(&Distribution::new(p).py()?, &self.inner, tol).py()
    }

    #[pyo3(signature = (target, tol = 1e-8))]
    fn synthesize(&self, target: Vec<f64>, tol: f64) -> PyResult<PyRule> {
        let target = Distribution::new(target).py()?;
        Ok(PyRule(
            strategy::synthesize_rule(&target, &self.inner, tol).py()?,
        ))
    }

    fn greedy_rule(&self) -> PyResult<PyRule> {
        Ok(PyRule(strategy::greedy_max_rule(&self.inner).py()?))
    }

    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<Vec<usize>>> {
        switchrd::game_sim::sample_sources(&self.inner, n, seed).py()
    }

    fn __repr__(&self) -> String {
        format!(
            "Sources(alphabet_size={}, num_sources={})",
            self.inner.alphabet_size(),
            self.inner.num_sources()
        )
    }
}

/// A memoryless switch rule `f(.|V)`, keyed by subset bitmask.
#[pyclass(name = "SwitchRule", module = "switchrd", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRule(strategy::SwitchRule);

#[pymethods]
impl PyRule {
    #[new]
    fn new(alphabet: usize, rules: BTreeMap<u32, Vec<f64>>) -> PyResult<Self> {
        let rules = rules
            .into_iter()
            .map(|(mask, f)| Ok((SymbolSubset::from_mask(mask), Distribution::new(f)?)))
            .collect::<switchrd::Result<_>>()
            .py()?;
        Ok(Self(strategy::SwitchRule::new(alphabet, rules).py()?))
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self(strategy::SwitchRule::from_text(text).py()?))
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    fn entries(&self) -> BTreeMap<u32, Vec<f64>> {
        self.0
            .entries()
            .map(|(v, f)| (v.mask(), f.probs().to_vec()))
            .collect()
    }

    fn induced(&self, sources: &PySources) -> PyResult<Vec<f64>> {
        Ok(strategy::induced_distribution(&self.0, &sources.inner)
            .py()?
            .into_vec())
    }

    fn apply(&self, realizations: Vec<Vec<usize>>, seed: u64) -> PyResult<Vec<usize>> {
        strategy::apply_rule(&self.0, &realizations, seed).py()
    }

    fn __repr__(&self) -> String {
        format!("SwitchRule({} entries)", self.0.len())
    }
}

/// `(rate, achieved distortion)` of an IID source.
#[pyfunction]
#[pyo3(signature = (p, target, distortion = None))]
fn rate_at_distortion(
    p: Vec<f64>,
    target: f64,
    distortion: Option<Vec<Vec<f64>>>,
) -> PyResult<(f64, f64)> {
    let d = self::distortion(distortion, p.len())?;
    let pt = RdSolver::default()
        .rate_at_distortion(&Distribution::new(p).py()?, &d, target)
        .py()?;
    Ok((pt.rate, pt.distortion))
}

/// `[(D, R), ..]` over the whole distortion range.
#[pyfunction]
#[pyo3(signature = (p, num_points, distortion = None))]
fn rd_curve(
    p: Vec<f64>,
    num_points: usize,
    distortion: Option<Vec<Vec<f64>>>,
) -> PyResult<Vec<(f64, f64)>> {
    let d = self::distortion(distortion, p.len())?;
    let curve = RdSolver::default()
        .rd_curve(&Distribution::new(p).py()?, &d, num_points)
        .py()?;
    Ok(curve
        .points
        .iter()
        .map(|pt| (pt.distortion, pt.rate))
        .collect())
}

fn result_dict<'py>(py: Python<'py>, r: &MaximizerResult) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("value", r.value)?;
    out.set_item("argmax", r.argmax.probs().to_vec())?;
    out.set_item("weights", r.weights.clone())?;
    out.set_item("method", r.method.as_str())?;
    out.set_item("heuristic", r.heuristic)?;
    out.set_item("evaluations", r.evaluations)?;
    Ok(out)
}

fn config(seed: u64, starts: usize, grid_step: Option<f64>) -> OptimizerConfig {
    OptimizerConfig {
        seed,
        starts,
        grid_step,
        ..OptimizerConfig::default()
    }
}

/// Worst-case rate `max R_p(D)` over the attainable region.
#[pyfunction]
#[pyo3(signature = (sources, target, delta = 0.0, distortion = None, seed = 0, starts = 8, grid_step = None))]
#[allow(clippy::too_many_arguments)]
fn maximize_over_region<'py>(
    py: Python<'py>,
    sources: &PySources,
    target: f64,
    delta: f64,
    distortion: Option<Vec<Vec<f64>>>,
    seed: u64,
    starts: usize,
    grid_step: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let d = self::distortion(distortion, sources.inner.alphabet_size())?;
    let spec = RegionSpec::new(sources.inner.clone(), delta).py()?;
    let cfg = config(seed, starts, grid_step);
    let r = py
        .detach(|| optimizer::maximize_over_region(&spec, &d, target, &cfg))
        .py()?;
    result_dict(py, &r)
}

/// Same maximization restricted to mixtures of the sources.
#[pyfunction]
#[pyo3(signature = (sources, target, distortion = None, seed = 0))]
fn maximize_over_hull<'py>(
    py: Python<'py>,
    sources: &PySources,
    target: f64,
    distortion: Option<Vec<Vec<f64>>>,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let d = self::distortion(distortion, sources.inner.alphabet_size())?;
    let cfg = config(seed, 8, None);
    let r = py
        .detach(|| optimizer::maximize_over_hull(&sources.inner, &d, target, &cfg))
        .py()?;
    result_dict(py, &r)
}

/// Monte Carlo play of the game; `codebook_distortion` builds a covering
/// codebook first and scores against it.
#[pyfunction]
#[pyo3(signature = (sources, rule, n, trials, seed = 0, delta = 0.0, distortion = None, codebook_distortion = None))]
#[allow(clippy::too_many_arguments)]
fn simulate_game<'py>(
    py: Python<'py>,
    sources: &PySources,
    rule: &PyRule,
    n: usize,
    trials: usize,
    seed: u64,
    delta: f64,
    distortion: Option<Vec<Vec<f64>>>,
    codebook_distortion: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let d = self::distortion(distortion, sources.inner.alphabet_size())?;
    let spec = RegionSpec::new(sources.inner.clone(), delta).py()?;
    let (report, book) = py
        .detach(|| -> switchrd::Result<_> {
            let book = codebook_distortion
                .map(|t| build_covering_codebook(&spec, &d, t, n))
                .transpose()?;
            let report = simulate(&spec, &rule.0, book.as_ref(), &d, n, trials, seed)?;
            Ok((report, book))
        })
        .py()?;
    let out = PyDict::new(py);
    out.set_item("empirical_type", report.empirical_type.probs().to_vec())?;
    out.set_item("mean_distortion", report.mean_distortion)?;
    out.set_item("distortion_stderr", report.distortion_stderr)?;
    out.set_item("out_of_region", report.out_of_region)?;
    out.set_item("out_of_region_stderr", report.out_of_region_stderr)?;
    out.set_item("trials", report.trials)?;
    out.set_item("n", report.n)?;
    out.set_item("seed", report.seed)?;
    if let Some(b) = book {
        out.set_item("codebook_size", b.len())?;
        out.set_item("codebook_rate", b.rate())?;
    }
    Ok(out)
}

/// Bound on the probability that a block type leaves the relaxed region.
#[pyfunction]
fn converse_bound(n: usize, delta: f64, alphabet: usize) -> PyResult<f64> {
    converse(n, delta, alphabet).py()
}

#[pymodule]
#[pyo3(name = "switchrd")]
fn switchrd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySources>()?;
    m.add_class::<PyRule>()?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add_function(wrap_pyfunction!(rate_at_distortion, m)?)?;
    m.add_function(wrap_pyfunction!(rd_curve, m)?)?;
    m.add_function(wrap_pyfunction!(maximize_over_region, m)?)?;
    m.add_function(wrap_pyfunction!(maximize_over_hull, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_game, m)?)?;
    m.add_function(wrap_pyfunction!(converse_bound, m)?)?;
    Ok(())
}
