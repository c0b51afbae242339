//! Python bindings: the lattice estimators, pointwise random-design
//! evaluation, the least-squares solver, rate evaluators and the Monte Carlo
//! harness, over plain Python lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use isoblock::block::{self, EstimatorKind};
use isoblock::graph::Dag;
use isoblock::lattice::{CompressedGrid, Field, LatticeShape, PointCloud};
use isoblock::rates;
use isoblock::sim;
use isoblock::solver::{self, SolveOptions};
use isoblock::IsoError;

fn err(e: IsoError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn field(dims: Vec<usize>, values: Vec<f64>) -> PyResult<Field> {
    let shape = LatticeShape::new(dims).map_err(err)?;
    Field::new(shape, values).map_err(err)
}

/// Weighted pool-adjacent-violators: the non-decreasing least-squares fit.
#[pyfunction]
#[pyo3(signature = (y, w=None))]
fn pava(y: Vec<f64>, w: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    let w = w.unwrap_or_else(|| vec![1.0; y.len()]);
    solver::pava_1d(&y, &w).map_err(err)
}

/// Fit one estimator on a full lattice; `kind` is one of
/// "maxmin", "minmax", "mid", "lse". Values are in site order with the first
/// dimension fastest-varying.
#[pyfunction]
#[pyo3(signature = (dims, values, kind, tol=1e-10))]
fn fit_lattice(dims: Vec<usize>, values: Vec<f64>, kind: &str, tol: f64) -> PyResult<Vec<f64>> {
    let y = field(dims, values)?;
    let kind = EstimatorKind::parse(kind).map_err(err)?;
    let fit = match kind {
        EstimatorKind::MaxMin => block::max_min_lattice(&y),
        EstimatorKind::MinMax => block::min_max_lattice(&y),
        EstimatorKind::Mid => block::block_mid_lattice(&y),
        EstimatorKind::Lse => {
            let opts = SolveOptions::for_shape(y.shape()).with_tol(tol);
            solver::lse_lattice(&y, &opts).fit
        }
    };
    Ok(fit.into_values())
}

/// Evaluate a block estimator at an arbitrary point of the unit cube given
/// scattered observations.
#[pyfunction]
fn evaluate_at(
    points: Vec<Vec<f64>>,
    responses: Vec<f64>,
    x: Vec<f64>,
    kind: &str,
) -> PyResult<f64> {
    let d = x.len();
    let cloud = PointCloud::new(d, points, responses).map_err(err)?;
    let grid = CompressedGrid::build(&cloud);
    let kind = EstimatorKind::parse(kind).map_err(err)?;
    block::evaluate_at(&x, &grid, kind).map_err(err)
}

/// Least-squares isotonic values on a DAG; vertices are 0-based indices and
/// an edge `(a, b)` means `f(a) <= f(b)`. Returns one value per vertex,
/// `None` for unobserved vertices.
#[pyfunction]
#[pyo3(signature = (n, edges, observations, tol=1e-10))]
fn lse_dag(
    n: usize,
    edges: Vec<(usize, usize)>,
    observations: Vec<Vec<f64>>,
    tol: f64,
) -> PyResult<Vec<Option<f64>>> {
    let dag = Dag::new(n, edges, observations).map_err(err)?;
    let opts = SolveOptions {
        tol,
        max_sweeps: 500_000,
        certificate_check: false,
    };
    Ok(solver::lse_dag(&dag, &opts).map_err(err)?.values)
}

/// Exhaustive level-set values at the design vertices of a DAG.
#[pyfunction]
fn lse_minimax(
    n: usize,
    edges: Vec<(usize, usize)>,
    observations: Vec<Vec<f64>>,
) -> PyResult<Vec<Option<f64>>> {
    let dag = Dag::new(n, edges, observations).map_err(err)?;
    isoblock::graph::lse_minimax_bruteforce(&dag).map_err(err)
}

/// Critical regime index for loss exponent `q` in dimension `d`.
#[pyfunction]
fn critical_index(q: f64, d: usize) -> PyResult<usize> {
    rates::critical_index(q, d).map_err(err)
}

/// Thresholds t_1..t_{d+1} for non-increasing lattice sides.
#[pyfunction]
fn thresholds(dims: Vec<usize>) -> PyResult<Vec<f64>> {
    rates::thresholds(&dims).map_err(err)
}

/// Minimax lower-bound rate: returns `(value, regime, log_factor)`.
#[pyfunction]
#[pyo3(signature = (q, dims, delta_star, sigma=1.0))]
fn minimax_lower_rate(
    q: f64,
    dims: Vec<usize>,
    delta_star: f64,
    sigma: f64,
) -> PyResult<(f64, String, f64)> {
    let rq = rates::RateQuery::new(q, dims, delta_star, sigma).map_err(err)?;
    let r = rates::minimax_lower_rate(&rq).map_err(err)?;
    Ok((r.value, r.regime, r.log_factor))
}

/// Block-estimator upper rate: returns `(value, regime, log_factor)`.
#[pyfunction]
#[pyo3(signature = (q, dims, delta_star, sigma=1.0))]
fn block_upper_rate(
    q: f64,
    dims: Vec<usize>,
    delta_star: f64,
    sigma: f64,
) -> PyResult<(f64, String, f64)> {
    let rq = rates::RateQuery::new(q, dims, delta_star, sigma).map_err(err)?;
    let r = rates::block_upper_rate(&rq).map_err(err)?;
    Ok((r.value, r.regime, r.log_factor))
}

/// Piecewise-constant adaptation rate factor.
#[pyfunction]
fn adaptation_rate(q: f64, d_k: usize, n: usize, k: usize) -> PyResult<f64> {
    rates::adaptation_rate(q, d_k, n, k).map_err(err)
}

/// Variable-selection adaptation rate: `(value, regime, log_factor)`.
#[pyfunction]
fn selection_rate(
    q: f64,
    d: usize,
    s: usize,
    n: usize,
    delta_ns: f64,
) -> PyResult<(f64, String, f64)> {
    let r = rates::selection_rate(q, d, s, n, delta_ns).map_err(err)?;
    Ok((r.value, r.regime, r.log_factor))
}

/// Random-design integrated-risk rate: `(value, regime, log_factor)`.
#[pyfunction]
fn random_design_rate(q: f64, d: usize, n: usize, delta01: f64) -> PyResult<(f64, String, f64)> {
    let r = rates::random_design_rate(q, d, n, delta01).map_err(err)?;
    Ok((r.value, r.regime, r.log_factor))
}

/// Run one bundled experiment and return the full risk report as a JSON
/// string (losses, means, paired test).
#[pyfunction]
#[pyo3(signature = (experiment, reps=500, seed=4, sigma=1.0, tol=1e-10))]
fn monte_carlo(experiment: &str, reps: usize, seed: u64, sigma: f64, tol: f64) -> PyResult<String> {
    let id = sim::ExperimentId::parse(experiment).map_err(err)?;
    let spec = sim::ExperimentSpec::defaults(id);
    let noise = sim::NoiseModel::new(sigma).map_err(err)?;
    let opts = SolveOptions::for_shape(&spec.dims).with_tol(tol);
    let kinds = [EstimatorKind::Lse, EstimatorKind::MaxMin];
    let report = sim::monte_carlo(&spec, &noise, &kinds, reps, seed, &opts).map_err(err)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Search a lattice for a field where the max-min and min-max branches differ
/// at a design site; returns `(values, site, max_min, min_max)` or `None`.
#[pyfunction]
#[pyo3(signature = (dims, seed=4, budget=100_000))]
fn counterexample_search(
    dims: Vec<usize>,
    seed: u64,
    budget: usize,
) -> PyResult<Option<(Vec<f64>, usize, f64, f64)>> {
    let shape = LatticeShape::new(dims).map_err(err)?;
    Ok(block::counterexample_search(&shape, seed, budget, 1e-9)
        .map(|(y, site, lo, hi)| (y.into_values(), site, lo, hi)))
}

#[pymodule]
fn isoblock_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(pava, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lattice, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_at, m)?)?;
    m.add_function(wrap_pyfunction!(lse_dag, m)?)?;
    m.add_function(wrap_pyfunction!(lse_minimax, m)?)?;
    m.add_function(wrap_pyfunction!(critical_index, m)?)?;
    m.add_function(wrap_pyfunction!(thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(minimax_lower_rate, m)?)?;
    m.add_function(wrap_pyfunction!(block_upper_rate, m)?)?;
    m.add_function(wrap_pyfunction!(adaptation_rate, m)?)?;
    m.add_function(wrap_pyfunction!(selection_rate, m)?)?;
    m.add_function(wrap_pyfunction!(random_design_rate, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample_search, m)?)?;
    Ok(())
}
