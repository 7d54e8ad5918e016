use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use squeezefit::dataset::{build_constraints_full, build_constraints_nn};
use squeezefit::duality::certify as certify_matrix;
use squeezefit::solver::solve as solve_program;
use squeezefit::{LabeledDataset, Mode, SqueezeConfig, SymMatrix, Verdict};

fn to_py(e: squeezefit::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    match mode {
        "hard" => Ok(Mode::Hard),
        "hinge" => Ok(Mode::Hinge),
        "zero_plus" => Ok(Mode::ZeroPlus),
        "hinge_zero_plus" => Ok(Mode::HingeZeroPlus),
        other => Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    }
}

fn rows_of(m: &SymMatrix) -> Vec<Vec<f64>> {
    let d = m.dim();
    m.row_major().chunks(d).map(|r| r.to_vec()).collect()
}

/// Solves the squeeze program on labeled points.
///
/// Returns a dict with the matrix `M` (list of rows), its trace, the worst
/// constraint violation and whether the solver converged.
#[pyfunction]
#[pyo3(signature = (points, labels, delta=1.0, mode="hard", lam=1.0, neighbors=None))]
fn solve<'py>(
    py: Python<'py>,
    points: Vec<Vec<f64>>,
    labels: Vec<i64>,
    delta: f64,
    mode: &str,
    lam: f64,
    neighbors: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let ds = LabeledDataset::from_rows(&points, labels).map_err(to_py)?;
    let z = match neighbors {
        Some(s) => build_constraints_nn(&ds, s),
        None => build_constraints_full(&ds),
    }
    .map_err(to_py)?;
    let config = SqueezeConfig {
        delta,
        lambda: lam,
        mode: parse_mode(mode)?,
        ..Default::default()
    };
    let r = solve_program(&z, &config).map_err(to_py)?;

    let out = PyDict::new(py);
    out.set_item("M", rows_of(&r.m))?;
    out.set_item("trace", r.objective)?;
    out.set_item("worst_violation", r.worst_violation)?;
    out.set_item("converged", r.converged)?;
    out.set_item("iterations", r.iterations)?;
    Ok(out)
}

/// Checks a candidate matrix for feasibility and optimality.
#[pyfunction]
fn certify<'py>(
    py: Python<'py>,
    points: Vec<Vec<f64>>,
    labels: Vec<i64>,
    matrix: Vec<Vec<f64>>,
    delta: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let ds = LabeledDataset::from_rows(&points, labels).map_err(to_py)?;
    let d = matrix.len();
    if matrix.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    let flat: Vec<f64> = matrix.into_iter().flatten().collect();
    let m = SymMatrix::from_row_major(d, &flat).map_err(to_py)?;
    let report = certify_matrix(&ds, &m, delta).map_err(to_py)?;

    let verdict = match report.verdict {
        Verdict::Certified => "certified",
        Verdict::GapOnly => "gap_only",
        Verdict::Failed => "failed",
    };
    let out = PyDict::new(py);
    out.set_item("verdict", verdict)?;
    out.set_item("primal_value", report.primal_value)?;
    out.set_item("dual_value", report.dual_value)?;
    out.set_item("gap", report.gap)?;
    out.set_item("min_length", report.min_length)?;
    out.set_item("violating_pair", report.violating_pair)?;
    Ok(out)
}

#[pymodule]
fn squeezefit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    Ok(())
}
