use std::sync::Arc;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use superliouville::census::{self, SurfaceClass};
use superliouville::energy::{el_residual, evaluate as evaluate_energy};
use superliouville::runner::{self, exit_code, parse_config, slfd};
use superliouville::{build_geometry, eigendecompose, Coupling, Error, ScalarField, SpinorField, TorusGeometry};

fn to_py(e: Error) -> PyErr {
    if exit_code(&e) == 2 {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn geometry(grid: usize, lengths: Option<(f64, f64)>, offset: (f64, f64)) -> PyResult<Arc<TorusGeometry>> {
    let (l1, l2) = lengths.unwrap_or((2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI));
    build_geometry(l1, l2, grid, grid, offset).map_err(to_py)
}

/// Dirac modes as `(j, lambda, k1, k2)` tuples by increasing `|lambda|`.
#[pyfunction]
#[pyo3(signature = (grid=32, lengths=None, offset=(0.5, 0.0), count=None))]
fn spectrum(
    grid: usize,
    lengths: Option<(f64, f64)>,
    offset: (f64, f64),
    count: Option<usize>,
) -> PyResult<Vec<(i64, f64, i64, i64)>> {
    let g = geometry(grid, lengths, offset)?;
    let s = eigendecompose(&g);
    Ok(s.modes()
        .into_iter()
        .take(count.unwrap_or(usize::MAX))
        .map(|m| {
            let [k1, k2] = g.signed_mode(m.bin);
            (m.index, m.lambda, k1, k2)
        })
        .collect())
}

/// `(even, odd)` spin structure counts for a genus.
#[pyfunction]
fn structure_counts(genus: u32) -> PyResult<(u128, u128)> {
    census::structure_counts(genus).map_err(to_py)
}

/// Census table as a dict with `rows` of `(descriptor, count, h0)`.
#[pyfunction]
#[pyo3(signature = (genus, surface_class=None))]
fn census_table<'py>(py: Python<'py>, genus: u32, surface_class: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let class = match surface_class {
        Some(c) => c.parse().map_err(to_py)?,
        None if genus == 1 => SurfaceClass::Torus,
        None => SurfaceClass::Hyperelliptic,
    };
    let entry = census::known_case(genus, class).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("genus", entry.genus)?;
    d.set_item("surface_class", entry.surface_class.name())?;
    let rows: Vec<(String, u128, u64)> = entry.rows.iter().map(|r| (r.descriptor.clone(), r.count, r.h0)).collect();
    d.set_item("rows", rows)?;
    d.set_item("total", entry.total())?;
    d.set_item("overlap", entry.overlap.clone())?;
    Ok(d)
}

/// Energy breakdown and residual norms of `(u, psi)`. `u` is row-major with
/// `grid**2` values; `psi` holds both components in turn.
#[pyfunction]
#[pyo3(signature = (rho, u, psi, grid=32, lengths=None, offset=(0.5, 0.0)))]
fn evaluate<'py>(
    py: Python<'py>,
    rho: f64,
    u: Vec<f64>,
    psi: Vec<Complex64>,
    grid: usize,
    lengths: Option<(f64, f64)>,
    offset: (f64, f64),
) -> PyResult<Bound<'py, PyDict>> {
    let g = geometry(grid, lengths, offset)?;
    let coupling = Coupling::new(Arc::new(eigendecompose(&g)), rho).map_err(to_py)?;
    let u = ScalarField::new(g.clone(), u).map_err(to_py)?;
    let psi = SpinorField::new(g, psi).map_err(to_py)?;
    let e = evaluate_energy(&coupling, &u, &psi).map_err(to_py)?;
    let (ru, rp) = el_residual(&coupling, &u, &psi).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("J", e.j)?;
    d.set_item("F", e.f)?;
    d.set_item("Q", e.q)?;
    d.set_item("residual_u", ru.norm_l2())?;
    d.set_item("residual_psi", rp.norm_l2())?;
    Ok(d)
}

/// Run a solve from config text. Returns `(exit_code, report_json)`.
#[pyfunction]
fn run(py: Python<'_>, config: &str) -> PyResult<(i32, String)> {
    let cfg = parse_config(config).map_err(to_py)?;
    let outcome = py.detach(|| runner::run(&cfg)).map_err(to_py)?;
    Ok((outcome.exit_code, outcome.report.to_json().map_err(to_py)?))
}

/// Fitted Moser-Trudinger constant.
#[pyfunction]
#[pyo3(signature = (grid=32, samples=500, seed=7))]
fn mt_probe(grid: usize, samples: usize, seed: u64) -> PyResult<f64> {
    let g = geometry(grid, None, (0.5, 0.0))?;
    Ok(runner::mt_probe(&g, samples, seed).map_err(to_py)?.fitted_c)
}

/// Values of an SLFD dump: a list of floats or of complex numbers.
#[pyfunction]
fn load_field(py: Python<'_>, path: &str) -> PyResult<Py<PyAny>> {
    let dump = slfd::load(std::path::Path::new(path)).map_err(to_py)?;
    Ok(match dump.data {
        slfd::FieldData::Scalar(v) => v.into_pyobject(py)?.into_any().unbind(),
        slfd::FieldData::Spinor(v) => v.into_pyobject(py)?.into_any().unbind(),
    })
}

#[pymodule]
fn superliouville_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(structure_counts, m)?)?;
    m.add_function(wrap_pyfunction!(census_table, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(mt_probe, m)?)?;
    m.add_function(wrap_pyfunction!(load_field, m)?)?;
    Ok(())
}
