//! Python bindings: built-in models, spectra, slow manifolds, reduced maps and the bundled studies.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fastslow::analysis::{self, regimes};
use fastslow::config::Config;
use fastslow::io::to_json;
use fastslow::manifold::{self, Grid};
use fastslow::models::chialvo::{self, ChialvoParams, RegimeCase};
use fastslow::models::euler::DiagonalOdeParams;
use fastslow::models::{self, ModelSpec};
use fastslow::{reduced, spectral, Direction, Matrix, Vector};

create_exception!(fastslow_py, NumericalError, PyRuntimeError);

fn err(e: fastslow::Error) -> PyErr {
    if e.is_usage() {
        PyValueError::new_err(e.to_string())
    } else {
        NumericalError::new_err(e.to_string())
    }
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn list(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

/// A registered fast-slow map `z -> z + N f + eps G`.
#[pyclass(name = "FastSlowMap", frozen)]
struct PyMap {
    spec: ModelSpec,
}

impl PyMap {
    fn point(&self, z: Vec<f64>) -> PyResult<Vector> {
        if z.len() != self.spec.map.n() {
            return Err(PyValueError::new_err(format!(
                "point has {} entries, model needs {}",
                z.len(),
                self.spec.map.n()
            )));
        }
        Ok(Vector::from_vec(z))
    }
}

#[pymethods]
impl PyMap {
    #[new]
    #[pyo3(signature = (model, params=None))]
    fn new(model: &str, params: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        let spec = models::build(model, &params.unwrap_or_default()).map_err(err)?;
        Ok(PyMap { spec })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.spec.name
    }

    /// Phase-space dimension.
    #[getter]
    fn n(&self) -> usize {
        self.spec.map.n()
    }

    /// Number of slow variables.
    #[getter]
    fn k(&self) -> usize {
        self.spec.map.k()
    }

    fn evaluate(&self, z: Vec<f64>, eps: f64) -> PyResult<Vec<f64>> {
        Ok(list(&self.spec.map.evaluate(&self.point(z)?, eps).map_err(err)?))
    }

    fn jacobian(&self, z: Vec<f64>, eps: f64) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.spec.map.jacobian(&self.point(z)?, eps).map_err(err)?))
    }

    /// Orbit of `steps` iterations as a list of points; stops at a domain exit.
    fn iterate(&self, z0: Vec<f64>, eps: f64, steps: usize) -> PyResult<Vec<Vec<f64>>> {
        let t = self.spec.map.iterate(&self.point(z0)?, eps, steps).map_err(err)?;
        Ok(t.points.iter().map(list).collect())
    }

    /// Point of the critical manifold over chart parameters `x`.
    fn critical_point(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(list(&self.spec.critical_point(&Vector::from_vec(x)).map_err(err)?))
    }

    /// Nontrivial multipliers at `z` on the critical manifold, as (re, im) pairs.
    fn multipliers(&self, z: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
        let mu = spectral::nontrivial_multipliers(&self.spec.map, &self.point(z)?).map_err(err)?;
        Ok(mu.iter().map(|m| (m.re, m.im)).collect())
    }

    #[pyo3(signature = (z, tol=spectral::HYPERBOLICITY_TOL))]
    fn classify(&self, z: Vec<f64>, tol: f64) -> PyResult<String> {
        let c = spectral::classify_point(&self.spec.map, &self.point(z)?, tol).map_err(err)?;
        Ok(format!("{c:?}"))
    }

    /// Oblique projection onto the tangent space of the critical manifold along the fast fibers.
    fn projection(&self, z: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&manifold::projection(&self.spec.map, &self.point(z)?).map_err(err)?.matrix))
    }

    fn reduced_step(&self, z: Vec<f64>, eps: f64) -> PyResult<Vec<f64>> {
        Ok(list(&reduced::reduced_step(&self.spec.map, &self.point(z)?, eps).map_err(err)?))
    }

    fn mth_iterate_reduced(&self, z: Vec<f64>, eps: f64, m: usize) -> PyResult<Vec<f64>> {
        Ok(list(
            &reduced::mth_iterate_reduced(&self.spec.map, &self.point(z)?, eps, m).map_err(err)?,
        ))
    }

    /// Singular points along the first chart parameter, scanned on `n` samples of [lo, hi].
    fn singularities(&self, lo: f64, hi: f64, n: usize) -> PyResult<Vec<(f64, String, f64, f64)>> {
        if n < 2 || !(hi > lo) {
            return Err(PyValueError::new_err("need lo < hi and n >= 2"));
        }
        let map = &self.spec.map;
        let ts: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let mid = self.spec.sample_x(&vec![0.5; map.k()]);
        let mut seed = map.chart().join(&mid, &self.spec.y_seed);
        seed[map.chart().param[0]] = ts[0];
        let hits = spectral::locate_singularities(map, &spectral::ChartCurve { map }, &ts, &seed, 1e-12)
            .map_err(err)?;
        Ok(hits
            .into_iter()
            .map(|h| (h.coord, format!("{:?}", h.kind), h.mu_re, h.mu_im))
            .collect())
    }

    /// Critical graph, first-order and numeric slow manifolds on a 1-D chart grid.
    ///
    /// Returns `(x, phi0, first_order, numeric)`, each graph as one row per node.
    #[pyo3(signature = (lo, hi, n, eps, backward=false))]
    #[allow(clippy::type_complexity)]
    fn slow_manifold(
        &self,
        lo: f64,
        hi: f64,
        n: usize,
        eps: f64,
        backward: bool,
    ) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let map = &self.spec.map;
        let grid = Grid::line(lo, hi, n).map_err(err)?;
        let critical = manifold::solve_critical_graph(map, &grid, &self.spec.y_seed).map_err(err)?;
        let first = manifold::slow_manifold_first_order(map, &critical, eps).map_err(err)?;
        let direction = if backward { Direction::Backward } else { Direction::Forward };
        let numeric = if eps == 0.0 {
            critical.clone()
        } else {
            manifold::slow_manifold_numeric(map, &critical, eps, direction).map_err(err)?
        };
        let table = |g: &fastslow::GraphManifold| g.values().iter().map(list).collect();
        Ok((grid.axis(0), table(&critical), table(&first), table(&numeric)))
    }

    fn __repr__(&self) -> String {
        format!("FastSlowMap('{}', n={}, k={})", self.spec.name, self.spec.map.n(), self.spec.map.k())
    }
}

/// Runs the bundled analysis for a JSON config; returns the JSON report.
#[pyfunction]
fn analyze(config_json: &str) -> PyResult<String> {
    let cfg = Config::parse(config_json).map_err(err)?;
    Ok(to_json(&analysis::run_analyze(&cfg).map_err(err)?))
}

/// Chialvo regime case "I".."IV": returns `(label, report_json, orbit)`.
#[pyfunction]
#[pyo3(signature = (case, eps=1e-3, steps=regimes::DEFAULT_STEPS))]
fn run_regime(case: &str, eps: f64, steps: usize) -> PyResult<(String, String, Vec<Vec<f64>>)> {
    let c = RegimeCase::parse(case).ok_or_else(|| PyValueError::new_err(format!("unknown case '{case}'")))?;
    let (mut rep, traj) =
        regimes::run_regimes_with(ChialvoParams::regime(c), eps, regimes::DEFAULT_Z0, steps).map_err(err)?;
    rep.case = Some(c);
    Ok((format!("{:?}", rep.label), to_json(&rep), traj.points.iter().map(list).collect()))
}

/// `(eps, h, distance, solver_error)` rows for the diagonal Euler test system.
#[pyfunction]
#[pyo3(signature = (eps, h, n=101))]
fn euler_study(eps: Vec<f64>, h: Vec<f64>, n: usize) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let grid = Grid::line(0.0, 1.0, n).map_err(err)?;
    let rows = analysis::run_euler_study(DiagonalOdeParams::default(), &eps, &h, &grid).map_err(err)?;
    Ok(rows.iter().map(|r| (r.eps, r.h, r.distance, r.solver_error)).collect())
}

/// Closed-form Chialvo quantities for `(a, b, c, k)`: folds, flip, and `mu(v)`, `phi0(v)` at `v`.
#[pyfunction]
#[pyo3(signature = (v, a=1.0, b=5.0, c=3.5, k=0.035))]
fn chialvo_closed_form(v: f64, a: f64, b: f64, c: f64, k: f64) -> PyResult<(Vec<f64>, f64, f64, f64)> {
    let p = ChialvoParams::new_allow_zero_k(a, b, c, k).map_err(err)?;
    Ok((chialvo::fold_points(k), chialvo::flip_point(k), chialvo::mu(&p, v), chialvo::phi0(&p, v)))
}

#[pymodule]
fn fastslow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMap>()?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(run_regime, m)?)?;
    m.add_function(wrap_pyfunction!(euler_study, m)?)?;
    m.add_function(wrap_pyfunction!(chialvo_closed_form, m)?)?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add("MODELS", models::BUILTIN.to_vec())?;
    Ok(())
}
