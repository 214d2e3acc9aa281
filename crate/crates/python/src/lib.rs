//! Python bindings for `carnot_lab`.
//!
//! Group elements and co-vectors cross the boundary as lists of floats.
//! Norms are given by name (`"euclidean"`, `"l1"`, `"linfty"`) or as a JSON
//! norm document.

use carnot_lab::escape::{self, EscapeReport, HeisenbergComparison};
use carnot_lab::{CarnotGroup, Covector, GroupElement, NormSpec, StratifiedAlgebra};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: carnot_lab::Error) -> PyErr {
    match e {
        carnot_lab::Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_norm(norm: &str) -> PyResult<NormSpec> {
    norm.parse().map_err(to_py)
}

/// A stratified nilpotent Lie algebra given by its structure constants.
#[pyclass(name = "Algebra", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyAlgebra {
    inner: StratifiedAlgebra,
}

#[pymethods]
impl PyAlgebra {
    /// `heisenberg`, `filiform2` … `filiform6` or `free-step2-rank3`.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        StratifiedAlgebra::builtin(name)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        StratifiedAlgebra::from_json_str(text)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    /// A builtin name or a path to an algebra file.
    #[staticmethod]
    fn resolve(source: &str) -> PyResult<Self> {
        StratifiedAlgebra::resolve(source)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn builtin_names() -> Vec<&'static str> {
        StratifiedAlgebra::builtin_names().to_vec()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn step(&self) -> usize {
        self.inner.step()
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn strata(&self) -> Vec<usize> {
        self.inner.strata().to_vec()
    }

    /// List of `(invariant, passed, detail)`.
    fn validate(&self) -> Vec<(String, bool, String)> {
        self.inner
            .validate()
            .checks
            .iter()
            .map(|c| (c.invariant.to_string(), c.passed, c.detail.clone()))
            .collect()
    }

    fn bracket(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<f64>> {
        let x = carnot_lab::AlgebraVector(x);
        let y = carnot_lab::AlgebraVector(y);
        self.inner.bracket(&x, &y).map(|v| v.0).map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.to_document()).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("Algebra('{}', strata={:?})", self.inner.name(), self.inner.strata())
    }
}

/// The simply connected group of an [`Algebra`] in exponential coordinates.
#[pyclass(name = "Group", frozen)]
pub struct PyGroup {
    inner: CarnotGroup,
}

#[pymethods]
impl PyGroup {
    #[new]
    fn new(algebra: &PyAlgebra) -> Self {
        Self {
            inner: CarnotGroup::new(algebra.inner.clone()),
        }
    }

    #[getter]
    fn algebra(&self) -> PyAlgebra {
        PyAlgebra {
            inner: self.inner.algebra().clone(),
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn identity(&self) -> Vec<f64> {
        self.inner.identity().0
    }

    fn multiply(&self, g: Vec<f64>, h: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner
            .multiply(&GroupElement(g), &GroupElement(h))
            .map(|p| p.0)
            .map_err(to_py)
    }

    fn inverse(&self, g: Vec<f64>) -> Vec<f64> {
        GroupElement(g).inverse().0
    }

    fn dilate(&self, tau: f64, g: Vec<f64>) -> Vec<f64> {
        self.inner.dilate(tau, &GroupElement(g)).0
    }

    fn quasinorm(&self, g: Vec<f64>) -> f64 {
        self.inner.homogeneous_quasinorm(&GroupElement(g))
    }

    fn coadjoint(&self, g: Vec<f64>, covector: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner
            .coadjoint(&GroupElement(g), &Covector(covector))
            .map(|c| c.0)
            .map_err(to_py)
    }

    fn dilation_field(&self, g: Vec<f64>) -> Vec<f64> {
        self.inner.dilation_field(&GroupElement(g))
    }

    /// Coefficients of the dilation field in the left-invariant frame.
    fn dilation_field_coefficients(&self, g: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.dilation_field_coefficients(&GroupElement(g)).map_err(to_py)
    }

    fn is_central(&self, g: Vec<f64>) -> bool {
        self.inner.is_central(&GroupElement(g))
    }

    /// Integrates the normal curve of `covector`. Returns a dict with
    /// `times`, `points`, `controls`, `speeds` and `pmp_residual`.
    #[pyo3(signature = (covector, horizon, h, norm = "euclidean", start = None))]
    fn integrate<'py>(
        &self,
        py: Python<'py>,
        covector: Vec<f64>,
        horizon: f64,
        h: f64,
        norm: &str,
        start: Option<Vec<f64>>,
    ) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
        let norm = parse_norm(norm)?;
        let lam = Covector(covector);
        let g0 = start.map(GroupElement).unwrap_or_else(|| self.inner.identity());
        let trace = py
            .detach(|| carnot_lab::integrate_normal(&self.inner, &norm, &lam, &g0, horizon, h))
            .map_err(to_py)?;
        let residual = carnot_lab::pmp_identity_residual(&self.inner, &norm, &lam, &trace).map_err(to_py)?;
        let d = pyo3::types::PyDict::new(py);
        d.set_item("times", &trace.times)?;
        d.set_item("points", trace.points.iter().map(|p| p.0.clone()).collect::<Vec<_>>())?;
        d.set_item(
            "controls",
            trace.controls.iter().map(|u| u.0.clone()).collect::<Vec<_>>(),
        )?;
        d.set_item("speeds", trace.speeds())?;
        d.set_item("pmp_residual", residual)?;
        Ok(d)
    }

    /// Runs the escape experiment and returns one [`EscapeRun`] per co-vector.
    #[pyo3(signature = (covectors, horizon, h, norm = "euclidean"))]
    fn escape(
        &self,
        py: Python<'_>,
        covectors: Vec<Vec<f64>>,
        horizon: f64,
        h: f64,
        norm: &str,
    ) -> PyResult<Vec<PyEscapeRun>> {
        let norm = parse_norm(norm)?;
        let covs: Vec<Covector> = covectors.into_iter().map(Covector).collect();
        let report = py
            .detach(|| escape::run_escape(&self.inner, &norm, &covs, horizon, h))
            .map_err(to_py)?;
        Ok(escape_runs(&report))
    }

    fn __repr__(&self) -> String {
        format!("Group('{}')", self.inner.algebra().name())
    }
}

/// Summary of one escape series.
#[pyclass(name = "EscapeRun", frozen, get_all)]
pub struct PyEscapeRun {
    cov_idx: usize,
    covector: Vec<f64>,
    n_lambda: f64,
    status: String,
    slope: Option<f64>,
    slope_floor: f64,
    c_emp: Option<f64>,
    first_exceed: Option<f64>,
    retreat_ratio: Option<f64>,
    final_distance: f64,
}

#[pymethods]
impl PyEscapeRun {
    fn __repr__(&self) -> String {
        format!(
            "EscapeRun(cov_idx={}, status='{}', slope={:?})",
            self.cov_idx, self.status, self.slope
        )
    }
}

fn escape_runs(report: &EscapeReport) -> Vec<PyEscapeRun> {
    report
        .runs
        .iter()
        .map(|r| PyEscapeRun {
            cov_idx: r.cov_idx,
            covector: r.covector.0.clone(),
            n_lambda: r.n_lambda,
            status: r.status.label().to_string(),
            slope: r.slope,
            slope_floor: report.slope_floor(),
            c_emp: r.c_emp,
            first_exceed: r.first_exceed,
            retreat_ratio: r.retreat_ratio,
            final_distance: r.distances.last().copied().unwrap_or(0.0),
        })
        .collect()
}

/// Closed-form versus integrated Heisenberg circle on `[0, 1]`.
#[pyclass(name = "HeisenbergComparison", frozen, get_all)]
pub struct PyHeisenbergComparison {
    n: u32,
    closed_endpoint: Vec<f64>,
    integrated_endpoint: Vec<f64>,
    max_deviation: f64,
    max_speed_deviation: f64,
    pmp_residual: f64,
    passes: bool,
}

impl From<HeisenbergComparison> for PyHeisenbergComparison {
    fn from(c: HeisenbergComparison) -> Self {
        Self {
            n: c.n,
            closed_endpoint: c.closed_endpoint.to_vec(),
            integrated_endpoint: c.integrated_endpoint.to_vec(),
            max_deviation: c.max_deviation,
            max_speed_deviation: c.max_speed_deviation,
            pmp_residual: c.pmp_residual,
            passes: c.passes(),
        }
    }
}

/// Deterministic unit-norm co-vectors from `seed`.
#[pyfunction]
fn sample_unit_covectors(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    escape::sample_unit_covectors(n, count, seed)
        .into_iter()
        .map(|c| c.0)
        .collect()
}

#[pyfunction]
#[pyo3(signature = (n = 1, h = 1e-4))]
fn example_heisenberg(n: u32, h: f64) -> PyResult<PyHeisenbergComparison> {
    escape::example_heisenberg(n, h).map(Into::into).map_err(to_py)
}

/// `λ(Vec δ(g)) / (N(λ) max(D, D^s))`, or `None` at the identity.
#[pyfunction]
fn growth_ratio(group: &PyGroup, covector: Vec<f64>, g: Vec<f64>) -> PyResult<Option<f64>> {
    escape::growth_ratio(&group.inner, &Covector(covector), &GroupElement(g)).map_err(to_py)
}

#[pymodule]
mod carnotlab {
    #[pymodule_export]
    use super::{
        example_heisenberg, growth_ratio, sample_unit_covectors, PyAlgebra, PyEscapeRun, PyGroup,
        PyHeisenbergComparison,
    };
}
