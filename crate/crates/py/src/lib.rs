//! Python bindings for the stosync toolkit: drift fields, Wiener paths,
//! the SDE cocycle, Lyapunov estimators, Gibbs measures, and the
//! synchronization diagnostics, exposed as `stosync_py`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use nalgebra::{DMatrix, DVector};
use stosync::config::ExperimentConfig;
use stosync::diagnostics;
use stosync::field::{build_custom, BuiltinSpec};
use stosync::flow;
use stosync::lyapunov;
use stosync::measure;
use stosync::noise;

fn err(e: stosync::Error) -> PyErr {
    match &e {
        stosync::Error::Config { .. } | stosync::Error::UnknownKind(_) | stosync::Error::Expr(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn vec_to_state(x: &[f64]) -> DVector<f64> {
    DVector::from_vec(x.to_vec())
}

fn state_to_vec(x: &DVector<f64>) -> Vec<f64> {
    x.iter().copied().collect()
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// serde_json::Value -> native Python object.
fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        serde_json::Value::Null => py.None().into_bound(py),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.into_any(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, json_to_py(py, val)?)?;
            }
            dict.into_any()
        }
    })
}

fn report_to_py<'py, T: serde::Serialize>(py: Python<'py>, report: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

/// A drift field b on R^d with optional potential and derivatives.
#[pyclass(name = "DriftField", frozen)]
struct PyDriftField {
    inner: stosync::field::DriftField,
}

#[pymethods]
impl PyDriftField {
    /// Build a builtin field: ou, double_well, v_e, v_s, radial_polynomial,
    /// circle_stratonovich, linear - or custom (per-coordinate expressions
    /// over x1..xd with exp and constants).
    #[new]
    #[pyo3(signature = (kind, dim=None, g_coeffs=None, matrix=None, expr=None, one_sided_lambda=None))]
    fn new(
        kind: &str,
        dim: Option<usize>,
        g_coeffs: Option<Vec<f64>>,
        matrix: Option<Vec<Vec<f64>>>,
        expr: Option<Vec<String>>,
        one_sided_lambda: Option<f64>,
    ) -> PyResult<Self> {
        let spec = match kind {
            "ou" => BuiltinSpec::Ou {
                dim: dim.ok_or_else(|| PyValueError::new_err("ou needs dim"))?,
            },
            "double_well" => BuiltinSpec::DoubleWell {
                dim: dim.ok_or_else(|| PyValueError::new_err("double_well needs dim"))?,
            },
            "v_e" => BuiltinSpec::VE,
            "v_s" => BuiltinSpec::VS,
            "circle_stratonovich" => BuiltinSpec::CircleStratonovich,
            "radial_polynomial" => BuiltinSpec::RadialPolynomial {
                dim: dim.ok_or_else(|| PyValueError::new_err("radial_polynomial needs dim"))?,
                g_coeffs: g_coeffs
                    .ok_or_else(|| PyValueError::new_err("radial_polynomial needs g_coeffs"))?,
            },
            "linear" => {
                let rows =
                    matrix.ok_or_else(|| PyValueError::new_err("linear needs matrix"))?;
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(PyValueError::new_err("matrix must be square"));
                }
                let mut a = DMatrix::zeros(n, n);
                for (i, row) in rows.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        a[(i, j)] = *v;
                    }
                }
                BuiltinSpec::Linear { matrix: a }
            }
            "custom" => {
                let exprs = expr.ok_or_else(|| PyValueError::new_err("custom needs expr"))?;
                let d = dim.unwrap_or(exprs.len());
                let mut f = build_custom(d, &exprs).map_err(err)?;
                if let Some(l) = one_sided_lambda {
                    f = f.with_declared_one_sided(l);
                }
                return Ok(PyDriftField { inner: f });
            }
            other => return Err(PyValueError::new_err(format!("unknown kind `{other}`"))),
        };
        let mut f = spec.build().map_err(err)?;
        if let Some(l) = one_sided_lambda {
            f = f.with_declared_one_sided(l);
        }
        Ok(PyDriftField { inner: f })
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
    fn is_gradient(&self) -> bool {
        self.inner.is_gradient()
    }

    #[getter]
    fn noise_dim(&self) -> usize {
        self.inner.noise_dim()
    }

    #[getter]
    fn one_sided_constant(&self) -> Option<f64> {
        self.inner.one_sided_constant()
    }

    fn drift(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(state_to_vec(&self.inner.eval_drift(&vec_to_state(&x)).map_err(err)?))
    }

    fn jacobian(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(matrix_to_rows(&self.inner.eval_jacobian(&vec_to_state(&x)).map_err(err)?))
    }

    fn potential(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.potential(&vec_to_state(&x)).map_err(err)
    }

    fn lambda_plus(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.lambda_plus(&vec_to_state(&x)).map_err(err)
    }

    fn lambda_minus(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.lambda_minus(&vec_to_state(&x)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("DriftField(name='{}', dim={})", self.inner.name(), self.inner.dim())
    }
}

/// Two-sided reproducible Wiener path with exact shift.
#[pyclass(name = "WienerPath", frozen)]
struct PyWienerPath {
    inner: noise::WienerPath,
}

#[pymethods]
impl PyWienerPath {
    #[new]
    fn new(seed: u64, dim: usize, delta: f64, window: (i64, i64)) -> PyResult<Self> {
        Ok(PyWienerPath {
            inner: noise::WienerPath::sample(seed, dim, delta, window).map_err(err)?,
        })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn origin_offset(&self) -> i64 {
        self.inner.origin_offset()
    }

    #[getter]
    fn window(&self) -> (i64, i64) {
        self.inner.window()
    }

    fn increment(&self, k: i64) -> PyResult<Vec<f64>> {
        Ok(state_to_vec(&self.inner.increment(k).map_err(err)?))
    }

    fn value(&self, t: f64) -> PyResult<Vec<f64>> {
        Ok(state_to_vec(&self.inner.value(t).map_err(err)?))
    }

    fn shift(&self, s: f64) -> PyResult<Self> {
        Ok(PyWienerPath { inner: self.inner.shift(s).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "WienerPath(seed={}, delta={}, window={:?}, offset={})",
            self.inner.seed(),
            self.inner.delta(),
            self.inner.window(),
            self.inner.origin_offset()
        )
    }
}

/// Integrator selection: euler_maruyama | tamed_euler | split_step_implicit.
#[pyclass(name = "IntegratorSpec", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyIntegratorSpec {
    inner: flow::IntegratorSpec,
}

#[pymethods]
impl PyIntegratorSpec {
    #[new]
    #[pyo3(signature = (scheme="tamed_euler", dt=1e-3, newton_tol=1e-12, newton_max_iter=50))]
    fn new(scheme: &str, dt: f64, newton_tol: f64, newton_max_iter: usize) -> PyResult<Self> {
        let scheme = match scheme {
            "euler_maruyama" => flow::Scheme::EulerMaruyama,
            "tamed_euler" => flow::Scheme::TamedEuler,
            "split_step_implicit" => flow::Scheme::SplitStepImplicit,
            other => return Err(PyValueError::new_err(format!("unknown scheme `{other}`"))),
        };
        Ok(PyIntegratorSpec {
            inner: flow::IntegratorSpec { scheme, dt, newton_tol, newton_max_iter },
        })
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    fn __repr__(&self) -> String {
        format!("IntegratorSpec(scheme='{}', dt={})", self.inner.scheme, self.inner.dt)
    }
}

/// Normalized Gibbs measure of a gradient field.
#[pyclass(name = "GibbsMeasure", frozen)]
struct PyGibbsMeasure {
    inner: measure::GibbsMeasure,
}

#[pymethods]
impl PyGibbsMeasure {
    #[getter]
    fn z(&self) -> f64 {
        self.inner.z()
    }

    #[getter]
    fn log_z(&self) -> f64 {
        self.inner.log_z()
    }

    #[getter]
    fn quadrature_box(&self) -> (f64, f64) {
        self.inner.quadrature_box()
    }

    #[getter]
    fn tail_mass_estimate(&self) -> f64 {
        self.inner.tail_mass_estimate()
    }

    fn density(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.density(&vec_to_state(&x)).map_err(err)
    }

    fn ball_mass(&self, radius: f64) -> PyResult<f64> {
        self.inner.ball_mass(radius).map_err(err)
    }

    /// (mean, covariance) by quadrature.
    fn moments(&self) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let (m, c) = self.inner.moments().map_err(err)?;
        Ok((state_to_vec(&m), matrix_to_rows(&c)))
    }

    /// Subsample a long trajectory of the SDE (burn_in/thin in model time).
    fn sample(
        &self,
        py: Python<'_>,
        spec: &PyIntegratorSpec,
        n: usize,
        seed: u64,
        burn_in: f64,
        thin: f64,
    ) -> PyResult<Vec<Vec<f64>>> {
        let inner = self.inner.clone();
        let spec = spec.inner;
        py.detach(move || inner.sample(&spec, n, seed, burn_in, thin))
            .map_err(err)
            .map(|pts| pts.iter().map(state_to_vec).collect())
    }
}

#[pyfunction]
#[pyo3(signature = (field, sigma, box_=None, points_per_axis=None, tail_tol=None))]
fn normalize_gibbs(
    py: Python<'_>,
    field: &PyDriftField,
    sigma: f64,
    box_: Option<(f64, f64)>,
    points_per_axis: Option<usize>,
    tail_tol: Option<f64>,
) -> PyResult<PyGibbsMeasure> {
    let f = field.inner.clone();
    let g = py
        .detach(move || measure::normalize(&f, sigma, box_, points_per_axis, tail_tol))
        .map_err(err)?;
    Ok(PyGibbsMeasure { inner: g })
}

/// Integrate the SDE over [t0, t1]; returns (times, states).
#[pyfunction]
fn evolve(
    py: Python<'_>,
    field: &PyDriftField,
    spec: &PyIntegratorSpec,
    sigma: f64,
    path: &PyWienerPath,
    x0: Vec<f64>,
    t0: f64,
    t1: f64,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let f = field.inner.clone();
    let s = spec.inner;
    let p = path.inner.clone();
    let x = vec_to_state(&x0);
    let traj = py.detach(move || flow::evolve(&f, &s, sigma, &p, &x, t0, t1)).map_err(err)?;
    Ok((traj.times.clone(), traj.states.iter().map(state_to_vec).collect()))
}

/// Drive several initial points with the identical path; returns endpoints.
#[pyfunction]
fn evolve_ensemble(
    py: Python<'_>,
    field: &PyDriftField,
    spec: &PyIntegratorSpec,
    sigma: f64,
    path: &PyWienerPath,
    x0s: Vec<Vec<f64>>,
    t0: f64,
    t1: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let f = field.inner.clone();
    let s = spec.inner;
    let p = path.inner.clone();
    let xs: Vec<DVector<f64>> = x0s.iter().map(|x| vec_to_state(x)).collect();
    let ends = py
        .detach(move || flow::evolve_ensemble(&f, &s, sigma, &p, &xs, t0, t1))
        .map_err(err)?;
    Ok(ends.iter().map(|e| state_to_vec(&e.state)).collect())
}

/// Pullback endpoint at time t (start t in the past under shifted noise).
#[pyfunction]
fn pullback_evolve(
    py: Python<'_>,
    field: &PyDriftField,
    spec: &PyIntegratorSpec,
    sigma: f64,
    path: &PyWienerPath,
    x0: Vec<f64>,
    t: f64,
) -> PyResult<Vec<f64>> {
    let f = field.inner.clone();
    let s = spec.inner;
    let p = path.inner.clone();
    let x = vec_to_state(&x0);
    let end = py.detach(move || flow::pullback_evolve(&f, &s, sigma, &p, &x, t)).map_err(err)?;
    Ok(state_to_vec(&end.state))
}

/// Benettin QR spectrum; returns a dict with exponents and errors.
#[pyfunction]
#[pyo3(signature = (field, spec, sigma, seed, x0, k, t_total, burn_in, qr_every=10))]
#[allow(clippy::too_many_arguments)]
fn spectrum_benettin<'py>(
    py: Python<'py>,
    field: &PyDriftField,
    spec: &PyIntegratorSpec,
    sigma: f64,
    seed: u64,
    x0: Vec<f64>,
    k: usize,
    t_total: f64,
    burn_in: f64,
    qr_every: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let f = field.inner.clone();
    let s = spec.inner;
    let x = vec_to_state(&x0);
    let spectrum = py
        .detach(move || {
            lyapunov::spectrum_benettin(&f, &s, sigma, seed, &x, k, t_total, burn_in, qr_every)
        })
        .map_err(err)?;
    report_to_py(py, &spectrum)
}

/// Finite-separation top-exponent cross-check.
#[pyfunction]
#[pyo3(signature = (field, spec, sigma, seed, x0, delta0=1e-8, t_total=100.0, renorm_threshold=10.0))]
#[allow(clippy::too_many_arguments)]
fn top_exponent_twopoint(
    py: Python<'_>,
    field: &PyDriftField,
    spec: &PyIntegratorSpec,
    sigma: f64,
    seed: u64,
    x0: Vec<f64>,
    delta0: f64,
    t_total: f64,
    renorm_threshold: f64,
) -> PyResult<f64> {
    let f = field.inner.clone();
    let s = spec.inner;
    let x = vec_to_state(&x0);
    py.detach(move || {
        lyapunov::top_exponent_twopoint(&f, &s, sigma, seed, &x, delta0, t_total, renorm_threshold)
    })
    .map_err(err)
}

/// Quadrature value and refinement error of the lambda-plus bound.
#[pyfunction]
fn lambda_plus_bound(
    py: Python<'_>,
    field: &PyDriftField,
    gibbs: &PyGibbsMeasure,
) -> PyResult<(f64, f64)> {
    let f = field.inner.clone();
    let g = gibbs.inner.clone();
    py.detach(move || lyapunov::lambda_plus_bound(&f, &g)).map_err(err)
}

/// d = 1 exact identity: quadrature of b' against the Gibbs measure.
#[pyfunction]
fn gradient_1d_exponent(
    py: Python<'_>,
    field: &PyDriftField,
    gibbs: &PyGibbsMeasure,
) -> PyResult<(f64, f64)> {
    let f = field.inner.clone();
    let g = gibbs.inner.clone();
    py.detach(move || lyapunov::gradient_1d_exponent(&f, &g)).map_err(err)
}

/// Two-point synchronization statistics across a seed ensemble.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn two_point_sync<'py>(
    py: Python<'py>,
    field: &PyDriftField,
    spec: &PyIntegratorSpec,
    sigma: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    t_total: f64,
    n_seeds: usize,
    base_seed: u64,
    checkpoints: Vec<f64>,
    epsilon: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let f = field.inner.clone();
    let s = spec.inner;
    let (xa, ya) = (vec_to_state(&x), vec_to_state(&y));
    let report = py
        .detach(move || {
            diagnostics::two_point_sync(
                &f, &s, sigma, &xa, &ya, t_total, n_seeds, base_seed, &checkpoints, epsilon,
            )
        })
        .map_err(err)?;
    report_to_py(py, &report)
}

/// Pullback endpoint clouds for one noise realization.
#[pyfunction]
fn pullback_ensemble(
    py: Python<'_>,
    field: &PyDriftField,
    spec: &PyIntegratorSpec,
    sigma: f64,
    seed: u64,
    init: Vec<Vec<f64>>,
    times: Vec<f64>,
) -> PyResult<Vec<Vec<Vec<f64>>>> {
    let f = field.inner.clone();
    let s = spec.inner;
    let pts: Vec<DVector<f64>> = init.iter().map(|p| vec_to_state(p)).collect();
    let ens = py
        .detach(move || diagnostics::pullback_ensemble(&f, &s, sigma, seed, &pts, &times))
        .map_err(err)?;
    Ok(ens
        .clouds
        .iter()
        .map(|cloud| cloud.iter().map(state_to_vec).collect())
        .collect())
}

/// Single-linkage cluster report of a point cloud.
#[pyfunction]
#[pyo3(signature = (points, linkage_epsilon, circle=false))]
fn cluster_count<'py>(
    py: Python<'py>,
    points: Vec<Vec<f64>>,
    linkage_epsilon: f64,
    circle: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let pts: Vec<DVector<f64>> = points.iter().map(|p| vec_to_state(p)).collect();
    let metric = if circle { diagnostics::Metric::CircleArc } else { diagnostics::Metric::Euclidean };
    let report = diagnostics::cluster_count(&pts, linkage_epsilon, metric).map_err(err)?;
    report_to_py(py, &report)
}

/// One-sided Lipschitz checker over a box.
#[pyfunction]
fn check_one_sided_lipschitz<'py>(
    py: Python<'py>,
    field: &PyDriftField,
    box_lo: f64,
    box_hi: f64,
    n_pairs: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let f = field.inner.clone();
    let report = py
        .detach(move || diagnostics::check_one_sided_lipschitz(&f, box_lo, box_hi, n_pairs, seed))
        .map_err(err)?;
    report_to_py(py, &report)
}

/// Eventual strict monotonicity checker on the annulus (R, 4R].
#[pyfunction]
fn check_eventual_monotone<'py>(
    py: Python<'py>,
    field: &PyDriftField,
    radius: f64,
    n_pairs: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let f = field.inner.clone();
    let report = py
        .detach(move || diagnostics::check_eventual_monotone(&f, radius, n_pairs, seed))
        .map_err(err)?;
    report_to_py(py, &report)
}

/// Swift-transitivity steering witness.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (field, spec, sigma, x, r, z, t0, delta, mesh_n=32, seed=0))]
fn swift_control<'py>(
    py: Python<'py>,
    field: &PyDriftField,
    spec: &PyIntegratorSpec,
    sigma: f64,
    x: Vec<f64>,
    r: f64,
    z: Vec<f64>,
    t0: f64,
    delta: f64,
    mesh_n: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let f = field.inner.clone();
    let s = spec.inner;
    let (xa, za) = (vec_to_state(&x), vec_to_state(&z));
    let report = py
        .detach(move || {
            diagnostics::swift_control(&f, &s, sigma, &xa, r, &za, t0, delta, mesh_n, seed)
        })
        .map_err(err)?;
    report_to_py(py, &report)
}

/// Freezing-control contraction witness.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (field, spec, sigma, z, radius, c_estimate, mesh_n=24, seed=0))]
fn contraction_witness<'py>(
    py: Python<'py>,
    field: &PyDriftField,
    spec: &PyIntegratorSpec,
    sigma: f64,
    z: Vec<f64>,
    radius: f64,
    c_estimate: f64,
    mesh_n: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let f = field.inner.clone();
    let s = spec.inner;
    let za = vec_to_state(&z);
    let report = py
        .detach(move || {
            diagnostics::contraction_witness(&f, &s, sigma, &za, radius, c_estimate, mesh_n, seed)
        })
        .map_err(err)?;
    report_to_py(py, &report)
}

/// Documented per-member seed derivation (mix64 of seed ^ GAMMA*(i+1)).
#[pyfunction]
fn derive_member_seed(base: u64, index: u64) -> u64 {
    noise::derive_member_seed(base, index)
}

/// Parse an experiment TOML and return its canonical config hash.
#[pyfunction]
fn config_hash(toml_text: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_toml(toml_text).map_err(err)?;
    Ok(cfg.config_hash())
}

#[pymodule]
fn stosync_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDriftField>()?;
    m.add_class::<PyWienerPath>()?;
    m.add_class::<PyIntegratorSpec>()?;
    m.add_class::<PyGibbsMeasure>()?;
    m.add_function(wrap_pyfunction!(normalize_gibbs, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(pullback_evolve, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum_benettin, m)?)?;
    m.add_function(wrap_pyfunction!(top_exponent_twopoint, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_plus_bound, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_1d_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(two_point_sync, m)?)?;
    m.add_function(wrap_pyfunction!(pullback_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_count, m)?)?;
    m.add_function(wrap_pyfunction!(check_one_sided_lipschitz, m)?)?;
    m.add_function(wrap_pyfunction!(check_eventual_monotone, m)?)?;
    m.add_function(wrap_pyfunction!(swift_control, m)?)?;
    m.add_function(wrap_pyfunction!(contraction_witness, m)?)?;
    m.add_function(wrap_pyfunction!(derive_member_seed, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
