//! Python bindings. Matrices cross the boundary as nested lists of complex
//! numbers (row-major).

use std::path::PathBuf;

use holonomy::bordism::{circle_word, evaluate_bordism, snake_residual};
use holonomy::connection::{evaluate_connection, Chart, ConnectionForm};
use holonomy::descent::{self, GlobalBundle};
use holonomy::experiment::{run_experiment, ExperimentConfig};
use holonomy::reconstruct::{self, OdeOracle};
use holonomy::transport::{self as tr, ProductRule, StepDensity};
use holonomy::{EndMap, Error};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

type Matrix = Vec<Vec<Complex64>>;

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) | Error::InvalidReparametrization(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_rows(m: &EndMap) -> Matrix {
    (0..m.dim()).map(|i| (0..m.dim()).map(|j| m.get(i, j)).collect()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>) -> PyResult<EndMap> {
    EndMap::from_rows(&rows).map_err(err)
}

fn rule(name: &str) -> PyResult<ProductRule> {
    match name {
        "left" => Ok(ProductRule::Left),
        "midpoint" => Ok(ProductRule::Midpoint),
        _ => Err(PyValueError::new_err(format!("unknown rule `{name}`; expected left or midpoint"))),
    }
}

/// Matrix exponential of a real square matrix.
#[pyfunction]
fn matrix_exponential(m: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Ok(to_rows(holonomy::matcore::matrix_exponential(&from_rows(m)?).map_err(err)?.as_end()))
}

/// A connection 1-form on a single chart.
#[pyclass(frozen, module = "holonomy_py")]
struct Connection(ConnectionForm);

#[pymethods]
impl Connection {
    #[staticmethod]
    fn zero(chart_dim: usize, fiber_dim: usize) -> PyResult<Self> {
        Ok(Self(ConnectionForm::zero(Chart::new(chart_dim).map_err(err)?, fiber_dim).map_err(err)?))
    }

    /// One real matrix per chart coordinate.
    #[staticmethod]
    fn constant(components: Vec<Vec<Vec<f64>>>) -> PyResult<Self> {
        let ms = components.into_iter().map(from_rows).collect::<PyResult<Vec<_>>>()?;
        let chart = Chart::new(ms.len()).map_err(err)?;
        Ok(Self(ConnectionForm::constant(chart, ms).map_err(err)?))
    }

    #[staticmethod]
    #[pyo3(signature = (strength = 1.0))]
    fn magnetic(strength: f64) -> PyResult<Self> {
        Ok(Self(ConnectionForm::magnetic(strength).map_err(err)?))
    }

    #[staticmethod]
    fn levi_civita() -> Self {
        Self(ConnectionForm::levi_civita_sphere())
    }

    #[staticmethod]
    fn polynomial() -> PyResult<Self> {
        Ok(Self(holonomy::presets::polynomial().map_err(err)?))
    }

    #[getter]
    fn chart_dim(&self) -> usize {
        self.0.chart().dim
    }

    #[getter]
    fn fiber_dim(&self) -> usize {
        self.0.fiber_dim()
    }

    /// `A_p(v)`.
    fn evaluate(&self, p: Vec<f64>, v: Vec<f64>) -> PyResult<Matrix> {
        Ok(to_rows(&evaluate_connection(&self.0, &p, &v).map_err(err)?))
    }

    fn __repr__(&self) -> String {
        format!("Connection({}, chart_dim={}, fiber_dim={})", self.0.kind_name(), self.0.chart().dim, self.0.fiber_dim())
    }
}

#[pyclass(frozen, module = "holonomy_py")]
struct Path(tr::Path);

#[pymethods]
impl Path {
    #[staticmethod]
    #[pyo3(signature = (point, domain = (0.0, 1.0)))]
    fn constant(point: Vec<f64>, domain: (f64, f64)) -> PyResult<Self> {
        Ok(Self(tr::Path::constant(point, domain).map_err(err)?))
    }

    /// `p + u(q − p)` for `u ∈ [0, 1]`.
    #[staticmethod]
    fn segment(p: Vec<f64>, q: Vec<f64>) -> PyResult<Self> {
        Ok(Self(tr::Path::segment(p, q).map_err(err)?))
    }

    #[staticmethod]
    #[pyo3(signature = (center, radius, domain = (0.0, std::f64::consts::TAU), e1 = None, e2 = None))]
    fn arc(center: Vec<f64>, radius: f64, domain: (f64, f64), e1: Option<Vec<f64>>, e2: Option<Vec<f64>>) -> PyResult<Self> {
        let n = center.len();
        let unit = |i: usize| (0..n).map(|j| if j == i { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
        let (e1, e2) = (e1.unwrap_or_else(|| unit(0)), e2.unwrap_or_else(|| unit(1)));
        Ok(Self(tr::Path::circle_arc(center, radius, e1, e2, domain).map_err(err)?))
    }

    #[staticmethod]
    #[pyo3(signature = (waypoints, domain = (0.0, 1.0)))]
    fn spline(waypoints: Vec<Vec<f64>>, domain: (f64, f64)) -> PyResult<Self> {
        Ok(Self(tr::Path::spline(waypoints, domain).map_err(err)?))
    }

    /// The colatitude circle on the unit sphere in `ℝ³`.
    #[staticmethod]
    fn colatitude(theta: f64) -> PyResult<Self> {
        Ok(Self(descent::colatitude_circle(theta).map_err(err)?))
    }

    /// The same circle in the stereographic chart centred at the pole.
    #[staticmethod]
    fn colatitude_loop(theta: f64) -> PyResult<Self> {
        Ok(Self(tr::Path::colatitude_loop(theta).map_err(err)?))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn carrier(&self) -> (f64, f64) {
        self.0.carrier()
    }

    fn point(&self, u: f64) -> Vec<f64> {
        self.0.point(u)
    }

    fn velocity(&self, u: f64) -> Vec<f64> {
        self.0.velocity(u)
    }
}

/// Transport over the carrier of `path`. `method` is `ode` (RK4) or
/// `product`; `steps` defaults to 2048 per unit parameter.
#[pyfunction]
#[pyo3(signature = (connection, path, method = "ode", steps = None, rule_name = "left"))]
fn transport(connection: &Connection, path: &Path, method: &str, steps: Option<usize>, rule_name: &str) -> PyResult<Matrix> {
    let (s, t) = path.0.carrier();
    let n = steps.unwrap_or_else(|| StepDensity::default().steps_for(s, t));
    let r = match method {
        "ode" => tr::transport_ode(&connection.0, &path.0, s, t, n),
        "product" => tr::transport_product(&connection.0, &path.0, s, t, n, rule(rule_name)?),
        _ => return Err(PyValueError::new_err(format!("unknown method `{method}`; expected ode or product"))),
    }
    .map_err(err)?;
    Ok(to_rows(r.map.as_end()))
}

/// Central-difference reconstruction of `A_p(v)` from the connection's own
/// transport.
#[pyfunction]
#[pyo3(signature = (connection, p, v, h = reconstruct::DEFAULT_H))]
fn reconstruct_at(connection: &Connection, p: Vec<f64>, v: Vec<f64>, h: f64) -> PyResult<Matrix> {
    let oracle = OdeOracle::new(connection.0.clone());
    Ok(to_rows(&reconstruct::reconstruct_at(&oracle, &p, &v, h).map_err(err)?))
}

/// A bundle with connection glued over an atlas.
#[pyclass(frozen, module = "holonomy_py")]
struct Bundle(GlobalBundle);

#[pymethods]
impl Bundle {
    /// Tangent bundle of the unit sphere with its Levi-Civita connection.
    #[staticmethod]
    fn sphere() -> PyResult<Self> {
        Ok(Self(GlobalBundle::sphere_tangent().map_err(err)?))
    }

    /// Flat rank-2 bundle on the unit circle with holonomy a rotation by `phi`.
    #[staticmethod]
    fn flat_circle(phi: f64) -> PyResult<Self> {
        Ok(Self(GlobalBundle::flat_circle(phi).map_err(err)?))
    }

    /// Trivial bundle over `ℝⁿ` with one chart.
    #[staticmethod]
    fn flat(connection: &Connection) -> PyResult<Self> {
        Ok(Self(GlobalBundle::flat(connection.0.clone()).map_err(err)?))
    }

    /// Two charts of the line glued by `exp(x·generator)`; the connection
    /// is the one of chart 0.
    #[staticmethod]
    fn line(connection: &Connection, generator: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self(GlobalBundle::line(connection.0.clone(), from_rows(generator)?).map_err(err)?))
    }

    #[getter]
    fn fiber_dim(&self) -> usize {
        self.0.fiber_dim()
    }

    #[getter]
    fn charts(&self) -> usize {
        self.0.atlas().len()
    }

    /// Glued transport along `path`; a loop ends in its starting frame.
    fn transport(&self, path: &Path) -> PyResult<Matrix> {
        Ok(to_rows(descent::glued_transport(&self.0, &path.0).map_err(err)?.map.as_end()))
    }

    /// Rotation angle of the holonomy of a loop, in `(−π, π]`.
    fn holonomy_angle(&self, path: &Path) -> PyResult<f64> {
        descent::loop_holonomy_angle(&self.0, &path.0).map_err(err)
    }

    /// Value of the circle bordism decorated by a loop.
    fn circle_value(&self, path: &Path) -> PyResult<Complex64> {
        let w = circle_word(&self.0, &path.0).map_err(err)?;
        evaluate_bordism(&w, &self.0).and_then(|m| m.scalar()).map_err(err)
    }

    /// Largest zig-zag residual for a loop, over both orientations.
    fn snake_residual(&self, path: &Path) -> PyResult<f64> {
        let (s, _) = path.0.carrier();
        snake_residual(&self.0, &path.0.point(s), &path.0).map_err(err)
    }

    /// Largest Čech cocycle residual at `samples` points per overlap.
    #[pyo3(signature = (samples = 32))]
    fn cech_residual(&self, samples: usize) -> PyResult<f64> {
        descent::check_cech_cocycle(self.0.atlas(), self.0.cocycle(), samples).map_err(err)
    }
}

/// `2π(1 − cos θ)`, wrapped to `(−π, π]`.
#[pyfunction]
fn sphere_holonomy_angle(theta: f64) -> f64 {
    descent::sphere_holonomy_angle(theta)
}

/// Every acceptance criterion as `(id, title, passed, summary)`.
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn verify_all(py: Python<'_>, seed: u64) -> Vec<(usize, String, bool, String)> {
    let criteria = py.detach(|| holonomy::verify::verify_all(seed, &Default::default()));
    criteria.into_iter().map(|c| (c.id, c.title.to_string(), c.pass(), c.summary())).collect()
}

/// Runs a TOML experiment config, writing outputs under `out_dir`.
/// Returns `(passed, report)`.
#[pyfunction]
fn run_config(py: Python<'_>, config: &str, out_dir: PathBuf) -> PyResult<(bool, String)> {
    let cfg = ExperimentConfig::from_toml(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = py.detach(|| run_experiment(&cfg, &out_dir)).map_err(|e| match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    })?;
    Ok((report.pass(), report.render()))
}

#[pymodule]
fn holonomy_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Connection>()?;
    m.add_class::<Path>()?;
    m.add_class::<Bundle>()?;
    m.add_function(wrap_pyfunction!(matrix_exponential, m)?)?;
    m.add_function(wrap_pyfunction!(transport, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_at, m)?)?;
    m.add_function(wrap_pyfunction!(sphere_holonomy_angle, m)?)?;
    m.add_function(wrap_pyfunction!(verify_all, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
