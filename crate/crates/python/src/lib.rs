//! Python bindings: SO(3) helpers, configuration, scenario runs and offline
//! verification. Reports come back as plain dicts, telemetry as a dict of
//! column lists.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use quadtrack::config::ScenarioConfig;
use quadtrack::geometry::{self, Mat3, Vec3};
use quadtrack::simulation;
use quadtrack::telemetry::{self, TelemetryRecord};
use quadtrack::Error;

create_exception!(quadtrack_py, DivergenceError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Divergence { .. } => DivergenceError::new_err(e.to_string()),
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::from(v)
}

fn mat3(m: [[f64; 3]; 3]) -> Mat3 {
    Mat3::from_fn(|i, j| m[i][j])
}

fn rows(m: &Mat3) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

/// Serializes through JSON so the dict mirrors the report files exactly.
fn json_dict<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn columns<'py>(py: Python<'py>, records: &[TelemetryRecord]) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    for (c, name) in TelemetryRecord::COLUMNS.iter().enumerate() {
        let col: Vec<f64> = records.iter().map(|r| r.values()[c]).collect();
        out.set_item(*name, col)?;
    }
    Ok(out)
}

fn records_from(cols: &Bound<'_, PyDict>) -> PyResult<Vec<TelemetryRecord>> {
    let mut data: Vec<Vec<f64>> = Vec::with_capacity(TelemetryRecord::COLUMNS.len());
    for name in TelemetryRecord::COLUMNS {
        let col = cols
            .get_item(*name)?
            .ok_or_else(|| PyValueError::new_err(format!("missing telemetry column {name}")))?;
        data.push(col.extract()?);
    }
    let n = data[0].len();
    if data.iter().any(|c| c.len() != n) {
        return Err(PyValueError::new_err("telemetry columns differ in length"));
    }
    Ok((0..n)
        .map(|i| {
            let row: Vec<f64> = data.iter().map(|c| c[i]).collect();
            TelemetryRecord::from_values(&row).expect("one value per column")
        })
        .collect())
}

#[pyfunction]
fn hat(v: [f64; 3]) -> [[f64; 3]; 3] {
    rows(&geometry::hat(&vec3(v)))
}

#[pyfunction]
fn vee(m: [[f64; 3]; 3]) -> PyResult<[f64; 3]> {
    let v = geometry::vee(&mat3(m)).map_err(to_py)?;
    Ok([v.x, v.y, v.z])
}

#[pyfunction]
fn so3_exp(v: [f64; 3]) -> [[f64; 3]; 3] {
    rows(geometry::so3_exp(&vec3(v)).matrix())
}

/// Returns `(epsilon, z, J)` for matched measured and desired unit vectors.
#[pyfunction]
fn alignment(
    measured: Vec<[f64; 3]>,
    desired: Vec<[f64; 3]>,
    weights: Vec<f64>,
) -> PyResult<(f64, [f64; 3], [[f64; 3]; 3])> {
    let m: Vec<Vec3> = measured.into_iter().map(vec3).collect();
    let d: Vec<Vec3> = desired.into_iter().map(vec3).collect();
    let e = quadtrack::attitude::alignment(&m, &d, &weights).map_err(to_py)?;
    Ok((e.epsilon, [e.z.x, e.z.y, e.z.z], rows(&e.j)))
}

#[pyclass(name = "Config", module = "quadtrack_py")]
struct PyConfig {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn preset(scenario: u8) -> PyResult<Self> {
        Ok(Self {
            inner: ScenarioConfig::preset(scenario).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ScenarioConfig::parse_str(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ScenarioConfig::load(&path).map_err(to_py)?,
        })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn with_seed(&self, seed: u64) -> Self {
        Self {
            inner: self.inner.clone().with_seed(seed),
        }
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    #[getter]
    fn scenario(&self) -> u8 {
        self.inner.scenario
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration
    }

    #[setter]
    fn set_duration(&mut self, v: f64) {
        self.inner.duration = v;
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    #[setter]
    fn set_dt(&mut self, v: f64) {
        self.inner.dt = v;
    }

    #[getter]
    fn velocity_free(&self) -> bool {
        self.inner.velocity_free
    }

    #[setter]
    fn set_velocity_free(&mut self, v: bool) {
        self.inner.velocity_free = v;
    }

    #[getter]
    fn apparent_acceleration(&self) -> bool {
        self.inner.apparent_acceleration
    }

    #[setter]
    fn set_apparent_acceleration(&mut self, v: bool) {
        self.inner.apparent_acceleration = v;
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(scenario={}, duration={}, dt={}, seed={})",
            self.inner.scenario,
            self.inner.duration,
            self.inner.dt,
            self.inner.seed()
        )
    }
}

#[pyclass(name = "Run", module = "quadtrack_py")]
struct PyRun {
    records: Vec<TelemetryRecord>,
    report: simulation::RunReport,
    diverged: Option<String>,
}

#[pymethods]
impl PyRun {
    /// Telemetry as `{column: [values]}`.
    fn telemetry<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        columns(py, &self.records)
    }

    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_dict(py, &self.report)
    }

    #[getter]
    fn diverged(&self) -> Option<String> {
        self.diverged.clone()
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        telemetry::write_telemetry(&self.records, &path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.records.len()
    }
}

#[pyfunction]
fn columns_list() -> Vec<&'static str> {
    TelemetryRecord::COLUMNS.to_vec()
}

#[pyfunction]
fn check_gains<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyAny>> {
    let report = simulation::a_priori_report(&config.inner).map_err(to_py)?;
    json_dict(py, &report)
}

/// Runs with the GIL released. A divergence still returns the partial run.
#[pyfunction]
#[pyo3(signature = (config, force = false))]
fn run_scenario(py: Python<'_>, config: &PyConfig, force: bool) -> PyResult<PyRun> {
    let cfg = config.inner.clone();
    let out = py.detach(move || simulation::run_scenario(&cfg, force)).map_err(to_py)?;
    Ok(PyRun {
        records: out.records,
        report: out.report,
        diverged: out.divergence.map(|e| e.to_string()),
    })
}

#[pyfunction]
fn read_telemetry<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let records = telemetry::read_telemetry(&path).map_err(to_py)?;
    columns(py, &records)
}

/// Offline checks on telemetry given as a path or a column dict.
#[pyfunction]
fn verify<'py>(py: Python<'py>, telemetry: &Bound<'py, PyAny>, config: &PyConfig) -> PyResult<Bound<'py, PyAny>> {
    let records = if let Ok(cols) = telemetry.cast::<PyDict>() {
        records_from(cols)?
    } else {
        let path: PathBuf = telemetry.extract()?;
        telemetry::read_telemetry(&path).map_err(to_py)?
    };
    let report = quadtrack::verify::verify(&records, &config.inner).map_err(to_py)?;
    json_dict(py, &report)
}

#[pymodule]
fn quadtrack_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DivergenceError", m.py().get_type::<DivergenceError>())?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(hat, m)?)?;
    m.add_function(wrap_pyfunction!(vee, m)?)?;
    m.add_function(wrap_pyfunction!(so3_exp, m)?)?;
    m.add_function(wrap_pyfunction!(alignment, m)?)?;
    m.add_function(wrap_pyfunction!(check_gains, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(read_telemetry, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("COLUMNS", columns_list())?;
    Ok(())
}
