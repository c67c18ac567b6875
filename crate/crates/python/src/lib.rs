//! Python bindings for `circular-ipw`.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use circular_ipw::io::{self, ReportFormat};
use circular_ipw::propensity::{self, DesignRow, FitOptions};
use circular_ipw::simulation::{self, Scenario, ScenarioSpec};
use circular_ipw::variance::{estimate_with_covariance, wald_interval};
use circular_ipw::{Angle, CausalDataset, ErrorKind, Unit, WeightScheme};

create_exception!(circipw, CircularIpwError, PyException);
create_exception!(circipw, ConfigError, CircularIpwError);
create_exception!(circipw, DataError, CircularIpwError);
create_exception!(circipw, NumericalError, CircularIpwError);

fn to_py(e: circular_ipw::Error) -> PyErr {
    let msg = e.to_string();
    match e.kind() {
        ErrorKind::Config => ConfigError::new_err(msg),
        ErrorKind::Data => DataError::new_err(msg),
        ErrorKind::Numerical => NumericalError::new_err(msg),
    }
}

fn parse_scheme(s: &str) -> PyResult<WeightScheme> {
    s.parse().map_err(to_py)
}

#[pyfunction]
fn canonical_angle(theta: f64) -> PyResult<f64> {
    Ok(Angle::new(theta).map_err(to_py)?.radians())
}

/// `a − b` wrapped into `(−π, π]`.
#[pyfunction]
fn angular_difference(a: f64, b: f64) -> PyResult<f64> {
    let a = Angle::new(a).map_err(to_py)?;
    let b = Angle::new(b).map_err(to_py)?;
    Ok(circular_ipw::angular_difference(a, b))
}

#[pyfunction]
fn time_to_radians(hhmm: &str) -> PyResult<f64> {
    Ok(io::time_to_radians(hhmm).map_err(to_py)?.radians())
}

#[pyfunction]
fn radians_to_minutes(radians: f64) -> f64 {
    io::radians_to_minutes(radians)
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "circipw")]
#[derive(Clone)]
struct PropensityFit {
    eta: Vec<f64>,
    fitted: Vec<f64>,
    n_iter: usize,
    max_score_norm: f64,
}

/// Logistic propensity fit. `x` rows must start with the intercept 1.
#[pyfunction]
fn fit_logistic(x: Vec<Vec<f64>>, treated: Vec<bool>) -> PyResult<PropensityFit> {
    if x.len() != treated.len() {
        return Err(DataError::new_err("x and treated differ in length"));
    }
    let rows: Vec<DesignRow> = x.into_iter().zip(treated).map(|(x, a)| DesignRow::new(x, a)).collect();
    let fit = propensity::fit_logistic(&rows, &FitOptions::default()).map_err(to_py)?;
    Ok(PropensityFit {
        eta: fit.eta,
        fitted: fit.fitted,
        n_iter: fit.n_iter,
        max_score_norm: fit.max_score_norm,
    })
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "circipw")]
#[derive(Clone)]
struct Effect {
    scheme: String,
    tau: f64,
    xi: f64,
    se_tau: f64,
    se_xi: f64,
    level: f64,
    tau_ci: (f64, f64),
    xi_ci: (f64, f64),
    /// `(alpha, beta)` of the treated arm.
    treated: (f64, f64),
    /// `(alpha, beta)` of the control arm.
    control: (f64, f64),
}

#[pymethods]
impl Effect {
    fn __repr__(&self) -> String {
        format!(
            "Effect(scheme={:?}, tau={:.6}, se_tau={:.6}, xi={:.6}, se_xi={:.6})",
            self.scheme, self.tau, self.se_tau, self.xi, self.se_xi
        )
    }
}

/// Direction and length effects with sandwich standard errors.
#[pyfunction]
#[pyo3(signature = (treated, x, theta, scheme = "Hajek", level = 0.95))]
fn estimate(treated: Vec<bool>, x: Vec<Vec<f64>>, theta: Vec<f64>, scheme: &str, level: f64) -> PyResult<Effect> {
    if treated.len() != x.len() || x.len() != theta.len() {
        return Err(DataError::new_err("treated, x and theta differ in length"));
    }
    let scheme = parse_scheme(scheme)?;
    let units = treated
        .into_iter()
        .zip(x)
        .zip(theta)
        .map(|((treated, x), t)| Ok(Unit { treated, x, theta: Angle::new(t)? }))
        .collect::<circular_ipw::Result<Vec<_>>>()
        .map_err(to_py)?;
    let dataset = CausalDataset::new(units).map_err(to_py)?;
    let fit = propensity::fit_logistic(&dataset.design_rows(), &FitOptions::default()).map_err(to_py)?;
    let (omega, est) = estimate_with_covariance(&dataset, &fit, scheme).map_err(to_py)?;
    let ci = wald_interval(&est, level).map_err(to_py)?;
    Ok(Effect {
        scheme: scheme.label().to_string(),
        tau: est.tau,
        xi: est.xi,
        se_tau: ci.se_tau,
        se_xi: ci.se_xi,
        level,
        tau_ci: (ci.lo_tau, ci.hi_tau),
        xi_ci: (ci.lo_xi, ci.hi_xi),
        treated: (omega.treated.alpha, omega.treated.beta),
        control: (omega.control.alpha, omega.control.beta),
    })
}

/// Monte Carlo study; returns the summary as CSV text.
#[pyfunction]
#[pyo3(signature = (scenario, n, reps, seed = 1))]
fn simulate(py: Python<'_>, scenario: u8, n: usize, reps: usize, seed: u64) -> PyResult<String> {
    let spec = ScenarioSpec::new(Scenario::from_id(scenario).map_err(to_py)?, n, reps, seed).map_err(to_py)?;
    let summary = py.detach(|| simulation::run_study(&spec)).map_err(to_py)?;
    let mut out = Vec::new();
    simulation::write_summary_csv(&[summary], &mut out).map_err(to_py)?;
    Ok(String::from_utf8(out).expect("csv output is UTF-8"))
}

/// Runs a config-file analysis and returns the report in `format`.
#[pyfunction]
#[pyo3(signature = (config, format = "json"))]
fn analyze(config: PathBuf, format: &str) -> PyResult<String> {
    let format: ReportFormat = format.parse().map_err(to_py)?;
    let cfg = io::parse_config(&config).map_err(|e| ConfigError::new_err(e.to_string()))?;
    let report = io::run_analysis(&cfg).map_err(to_py)?;
    let mut out = Vec::new();
    io::emit_report(&report, format, &mut out).map_err(to_py)?;
    Ok(String::from_utf8(out).expect("report output is UTF-8"))
}

#[pymodule]
fn circipw(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("CircularIpwError", py.get_type::<CircularIpwError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("DataError", py.get_type::<DataError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    m.add_class::<PropensityFit>()?;
    m.add_class::<Effect>()?;
    m.add_function(wrap_pyfunction!(canonical_angle, m)?)?;
    m.add_function(wrap_pyfunction!(angular_difference, m)?)?;
    m.add_function(wrap_pyfunction!(time_to_radians, m)?)?;
    m.add_function(wrap_pyfunction!(radians_to_minutes, m)?)?;
    m.add_function(wrap_pyfunction!(fit_logistic, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    Ok(())
}
