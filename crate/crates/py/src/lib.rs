//! Python bindings. Build the `cdylib` and import it as `heston_is`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use heston_is::bench::{self, DriftPolicy, EstimatorKind, RunOptions};
use heston_is::drift_mdp;
use heston_is::{Error, PayoffKind, PayoffSpec, TimeGrid};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_kind(s: &str) -> PyResult<EstimatorKind> {
    s.parse().map_err(to_py)
}

fn parse_payoff(s: &str) -> PyResult<PayoffKind> {
    s.parse().map_err(to_py)
}

/// Heston parameters. Defaults are the reference set.
#[pyclass(name = "HestonParams", from_py_object)]
#[derive(Clone)]
pub struct PyHestonParams {
    inner: heston_is::HestonParams,
}

#[pymethods]
impl PyHestonParams {
    #[new]
    #[pyo3(signature = (kappa=2.0, theta=0.09, xi=0.2, rho=-0.5, v0=0.04, s0=50.0, r=0.05, t_end=1.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(kappa: f64, theta: f64, xi: f64, rho: f64, v0: f64, s0: f64, r: f64, t_end: f64) -> PyResult<Self> {
        let inner = heston_is::HestonParams {
            kappa,
            theta,
            xi,
            rho,
            v0,
            s0,
            r,
            t_end,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Constant-volatility model.
    #[staticmethod]
    #[pyo3(signature = (sigma, s0=50.0, r=0.05, t_end=1.0))]
    fn black_scholes(sigma: f64, s0: f64, r: f64, t_end: f64) -> PyResult<Self> {
        Ok(Self {
            inner: heston_is::HestonParams::black_scholes(sigma, s0, r, t_end).map_err(to_py)?,
        })
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }
    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta
    }
    #[getter]
    fn xi(&self) -> f64 {
        self.inner.xi
    }
    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }
    #[getter]
    fn v0(&self) -> f64 {
        self.inner.v0
    }
    #[getter]
    fn s0(&self) -> f64 {
        self.inner.s0
    }
    #[getter]
    fn r(&self) -> f64 {
        self.inner.r
    }
    #[getter]
    fn t_end(&self) -> f64 {
        self.inner.t_end
    }

    fn feller(&self) -> bool {
        self.inner.feller()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "HestonParams(kappa={}, theta={}, xi={}, rho={}, v0={}, s0={}, r={}, t_end={})",
            p.kappa, p.theta, p.xi, p.rho, p.v0, p.s0, p.r, p.t_end
        )
    }
}

/// One estimator run.
#[pyclass(name = "EstimatorReport", frozen, skip_from_py_object)]
pub struct PyReport {
    #[pyo3(get)]
    kind: String,
    #[pyo3(get)]
    strike: f64,
    #[pyo3(get)]
    n_paths: usize,
    #[pyo3(get)]
    n_steps: usize,
    #[pyo3(get)]
    seed: u64,
    #[pyo3(get)]
    price: f64,
    #[pyo3(get)]
    std_err: f64,
    #[pyo3(get)]
    variance: f64,
    #[pyo3(get)]
    var_reduction: f64,
    #[pyo3(get)]
    prob_positive: f64,
}

#[pymethods]
impl PyReport {
    fn __repr__(&self) -> String {
        format!(
            "EstimatorReport(kind={}, strike={}, price={:.6}, std_err={:.2e}, var_reduction={:.3})",
            self.kind, self.strike, self.price, self.std_err, self.var_reduction
        )
    }
}

impl From<bench::EstimatorReport> for PyReport {
    fn from(r: bench::EstimatorReport) -> Self {
        Self {
            kind: r.kind.name().to_string(),
            strike: r.strike,
            n_paths: r.n_paths,
            n_steps: r.n_steps,
            seed: r.seed,
            price: r.price,
            std_err: r.std_err,
            variance: r.variance,
            var_reduction: r.var_reduction,
            prob_positive: r.prob_positive,
        }
    }
}

fn params_or_default(p: Option<PyHestonParams>) -> heston_is::HestonParams {
    p.map(|p| p.inner).unwrap_or_else(heston_is::HestonParams::reference)
}

/// Run one estimator against a Classic baseline with the same seed.
#[pyfunction]
#[pyo3(signature = (kind, strike, payoff="geometric_asian", n_paths=100_000, n_steps=252, seed=1, params=None))]
fn price(
    py: Python<'_>,
    kind: &str,
    strike: f64,
    payoff: &str,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    params: Option<PyHestonParams>,
) -> PyResult<PyReport> {
    let kind = parse_kind(kind)?;
    let spec = PayoffSpec::new(parse_payoff(payoff)?, strike).map_err(to_py)?;
    let p = params_or_default(params);
    let grid = TimeGrid::new(p.t_end, n_steps).map_err(to_py)?;
    let r = py
        .detach(|| {
            bench::run_estimator_with(kind, &spec, &p, &grid, n_paths, seed, None, &RunOptions::default())
        })
        .map_err(to_py)?;
    Ok(r.into())
}

/// Drift schedule on the grid knots: dict with `t`, `h1`, `h2`, `psi`, `mode`.
#[pyfunction]
#[pyo3(signature = (kind, strike, payoff="geometric_asian", n_steps=252, params=None))]
fn drift<'py>(
    py: Python<'py>,
    kind: &str,
    strike: f64,
    payoff: &str,
    n_steps: usize,
    params: Option<PyHestonParams>,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let kind = parse_kind(kind)?;
    let spec = PayoffSpec::new(parse_payoff(payoff)?, strike).map_err(to_py)?;
    let p = params_or_default(params);
    let grid = TimeGrid::new(p.t_end, n_steps).map_err(to_py)?;
    let b = py
        .detach(|| bench::build_drift(kind, &spec, &p, &grid, &DriftPolicy::default()))
        .map_err(to_py)?
        .ok_or_else(|| PyValueError::new_err(format!("{kind} has no drift")))?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("t", grid.knots())?;
    d.set_item("h1", b.schedule.h1.clone())?;
    d.set_item("h2", b.schedule.h2.clone())?;
    d.set_item("psi", b.psi)?;
    d.set_item("mode", format!("{:?}", b.schedule.mode).split('(').next().unwrap_or_default())?;
    d.set_item("provenance", b.schedule.provenance)?;
    Ok(d)
}

/// Large-time constants as a dict: `q`, `nu`, `bvec`.
#[pyfunction]
#[pyo3(signature = (params=None))]
fn large_time_constants<'py>(py: Python<'py>, params: Option<PyHestonParams>) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let k = drift_mdp::large_time_constants(&params_or_default(params)).map_err(to_py)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("q", k.q)?;
    d.set_item("nu", k.nu)?;
    d.set_item("bvec", (k.bvec[0], k.bvec[1]))?;
    Ok(d)
}

/// Names accepted by `price` and `drift`.
#[pyfunction]
fn estimator_kinds() -> Vec<&'static str> {
    EstimatorKind::ALL.iter().map(|k| k.name()).collect()
}

/// Register everything on `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHestonParams>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(price, m)?)?;
    m.add_function(wrap_pyfunction!(drift, m)?)?;
    m.add_function(wrap_pyfunction!(large_time_constants, m)?)?;
    m.add_function(wrap_pyfunction!(estimator_kinds, m)?)?;
    Ok(())
}

#[pymodule]
#[pyo3(name = "heston_is")]
fn heston_is_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
