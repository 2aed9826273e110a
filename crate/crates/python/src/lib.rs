//! Python bindings: `import pycontmeas`.

use num_complex::Complex64 as C64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use contmeas::micro::{self, MicroEnsembleOptions, MicroOptions};
use contmeas::readout::{self, EnsembleOptions, Estimate, PriorSpec, ReadoutCurve};
use contmeas::{rpi, validate, AmplitudePair, EnsembleStats, Error, SystemConfig};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn state(initial: Option<(C64, C64)>) -> AmplitudePair {
    initial.map_or_else(AmplitudePair::ground, |(c1, c2)| AmplitudePair::new(c1, c2))
}

/// Two levels, a drive pulse and a measurement strength.
#[pyclass(name = "System", frozen, skip_from_py_object, module = "pycontmeas")]
#[derive(Clone)]
struct PySystem {
    inner: SystemConfig,
}

#[pymethods]
impl PySystem {
    #[new]
    fn new(e1: f64, e2: f64, v: f64, t1: f64, t2: f64, t_total: f64, kappa: f64) -> PyResult<Self> {
        SystemConfig::new(e1, e2, v, t1, t2, t_total, kappa).map(|inner| PySystem { inner }).map_err(py_err)
    }

    /// Reference geometry (`ΔE = 1`, `T_R = 1`, pulse on `[0, 1/2]`) at a
    /// fuzziness ratio `4πT_lr/T_R`.
    #[staticmethod]
    fn reference(ratio: f64) -> PyResult<Self> {
        SystemConfig::reference(ratio).map(|inner| PySystem { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn with_fuzziness(e1: f64, e2: f64, v: f64, t1: f64, t2: f64, t_total: f64, ratio: f64) -> PyResult<Self> {
        SystemConfig::with_fuzziness_ratio(e1, e2, v, t1, t2, t_total, ratio)
            .map(|inner| PySystem { inner })
            .map_err(py_err)
    }

    #[getter]
    fn e1(&self) -> f64 {
        self.inner.e1
    }
    #[getter]
    fn e2(&self) -> f64 {
        self.inner.e2
    }
    #[getter]
    fn v(&self) -> f64 {
        self.inner.v_amplitude
    }
    #[getter]
    fn t1(&self) -> f64 {
        self.inner.t1
    }
    #[getter]
    fn t2(&self) -> f64 {
        self.inner.t2
    }
    #[getter]
    fn t_total(&self) -> f64 {
        self.inner.t_total
    }
    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    /// `{e0, delta_e, t_lr, t_rabi, fuzziness_ratio}`.
    fn scales<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = contmeas::derive_scales(&self.inner).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("e0", s.e0)?;
        d.set_item("delta_e", s.delta_e)?;
        d.set_item("t_lr", s.t_lr)?;
        d.set_item("t_rabi", s.t_rabi)?;
        d.set_item("fuzziness_ratio", s.fuzziness_ratio)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "System(e1={}, e2={}, v={}, t1={}, t2={}, t_total={}, kappa={})",
            c.e1, c.e2, c.v_amplitude, c.t1, c.t2, c.t_total, c.kappa
        )
    }
}

/// Piecewise-constant readout curve.
#[pyclass(name = "Readout", frozen, skip_from_py_object, module = "pycontmeas")]
#[derive(Clone)]
struct PyReadout {
    inner: ReadoutCurve,
}

#[pymethods]
impl PyReadout {
    #[new]
    fn new(dt: f64, t_total: f64, samples: Vec<f64>) -> PyResult<Self> {
        ReadoutCurve::new(dt, t_total, samples).map(|inner| PyReadout { inner }).map_err(py_err)
    }

    /// Draws a readout from the flat prior (`prior = (dt, e_lo, e_hi)`,
    /// automatic when omitted).
    #[staticmethod]
    #[pyo3(signature = (system, seed, prior=None))]
    fn generate(system: &PySystem, seed: u64, prior: Option<(f64, f64, f64)>) -> PyResult<Self> {
        let prior = match prior {
            Some((dt, lo, hi)) => PriorSpec::new(dt, lo, hi),
            None => PriorSpec::auto(&system.inner),
        }
        .map_err(py_err)?;
        readout::generate_readout(&system.inner, &prior, seed).map(|inner| PyReadout { inner }).map_err(py_err)
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }
    #[getter]
    fn t_total(&self) -> f64 {
        self.inner.t_total()
    }
    #[getter]
    fn samples(&self) -> Vec<f64> {
        self.inner.samples().to_vec()
    }

    fn smoothed(&self, window: f64) -> Self {
        PyReadout { inner: readout::smooth_readout(&self.inner, window) }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Unit-normalized states with the accumulated `ln‖ψ‖²`.
#[pyclass(name = "Trajectory", frozen, module = "pycontmeas")]
struct PyTrajectory {
    inner: rpi::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }
    #[getter]
    fn p2(&self) -> Vec<f64> {
        self.inner.p2.clone()
    }
    #[getter]
    fn log_norm_sq(&self) -> Vec<f64> {
        self.inner.log_norm_sq.clone()
    }
    /// `(c1, c2)` at every recorded time, unnormalized.
    #[getter]
    fn amplitudes(&self) -> Vec<(C64, C64)> {
        (0..self.inner.len()).map(|i| self.inner.amplitudes(i)).map(|a| (a.c1, a.c2)).collect()
    }
    #[getter]
    fn final_p2(&self) -> f64 {
        self.inner.final_p2()
    }
    /// `P[E] = ‖ψ_T‖²`.
    #[getter]
    fn probability_density(&self) -> f64 {
        rpi::probability_density(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Integrates the complex-Hamiltonian dynamics for one readout.
#[pyfunction]
#[pyo3(signature = (system, readout, initial=None))]
fn integrate_rpi(
    py: Python<'_>,
    system: &PySystem,
    readout: &PyReadout,
    initial: Option<(C64, C64)>,
) -> PyResult<PyTrajectory> {
    let (cfg, curve) = (system.inner, readout.inner.clone());
    py.detach(move || rpi::integrate_rpi(&cfg, &curve, state(initial)))
        .map(|inner| PyTrajectory { inner })
        .map_err(py_err)
}

fn estimate_dict<'py>(py: Python<'py>, e: &Estimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("value", e.value)?;
    d.set_item("se", e.se)?;
    Ok(d)
}

fn stats_dict<'py>(py: Python<'py>, s: &EnsembleStats) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("n", s.n_samples)?;
    d.set_item("ess", s.ess)?;
    for (name, e) in [
        ("p_transition_state", &s.p_transition_state),
        ("p_valid_positive", &s.p_transition_readout),
        ("p_valid_negative", &s.p_stay_readout),
        ("noise", &s.noise),
        ("false_positive", &s.false_positive),
        ("false_negative", &s.false_negative),
        ("valid_difference", &s.valid_difference),
    ] {
        d.set_item(name, estimate_dict(py, e)?)?;
    }
    Ok(d)
}

/// Class probabilities of a readout ensemble; `sampler` is `"rpi"` (flat
/// prior, weighted) or `"micro"` (ancestral).
#[pyfunction]
#[pyo3(signature = (system, n, seed, sampler="rpi", smoothing_window=None))]
fn run_ensemble<'py>(
    py: Python<'py>,
    system: &PySystem,
    n: usize,
    seed: u64,
    sampler: &str,
    smoothing_window: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = system.inner;
    let stats = match sampler {
        "rpi" => py.detach(|| {
            let prior = PriorSpec::auto(&cfg)?;
            readout::run_ensemble_with(
                &cfg,
                &prior,
                n,
                seed,
                &EnsembleOptions { smoothing_window, ..Default::default() },
            )
        }),
        "micro" => py.detach(|| {
            let (model, series_n) = micro::default_model(&cfg)?;
            let opts = MicroEnsembleOptions { smoothing_window, ..Default::default() };
            micro::run_micro_ensemble(&cfg, &model, series_n, n, seed, &opts)
        }),
        other => return Err(PyValueError::new_err(format!("unknown sampler `{other}` (expected `rpi` or `micro`)"))),
    }
    .map_err(py_err)?;
    stats_dict(py, &stats)
}

/// One observation-by-observation run with the default matched model.
#[pyfunction]
#[pyo3(signature = (system, seed, force=false))]
fn micro_run<'py>(py: Python<'py>, system: &PySystem, seed: u64, force: bool) -> PyResult<Bound<'py, PyDict>> {
    let cfg = system.inner;
    let run = py
        .detach(|| {
            let (model, series_n) = micro::default_model(&cfg)?;
            micro::micro_trajectory_with(
                &cfg,
                &model,
                series_n,
                seed,
                &MicroOptions { force, initial: AmplitudePair::ground() },
            )
        })
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("series_t", run.series.iter().map(|s| s.t_start).collect::<Vec<_>>())?;
    d.set_item("series_n", run.series.iter().map(|s| s.n_ratio).collect::<Vec<_>>())?;
    d.set_item("readout", PyReadout { inner: run.readout })?;
    d.set_item("trajectory", PyTrajectory { inner: run.trajectory })?;
    d.set_item("feasible", run.feasibility.passed())?;
    Ok(d)
}

/// Runs the oracle suite; returns `[(name, value, threshold, passed)]`.
#[pyfunction]
#[pyo3(signature = (seed=1, cross_n=0))]
fn validation_suite(py: Python<'_>, seed: u64, cross_n: usize) -> PyResult<Vec<(String, f64, f64, bool)>> {
    let rows = py.detach(|| validate::run_validation_suite(seed, cross_n)).map_err(py_err)?;
    Ok(rows.into_iter().map(|r| (r.name, r.value, r.threshold, r.passed)).collect())
}

/// Operator error of the built-in `vτ` sweep, `[(operator_error, predicted_bound)]`.
#[pyfunction]
fn equivalence_sweep() -> PyResult<Vec<(f64, f64)>> {
    let sweep = validate::equivalence_sweep().map_err(py_err)?;
    Ok(sweep.into_iter().map(|r| (r.operator_error, r.predicted_bound)).collect())
}

#[pyfunction]
fn gaussian_limit_error(p: f64, n: usize) -> PyResult<f64> {
    micro::gaussian_limit_error(p, n).map_err(py_err)
}

#[pymodule]
pub fn pycontmeas(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystem>()?;
    m.add_class::<PyReadout>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(integrate_rpi, m)?)?;
    m.add_function(wrap_pyfunction!(run_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(micro_run, m)?)?;
    m.add_function(wrap_pyfunction!(validation_suite, m)?)?;
    m.add_function(wrap_pyfunction!(equivalence_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_limit_error, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
