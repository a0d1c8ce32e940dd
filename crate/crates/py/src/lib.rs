//! Python bindings for the osmprobe toolkit.
//!
//! Exposes the benchmark workbench (mesh + assembled interface operators)
//! and the four workflows — probe, sweep, solve, compare — to Python.
//! Heavy data stays on the Rust side; results cross the boundary as JSON or
//! CSV strings and plain lists of floats, so the module has no dependency on
//! numpy or any Python-side framework.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use osmprobe_core::experiment::{
    cmd_compare, cmd_probe, cmd_solve, cmd_sweep, compare_to_csv, exact_spectral_radius,
    sweep_to_csv, ExperimentConfig, Preset, SweepSpec, Workbench as CoreWorkbench,
};
use osmprobe_core::probing::sine_probes;
use osmprobe_core::schur::strip_laplace_eigenvalue;
use osmprobe_core::transmission::fourier_estimate;
use osmprobe_core::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Json(_) | Error::DimensionMismatch { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_preset(name: &str) -> PyResult<Preset> {
    match name.replace('_', "-").as_str() {
        "laplace-strip" => Ok(Preset::LaplaceStrip),
        "curved-advection" => Ok(Preset::CurvedAdvection),
        other => Err(PyValueError::new_err(format!(
            "unknown preset {other:?}; expected \"laplace-strip\" or \"curved-advection\""
        ))),
    }
}

/// One assembled two-subdomain benchmark: mesh, interface operators and the
/// transmission family under study.
#[pyclass(frozen)]
struct Workbench {
    inner: CoreWorkbench,
}

#[pymethods]
impl Workbench {
    /// Build from a JSON experiment configuration (same schema as the CLI's
    /// --config file).
    #[new]
    fn new(config_json: &str) -> PyResult<Self> {
        let config = ExperimentConfig::from_json(config_json).map_err(to_py_err)?;
        let inner = CoreWorkbench::build(config).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// Build one of the named presets with default settings.
    #[staticmethod]
    fn preset(name: &str, interface_nodes: usize) -> PyResult<Self> {
        let preset = parse_preset(name)?;
        let config = ExperimentConfig::preset_default(preset, interface_nodes);
        let inner = CoreWorkbench::build(config).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// The active configuration as JSON.
    fn config_json(&self) -> PyResult<String> {
        self.inner.config.to_json().map_err(to_py_err)
    }

    /// Number of interior interface unknowns.
    fn interface_dim(&self) -> usize {
        self.inner.interface_dim()
    }

    /// Total mesh nodes across both subdomains.
    fn node_count(&self) -> usize {
        self.inner.mesh.nodes.len()
    }

    /// Polyline length of the interface curve.
    fn interface_arclength(&self) -> f64 {
        self.inner.mesh.interface_arclength()
    }

    /// Names of the transmission parameters being fitted.
    fn param_names(&self) -> Vec<String> {
        self.inner
            .family
            .param_names()
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    /// Apply one interface operator (costs one subdomain solve).
    fn schur_apply(&self, side: u8, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_side_and_len(side, x.len())?;
        Ok(self.inner.problem.sigma(side).apply(&x))
    }

    /// Apply the inverse of one interface operator (one subdomain solve with
    /// natural interface data).
    fn schur_apply_inverse(&self, side: u8, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_side_and_len(side, x.len())?;
        Ok(self.inner.problem.sigma(side).apply_inverse(&x))
    }

    /// Condensed interface load μ = μ₁ + μ₂.
    fn interface_load(&self) -> Vec<f64> {
        self.inner.problem.mu()
    }

    /// Subdomain solves performed so far on this workbench.
    fn solve_count(&self) -> u64 {
        self.inner.counter.get()
    }

    /// Run the probing calibration; returns the report as JSON.
    fn probe(&self) -> PyResult<String> {
        let outcome = cmd_probe(&self.inner).map_err(to_py_err)?;
        serde_json::to_string_pretty(&outcome)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// Brute-force map of the convergence factor over a log grid of
    /// parameters; returns CSV with one row per grid point.
    fn sweep(&self, min: Vec<f64>, max: Vec<f64>, points: usize) -> PyResult<String> {
        let spec = SweepSpec { min, max, points };
        let result = cmd_sweep(&self.inner, &spec).map_err(to_py_err)?;
        let mut buf = Vec::new();
        sweep_to_csv(&self.inner, &result, &mut buf).map_err(to_py_err)?;
        String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// Run the interface iteration at the given parameters; returns the
    /// convergence report as JSON.
    fn solve(&self, params: Vec<f64>) -> PyResult<String> {
        let outcome = cmd_solve(&self.inner, &params).map_err(to_py_err)?;
        serde_json::to_string_pretty(&outcome)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// Calibrate by frequency symbols, sine probes and enriched random
    /// probes, then iterate with each parameter set; returns CSV.
    fn compare(&self) -> PyResult<String> {
        let rows = cmd_compare(&self.inner).map_err(to_py_err)?;
        let mut buf = Vec::new();
        compare_to_csv(&rows, &mut buf).map_err(to_py_err)?;
        String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// Classical frequency-symbol calibration; returns (params, predicted
    /// convergence factor).
    fn fourier_fit(&self) -> PyResult<(Vec<f64>, f64)> {
        let (s1, s2) = self.inner.fourier_symbols();
        let (kmin, kmax) = self.inner.frequency_band();
        let fit = fourier_estimate(
            &self.inner.family,
            s1.as_ref(),
            s2.as_ref(),
            kmin,
            kmax,
            self.inner.config.fourier_samples,
        )
        .map_err(to_py_err)?;
        Ok((fit.params, fit.rho))
    }

    /// Exact spectral radius of the iteration operator at the given
    /// parameters (dense eigenvalue computation).
    fn spectral_radius(&self, params: Vec<f64>) -> PyResult<f64> {
        exact_spectral_radius(&self.inner, &params).map_err(to_py_err)
    }
}

impl Workbench {
    fn check_side_and_len(&self, side: u8, len: usize) -> PyResult<()> {
        if side != 1 && side != 2 {
            return Err(PyValueError::new_err(format!(
                "side must be 1 or 2, got {side}"
            )));
        }
        let n = self.inner.interface_dim();
        if len != n {
            return Err(PyValueError::new_err(format!(
                "interface vector must have length {n}, got {len}"
            )));
        }
        Ok(())
    }
}

/// Default JSON configuration for a named preset.
#[pyfunction]
fn default_config(preset: &str, interface_nodes: usize) -> PyResult<String> {
    let preset = parse_preset(preset)?;
    ExperimentConfig::preset_default(preset, interface_nodes)
        .to_json()
        .map_err(to_py_err)
}

/// The three frequency-targeted sine probes on an n-point interface.
#[pyfunction]
fn sine_probe_set(n: usize) -> Vec<Vec<f64>> {
    sine_probes(n).into_iter().map(|p| p.values).collect()
}

/// Closed-form interface eigenvalue of the k-th sine mode for the flat
/// unit-width strip with nx intervals of size h across each subdomain.
#[pyfunction]
fn strip_mode_value(k: usize, nx: usize, h: f64) -> f64 {
    strip_laplace_eigenvalue(k, nx, h)
}

#[pymodule]
fn osmprobe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Workbench>()?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(sine_probe_set, m)?)?;
    m.add_function(wrap_pyfunction!(strip_mode_value, m)?)?;
    Ok(())
}
