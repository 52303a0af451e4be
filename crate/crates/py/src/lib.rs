//! Python bindings for the curvature-flow solver: exponent validation, grid
//! construction with the geometric operators, and whole-run drivers that
//! accept the same TOML configuration text as the command-line tool.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cmflow::anisotropy::condition_a_margin;
use cmflow::config::parse_config;
use cmflow::flow::{build_initial, FlowState, RunStatus};
use cmflow::geometry::{curvature_pipeline, sigma_k_of_spectrum};
use cmflow::grid::{build_grid, GridKind, QuadratureRule, ScalarField, SphericalGrid};
use cmflow::params::{EtaMode, ParamSet};

fn parse_mode(name: &str) -> PyResult<EtaMode> {
    match name {
        "normalized" => Ok(EtaMode::Normalized),
        "fixed_one" => Ok(EtaMode::FixedOne),
        other => Err(PyValueError::new_err(format!(
            "eta_mode must be \"normalized\" or \"fixed_one\", got \"{other}\""
        ))),
    }
}

fn mode_name(mode: EtaMode) -> &'static str {
    match mode {
        EtaMode::Normalized => "normalized",
        EtaMode::FixedOne => "fixed_one",
    }
}

fn status_name(status: RunStatus) -> &'static str {
    match status {
        RunStatus::Converged => "converged",
        RunStatus::TimeCapped => "time_capped",
        RunStatus::Aborted => "aborted",
    }
}

fn value_err<E: std::fmt::Display>(err: E) -> PyErr {
    PyValueError::new_err(err.to_string())
}

/// Validated exponent set (n, k, p, q) with its regime classification.
#[pyclass(frozen)]
struct Params {
    inner: ParamSet,
}

#[pymethods]
impl Params {
    #[new]
    #[pyo3(signature = (n, k, p, q, eta_mode = "normalized", c_target = 1.0))]
    fn new(n: u32, k: u32, p: f64, q: f64, eta_mode: &str, c_target: f64) -> PyResult<Self> {
        let inner =
            ParamSet::new(n, k, p, q, parse_mode(eta_mode)?, c_target).map_err(value_err)?;
        Ok(Params { inner })
    }

    #[getter]
    fn n(&self) -> u32 {
        self.inner.n
    }

    #[getter]
    fn k(&self) -> u32 {
        self.inner.k
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q
    }

    #[getter]
    fn eta_mode(&self) -> &'static str {
        mode_name(self.inner.eta_mode)
    }

    #[getter]
    fn c_target(&self) -> f64 {
        self.inner.c_target
    }

    /// Regime name, e.g. "theorem-window".
    #[getter]
    fn regime(&self) -> String {
        self.inner.regime().name().to_owned()
    }

    /// q − n + k + 1 − p, the homogeneity degree of F/h on round spheres.
    #[getter]
    fn speed_exponent(&self) -> f64 {
        self.inner.speed_exponent()
    }

    /// p + k − 1 − q + n, the constant term of the admissibility condition.
    #[getter]
    fn condition_a_constant(&self) -> f64 {
        self.inner.condition_a_constant()
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(n={}, k={}, p={}, q={}, eta_mode=\"{}\", regime=\"{}\")",
            self.inner.n,
            self.inner.k,
            self.inner.p,
            self.inner.q,
            mode_name(self.inner.eta_mode),
            self.inner.regime().name()
        )
    }
}

/// A discrete sphere with its quadrature rule. Nodal fields are plain lists
/// ordered row-major (θ outer, φ inner).
#[pyclass(frozen)]
struct Grid {
    grid: Arc<SphericalGrid>,
    rule: QuadratureRule,
}

impl Grid {
    fn field(&self, values: Vec<f64>) -> PyResult<ScalarField> {
        ScalarField::from_values(&self.grid, values).map_err(value_err)
    }
}

#[pymethods]
impl Grid {
    #[new]
    #[pyo3(signature = (kind, n_theta, n_phi = None, dim_n = 3))]
    fn new(kind: &str, n_theta: usize, n_phi: Option<usize>, dim_n: u32) -> PyResult<Self> {
        let kind = match kind {
            "axisymmetric" => GridKind::Axisymmetric,
            "full_s2" => GridKind::FullS2,
            other => {
                return Err(PyValueError::new_err(format!(
                    "kind must be \"axisymmetric\" or \"full_s2\", got \"{other}\""
                )))
            }
        };
        let (grid, rule) = build_grid(kind, n_theta, n_phi, dim_n).map_err(value_err)?;
        Ok(Grid { grid, rule })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.grid.kind {
            GridKind::Axisymmetric => "axisymmetric",
            GridKind::FullS2 => "full_s2",
        }
    }

    #[getter]
    fn dim_n(&self) -> u32 {
        self.grid.dim_n
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.grid.node_count()
    }

    /// Surface area of the continuous sphere S^{n−1}.
    #[getter]
    fn area(&self) -> f64 {
        self.grid.area()
    }

    /// (θ, φ) of every node in field order (φ = 0 on axisymmetric grids).
    fn nodes(&self) -> Vec<(f64, f64)> {
        (0..self.grid.node_count())
            .map(|id| {
                let i = id / self.grid.n_phi;
                let j = id % self.grid.n_phi;
                let phi = self.grid.phi.get(j).copied().unwrap_or(0.0);
                (self.grid.theta[i], phi)
            })
            .collect()
    }

    /// ∫ values dμ over the sphere with the grid's quadrature rule.
    fn integrate(&self, values: Vec<f64>) -> PyResult<f64> {
        let field = self.field(values)?;
        cmflow::grid::integrate(&self.rule, &field).map_err(value_err)
    }

    /// Convexity and curvature summary of a support function: principal-radii
    /// margin, extremal curvature, and the radial distance range.
    fn curvature_summary<'py>(
        &self,
        py: Python<'py>,
        h: Vec<f64>,
        k: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let field = self.field(h)?;
        let curv = curvature_pipeline(&field, k).map_err(value_err)?;
        let (rho_min, rho_max) = curv
            .rho
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(*r), hi.max(*r))
            });
        let dict = PyDict::new(py);
        dict.set_item("margin", curv.margin)?;
        dict.set_item("convex", curv.margin > 0.0)?;
        dict.set_item("kappa_max", 1.0 / curv.margin)?;
        dict.set_item("h_min", field.min())?;
        dict.set_item("h_max", field.max())?;
        dict.set_item("rho_min", rho_min)?;
        dict.set_item("rho_max", rho_max)?;
        Ok(dict)
    }

    /// Per-node residual of f·h^(1−p)·ρ^(q−n)·σ_k = c and its max norm.
    #[pyo3(signature = (h, f, params, c_target = None))]
    fn elliptic_residual(
        &self,
        h: Vec<f64>,
        f: Vec<f64>,
        params: &Params,
        c_target: Option<f64>,
    ) -> PyResult<(Vec<f64>, f64)> {
        let field = self.field(h)?;
        let c = c_target.unwrap_or(params.inner.c_target);
        cmflow::geometry::elliptic_residual(&field, &f, &params.inner, c).map_err(value_err)
    }

    /// Dilate h so that min F/h = 1 + delta, returning (h_scaled, lambda).
    fn rescale_for_positivity(
        &self,
        h: Vec<f64>,
        f: Vec<f64>,
        params: &Params,
        delta: f64,
    ) -> PyResult<(Vec<f64>, f64)> {
        let field = self.field(h)?;
        let (scaled, lambda) =
            cmflow::geometry::rescale_for_positivity(&field, &f, &params.inner, delta)
                .map_err(value_err)?;
        Ok((scaled.values, lambda))
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(kind=\"{}\", n_theta={}, n_phi={}, dim_n={})",
            self.kind(),
            self.grid.n_theta,
            self.grid.n_phi,
            self.grid.dim_n
        )
    }
}

/// Normalized σ_k of a spectrum and its partial derivatives:
/// e_k(λ)/C(m, k), so σ_k(1, …, 1) = 1.
#[pyfunction]
fn sigma_k(eigs: Vec<f64>, k: usize) -> PyResult<(f64, Vec<f64>)> {
    if eigs.is_empty() || k == 0 || k > eigs.len() {
        return Err(PyValueError::new_err(format!(
            "need 1 <= k <= len(eigs), got k = {k} with {} eigenvalues",
            eigs.len()
        )));
    }
    let result = sigma_k_of_spectrum(&eigs, k);
    Ok((result.value, result.partials))
}

/// Classify an exponent set without constructing anything else.
#[pyfunction]
#[pyo3(signature = (n, k, p, q, eta_mode = "normalized"))]
fn validate_params<'py>(
    py: Python<'py>,
    n: u32,
    k: u32,
    p: f64,
    q: f64,
    eta_mode: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let params = ParamSet::new(n, k, p, q, parse_mode(eta_mode)?, 1.0).map_err(value_err)?;
    let dict = PyDict::new(py);
    dict.set_item("regime", params.regime().name())?;
    dict.set_item("speed_exponent", params.speed_exponent())?;
    dict.set_item("condition_a_constant", params.condition_a_constant())?;
    Ok(dict)
}

/// Evolve the flow described by a TOML configuration (the same schema the
/// command-line tool reads) and return the outcome with the final surface.
/// Output paths in the configuration are ignored; nothing is written.
#[pyfunction]
fn run_flow<'py>(py: Python<'py>, config_text: &str) -> PyResult<Bound<'py, PyDict>> {
    let config = parse_config(config_text).map_err(value_err)?;
    let params = config.param_set().map_err(value_err)?;
    let (grid, rule) = build_grid(
        config.grid.kind,
        config.grid.n_theta,
        config.grid.resolved_n_phi(),
        params.n,
    )
    .map_err(value_err)?;
    let f_vals = cmflow::anisotropy::eval_f(&config.f, &grid).map_err(value_err)?;
    let mut h0 = build_initial(&config.init, &grid).map_err(value_err)?;
    if let Some(delta) = config.control.rescale_delta {
        let (scaled, _) = cmflow::geometry::rescale_for_positivity(&h0, &f_vals, &params, delta)
            .map_err(value_err)?;
        h0 = scaled;
    }
    let ctl = config.control.step_control();

    let dict = PyDict::new(py);
    let mut state = match FlowState::new(h0, params, f_vals, rule, &ctl) {
        Ok(state) => state,
        Err(err) => {
            // Inadmissible data is an aborted run, mirroring the CLI.
            dict.set_item("status", "aborted")?;
            dict.set_item("steps", 0u64)?;
            dict.set_item("abort_reason", err.to_string())?;
            return Ok(dict);
        }
    };
    let outcome = cmflow::flow::run(&mut state, &ctl, |_, _| {});

    dict.set_item("status", status_name(outcome.status))?;
    dict.set_item("steps", outcome.steps)?;
    dict.set_item("t_final", outcome.t_final)?;
    dict.set_item("residual", outcome.residual)?;
    dict.set_item("abort_reason", outcome.abort_reason)?;
    dict.set_item("violations", outcome.monitors.violations)?;
    dict.set_item("worst_j_drift", outcome.monitors.worst_j_drift)?;
    dict.set_item(
        "worst_envelope_excess",
        outcome.monitors.worst_envelope_excess,
    )?;
    dict.set_item("worst_excess_growth", outcome.monitors.worst_excess_growth)?;
    dict.set_item(
        "worst_sandwich_defect",
        outcome.monitors.worst_sandwich_defect,
    )?;
    dict.set_item(
        "worst_monotonicity_defect",
        outcome.monitors.worst_monotonicity_defect,
    )?;
    dict.set_item("h_min", state.h.min())?;
    dict.set_item("h_max", state.h.max())?;
    dict.set_item("h", state.h.values.clone())?;
    Ok(dict)
}

/// Scan the anisotropy of a TOML configuration for the admissibility
/// condition; `passes` is None when the tabulation error band makes the
/// verdict inconclusive.
#[pyfunction]
#[pyo3(signature = (config_text, circles = 64, samples = 256))]
fn check_f<'py>(
    py: Python<'py>,
    config_text: &str,
    circles: usize,
    samples: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let config = parse_config(config_text).map_err(value_err)?;
    let params = config.param_set().map_err(value_err)?;
    let report = condition_a_margin(&config.f, &params, circles, samples).map_err(value_err)?;
    let dict = PyDict::new(py);
    dict.set_item("margin", report.margin)?;
    dict.set_item("tabulation_error", report.tabulation_error)?;
    dict.set_item("inconclusive", report.inconclusive)?;
    dict.set_item(
        "passes",
        if report.inconclusive {
            None
        } else {
            Some(report.passes())
        },
    )?;
    dict.set_item("circles", report.circles)?;
    dict.set_item("samples_per_circle", report.samples_per_circle)?;
    Ok(dict)
}

/// Solver bindings: exponent validation, spherical grids with the geometric
/// operators, and configuration-driven flow runs.
#[pymodule]
fn cmflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Params>()?;
    m.add_class::<Grid>()?;
    m.add_function(wrap_pyfunction!(sigma_k, m)?)?;
    m.add_function(wrap_pyfunction!(validate_params, m)?)?;
    m.add_function(wrap_pyfunction!(run_flow, m)?)?;
    m.add_function(wrap_pyfunction!(check_f, m)?)?;
    Ok(())
}
