//! Time integration of the normalized curvature flow
//! ∂h/∂t = F − η(t)·h with F = f·h^{2−p}·ρ^{q−n}·σ_k(b).
//!
//! Two normalizations are supported. `Normalized` takes
//! η = ∫ρ^{q−n}·h·σ_k dσ / ∫h^p/f dσ, which conserves J = ∫h^p/f dσ along
//! the continuum flow; the discrete drift of J is then a pure time-stepping
//! effect of order dt and is monitored. `FixedOne` takes η ≡ 1, valid in
//! the window k+1 < q−n < p−k−1 for data with min F/h > 1, where h is
//! pointwise nondecreasing and F/h → 1.
//!
//! Steps are explicit Euler with a curvature-aware step-size bound, a polar
//! φ-mode filter on full grids, and reject/halve handling when a candidate
//! step leaves the convex cone.

use crate::calculus::apply_phi_filter;
use crate::error::{FlowError, GeometryError};
use crate::geometry::{curvature_pipeline, powr, speed_and_ratio, CurvatureField, SpeedFields};
use crate::grid::{GridKind, QuadratureRule, ScalarField, SphericalGrid};
use crate::params::{EtaMode, ParamSet};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Quadrature-level tolerance for the sandwich inequality
/// h_min^{k+1} ≤ (1/|S^{n−1}|)·∫h·σ_k dσ ≤ h_max^{k+1}.
pub const QUAD_SLACK: f64 = 1e-8;

const MAX_REJECTS: u32 = 20;

/// Initial convex surfaces, given by their support functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// h ≡ radius.
    Sphere { radius: f64 },
    /// Ball of the given radius centered at `center` (|center| < radius):
    /// h(x) = radius + ⟨center, x⟩.
    TranslatedBall { radius: f64, center: Vec<f64> },
    /// Ellipsoid with the given semi-axes: h(x) = √(Σ aᵢ²xᵢ²).
    /// Full grids take [a, b, c]; axisymmetric grids take
    /// [transverse, axial].
    EllipsoidSupport { axes: Vec<f64> },
    /// h = radius·(1 + amplitude·P₂(⟨direction, x⟩)) with the Legendre
    /// polynomial P₂(u) = (3u² − 1)/2.
    PerturbedSphere {
        radius: f64,
        amplitude: f64,
        direction: Vec<f64>,
    },
}

fn check_axis_vector(v: &[f64], grid: &SphericalGrid, what: &str) -> Result<(), FlowError> {
    if v.len() != grid.dim_n as usize {
        return Err(FlowError::BadInitial {
            message: format!(
                "{what} must have {} components, got {}",
                grid.dim_n,
                v.len()
            ),
        });
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(FlowError::BadInitial {
            message: format!("{what} has non-finite components"),
        });
    }
    if grid.kind == GridKind::Axisymmetric && v[..v.len() - 1].iter().any(|c| *c != 0.0) {
        return Err(FlowError::BadInitial {
            message: format!("{what} must point along the symmetry axis on an axisymmetric grid"),
        });
    }
    Ok(())
}

/// Sample an initial support function on a grid.
pub fn build_initial(
    init: &InitialData,
    grid: &Arc<SphericalGrid>,
) -> Result<ScalarField, FlowError> {
    match init {
        InitialData::Sphere { radius } => {
            if !(radius.is_finite() && *radius > 0.0) {
                return Err(FlowError::BadInitial {
                    message: format!("sphere radius must be positive, got {radius}"),
                });
            }
            Ok(ScalarField::constant(grid, *radius))
        }
        InitialData::TranslatedBall { radius, center } => {
            check_axis_vector(center, grid, "center")?;
            let norm = center.iter().map(|c| c * c).sum::<f64>().sqrt();
            if !(radius.is_finite() && *radius > 0.0 && norm < *radius) {
                return Err(FlowError::BadInitial {
                    message: format!("translated ball needs |center| = {norm} < radius = {radius}"),
                });
            }
            let axial = center[center.len() - 1];
            Ok(match grid.kind {
                GridKind::Axisymmetric => {
                    ScalarField::from_fn(grid, |t, _| radius + axial * t.cos())
                }
                GridKind::FullS2 => ScalarField::from_fn(grid, |t, p| {
                    let x = [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()];
                    radius + center[0] * x[0] + center[1] * x[1] + center[2] * x[2]
                }),
            })
        }
        InitialData::EllipsoidSupport { axes } => {
            let expected = match grid.kind {
                GridKind::FullS2 => 3,
                GridKind::Axisymmetric => 2,
            };
            if axes.len() != expected || axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                return Err(FlowError::BadInitial {
                    message: format!("ellipsoid needs {expected} positive semi-axes, got {axes:?}"),
                });
            }
            Ok(match grid.kind {
                GridKind::Axisymmetric => {
                    let (a, c) = (axes[0], axes[1]);
                    ScalarField::from_fn(grid, |t, _| {
                        ((a * t.sin()).powi(2) + (c * t.cos()).powi(2)).sqrt()
                    })
                }
                GridKind::FullS2 => ScalarField::from_fn(grid, |t, p| {
                    let x = [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()];
                    ((axes[0] * x[0]).powi(2) + (axes[1] * x[1]).powi(2) + (axes[2] * x[2]).powi(2))
                        .sqrt()
                }),
            })
        }
        InitialData::PerturbedSphere {
            radius,
            amplitude,
            direction,
        } => {
            check_axis_vector(direction, grid, "direction")?;
            let norm = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(FlowError::BadInitial {
                    message: format!("direction must be a unit vector (|d| = {norm})"),
                });
            }
            if !(radius.is_finite() && *radius > 0.0) || amplitude.abs() > 0.5 {
                return Err(FlowError::BadInitial {
                    message: format!(
                        "perturbed sphere needs radius > 0 and |amplitude| <= 0.5, \
                         got radius = {radius}, amplitude = {amplitude}"
                    ),
                });
            }
            let p2 = |u: f64| 0.5 * (3.0 * u * u - 1.0);
            Ok(match grid.kind {
                GridKind::Axisymmetric => {
                    let sign = direction[direction.len() - 1].signum();
                    ScalarField::from_fn(grid, |t, _| {
                        radius * (1.0 + amplitude * p2(sign * t.cos()))
                    })
                }
                GridKind::FullS2 => ScalarField::from_fn(grid, |t, p| {
                    let x = [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()];
                    let u = direction[0] * x[0] + direction[1] * x[1] + direction[2] * x[2];
                    radius * (1.0 + amplitude * p2(u))
                }),
            })
        }
    }
}

/// Normalization rate η for the current configuration:
/// ∫ρ^{q−n}·h·σ_k dσ / ∫h^p/f dσ in `Normalized` mode, exactly 1 in
/// `FixedOne` mode.
pub fn compute_eta(
    curv: &CurvatureField,
    f_vals: &[f64],
    params: &ParamSet,
    rule: &QuadratureRule,
) -> Result<f64, FlowError> {
    if params.eta_mode == EtaMode::FixedOne {
        return Ok(1.0);
    }
    let qn = params.q_minus_n();
    let nodes = curv.h.len();
    let mut num = vec![0.0; nodes];
    let mut den = vec![0.0; nodes];
    for id in 0..nodes {
        num[id] = powr(curv.rho[id], qn, "rho^(q-n)")? * curv.h[id] * curv.sigma[id];
        den[id] = powr(curv.h[id], params.p, "h^p")? / f_vals[id];
    }
    let eta = rule.integrate_values(&num) / rule.integrate_values(&den);
    if !(eta.is_finite() && eta > 0.0) {
        return Err(FlowError::BadEta(eta));
    }
    Ok(eta)
}

/// Step-size controls and run budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    /// Multiplier on the stability-limited step (≤ 0.375 keeps the explicit
    /// scheme inside its 5-point stencil stability region).
    pub dt_safety: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_max: f64,
    pub max_steps: u64,
    /// Convergence threshold on max|F/h − c|.
    pub tol_res: f64,
    /// Monitor tolerance for conserved/monotone quantities; a violation
    /// beyond 10× aborts the run.
    pub tol_invariant: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            dt_safety: 0.2,
            dt_min: 1e-10,
            dt_max: 1e-2,
            t_max: 100.0,
            max_steps: 1_000_000,
            tol_res: 1e-6,
            tol_invariant: 1e-3,
        }
    }
}

/// Largest stable step for the current configuration: the minimum of a
/// parabolic bound Δ_eff²/max(N·λ_max(σ_k^{ij})) and a reaction bound
/// 0.5/max(|F/h − η|·(|e|+1)), scaled by `dt_safety` and clamped to
/// `dt_max`. Errors with `Stiffness` if the result falls below `dt_min`.
pub fn choose_dt(
    grid: &SphericalGrid,
    curv: &CurvatureField,
    sf: &SpeedFields,
    eta: f64,
    params: &ParamSet,
    ctl: &StepControl,
) -> Result<f64, FlowError> {
    let mut diff_max = 0.0f64;
    let mut react_max = 0.0f64;
    for id in 0..curv.h.len() {
        diff_max = diff_max.max(sf.mobility[id] * curv.sigma_partial_max[id]);
        react_max = react_max.max((sf.ratio[id] - eta).abs());
    }
    let parabolic = if diff_max > 0.0 {
        16.0 / 3.0 / (grid.stiffness_symbol() * diff_max)
    } else {
        f64::INFINITY
    };
    let rate = react_max * (params.speed_exponent().abs() + 1.0);
    let reaction = if rate > 0.0 {
        0.5 / rate
    } else {
        f64::INFINITY
    };
    let dt = (ctl.dt_safety * parabolic.min(reaction)).min(ctl.dt_max);
    if !(dt.is_finite() && dt >= ctl.dt_min) {
        return Err(FlowError::Stiffness {
            required: dt,
            dt_min: ctl.dt_min,
        });
    }
    Ok(dt)
}

/// One row of the per-step diagnostics (the CSV schema of the run output).
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub eta: f64,
    pub j: f64,
    pub fh_min: f64,
    pub fh_max: f64,
    pub residual: f64,
    pub convexity_margin: f64,
    pub kappa_max: f64,
    pub mv_lower_slack: f64,
    pub mv_upper_slack: f64,
    pub j_drift: f64,
}

/// Everything derived from the current h that the stepper and monitors
/// consume; recomputed exactly once per accepted step. `residual` is the
/// stopping quantity sup|F/h − η|; in FixedOne mode it coincides with the
/// elliptic max-norm residual at right-hand side 1.
struct Evaluation {
    curv: CurvatureField,
    sf: SpeedFields,
    eta: f64,
    j: f64,
    mv: f64,
    fh_min: f64,
    fh_max: f64,
    residual: f64,
}

fn evaluate(
    h: &ScalarField,
    f_vals: &[f64],
    params: &ParamSet,
    rule: &QuadratureRule,
) -> Result<Evaluation, FlowError> {
    let curv = curvature_pipeline(h, params.k as usize)?;
    if curv.margin <= 0.0 {
        return Err(FlowError::Geometry(nonconvex(&curv)));
    }
    let sf = speed_and_ratio(&curv, f_vals, params)?;
    let eta = compute_eta(&curv, f_vals, params, rule)?;
    let nodes = h.values.len();
    let mut jv = vec![0.0; nodes];
    for id in 0..nodes {
        jv[id] = powr(h.values[id], params.p, "h^p")? / f_vals[id];
    }
    let j = rule.integrate_values(&jv);
    let mv = rule.integrate_product(&curv.h, &curv.sigma) / h.grid().area();
    let mut fh_min = f64::INFINITY;
    let mut fh_max = f64::NEG_INFINITY;
    let mut residual = 0.0f64;
    for id in 0..nodes {
        fh_min = fh_min.min(sf.ratio[id]);
        fh_max = fh_max.max(sf.ratio[id]);
        residual = residual.max((sf.ratio[id] - eta).abs());
    }
    Ok(Evaluation {
        curv,
        sf,
        eta,
        j,
        mv,
        fh_min,
        fh_max,
        residual,
    })
}

/// Running extrema and violation counters for the flow invariants.
#[derive(Debug, Clone)]
pub struct Monitors {
    pub tol_invariant: f64,
    /// Largest |J − J₀|/J₀ seen (Normalized mode).
    pub worst_j_drift: f64,
    /// Largest excursion of F/h above/below its theoretical envelope
    /// (the initial range of F/h widened by the range of η).
    pub worst_envelope_excess: f64,
    /// Largest per-step growth of max(Fh_max − η, 0), which the maximum
    /// principle makes non-increasing along the continuum flow.
    pub worst_excess_growth: f64,
    /// Most negative sandwich slack seen (0 if none went negative).
    pub worst_sandwich_defect: f64,
    /// Largest pointwise decrease of h between steps (FixedOne mode).
    pub worst_monotonicity_defect: f64,
    /// Number of records exceeding their tolerance (without aborting).
    pub violations: u64,
}

impl Monitors {
    fn new(tol_invariant: f64) -> Self {
        Monitors {
            tol_invariant,
            worst_j_drift: 0.0,
            worst_envelope_excess: 0.0,
            worst_excess_growth: 0.0,
            worst_sandwich_defect: 0.0,
            worst_monotonicity_defect: 0.0,
            violations: 0,
        }
    }

    fn check(&mut self, what: &str, magnitude: f64, tol: f64) -> Result<(), FlowError> {
        if magnitude > 10.0 * tol {
            return Err(FlowError::InvariantViolation {
                what: what.to_string(),
                magnitude,
                tol,
            });
        }
        if magnitude > tol {
            self.violations += 1;
        }
        Ok(())
    }
}

/// The evolving surface plus everything needed to advance and audit it.
pub struct FlowState {
    pub h: ScalarField,
    pub t: f64,
    /// Accepted steps so far.
    pub step_index: u64,
    pub params: ParamSet,
    pub f_vals: Vec<f64>,
    rule: QuadratureRule,
    eval: Evaluation,
    j0: f64,
    fh_min0: f64,
    fh_max0: f64,
    eta_inf: f64,
    eta_sup: f64,
    prev_h: Vec<f64>,
    prev_excess: f64,
    /// FixedOne monotonicity is only a theorem when the data starts
    /// strictly expanding.
    monotone_armed: bool,
    pub monitors: Monitors,
}

impl FlowState {
    /// Validate and freeze an initial configuration. Requires strict
    /// convexity; FixedOne mode additionally requires min F/h > 1.
    pub fn new(
        h: ScalarField,
        params: ParamSet,
        f_vals: Vec<f64>,
        rule: QuadratureRule,
        ctl: &StepControl,
    ) -> Result<FlowState, FlowError> {
        if f_vals.len() != h.values.len() {
            return Err(FlowError::Grid(crate::error::GridError::LengthMismatch {
                got: f_vals.len(),
                expected: h.values.len(),
            }));
        }
        let eval = evaluate(&h, &f_vals, &params, &rule)?;
        // FixedOne mode needs F/h ≥ 1: strictly expanding data carries the
        // monotonicity guarantee, and F/h ≡ 1 is stationary. Anything
        // below 1 would contract and has no theory behind it.
        if params.eta_mode == EtaMode::FixedOne && eval.fh_min < 1.0 {
            return Err(FlowError::NotInitiallyExpanding {
                min_ratio: eval.fh_min,
            });
        }
        let monotone_armed = params.eta_mode == EtaMode::FixedOne && eval.fh_min > 1.0;
        let prev_h = h.values.clone();
        Ok(FlowState {
            j0: eval.j,
            fh_min0: eval.fh_min,
            fh_max0: eval.fh_max,
            eta_inf: eval.eta,
            eta_sup: eval.eta,
            monitors: Monitors::new(ctl.tol_invariant),
            prev_h,
            prev_excess: (eval.fh_max - eval.eta).max(0.0),
            monotone_armed,
            h,
            t: 0.0,
            step_index: 0,
            params,
            f_vals,
            rule,
            eval,
        })
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        self.h.grid()
    }

    /// J = ∫h^p/f dσ at the initial time.
    pub fn j_initial(&self) -> f64 {
        self.j0
    }

    /// Current max-norm residual max|F/h − c|.
    pub fn residual(&self) -> f64 {
        self.eval.residual
    }

    /// Current convexity margin min λ_min(b).
    pub fn convexity_margin(&self) -> f64 {
        self.eval.curv.margin
    }

    fn record(&self, dt: f64, eta_used: f64) -> DiagnosticsRecord {
        let e = &self.eval;
        DiagnosticsRecord {
            step: self.step_index,
            t: self.t,
            dt,
            h_min: self.h.min(),
            h_max: self.h.max(),
            eta: eta_used,
            j: e.j,
            fh_min: e.fh_min,
            fh_max: e.fh_max,
            residual: e.residual,
            convexity_margin: e.curv.margin,
            kappa_max: 1.0 / e.curv.margin,
            mv_lower_slack: (e.mv - self.h.min().powi(self.params.k as i32 + 1)) / e.mv,
            mv_upper_slack: (self.h.max().powi(self.params.k as i32 + 1) - e.mv) / e.mv,
            j_drift: (e.j - self.j0) / self.j0,
        }
    }
}

fn nonconvex(curv: &CurvatureField) -> GeometryError {
    let node = curv
        .lambda_min
        .iter()
        .position(|&v| v == curv.margin)
        .unwrap_or(0);
    GeometryError::NonConvex {
        node,
        margin: curv.margin,
    }
}

/// Advance one accepted Euler step, halving the step size on candidates
/// that leave the convex cone or the admissible power range. Returns the
/// diagnostics row for the accepted step.
pub fn step(state: &mut FlowState, ctl: &StepControl) -> Result<DiagnosticsRecord, FlowError> {
    let grid = Arc::clone(state.h.grid());
    let eta = state.eval.eta;
    let mut dt = choose_dt(
        &grid,
        &state.eval.curv,
        &state.eval.sf,
        eta,
        &state.params,
        ctl,
    )?;
    let remaining = ctl.t_max - state.t;
    let mut lands_on_t_max = false;
    if remaining > 0.0 && dt >= remaining {
        dt = remaining;
        lands_on_t_max = true;
    }

    let mut attempts = 0u32;
    loop {
        let mut values = Vec::with_capacity(state.h.values.len());
        for id in 0..state.h.values.len() {
            values.push(
                state.h.values[id] + dt * (state.eval.sf.speed[id] - eta * state.h.values[id]),
            );
        }
        apply_phi_filter(&grid, &mut values);
        let candidate = match ScalarField::from_values(&grid, values) {
            Ok(c) => c,
            Err(_) => {
                attempts += 1;
                if attempts >= MAX_REJECTS {
                    return Err(FlowError::ConvexityLoss { attempts, dt });
                }
                dt *= 0.5;
                lands_on_t_max = false;
                continue;
            }
        };
        match evaluate(&candidate, &state.f_vals, &state.params, &state.rule) {
            Ok(eval) => {
                state.prev_h.clone_from(&state.h.values);
                state.h = candidate;
                state.t = if lands_on_t_max {
                    ctl.t_max
                } else {
                    state.t + dt
                };
                state.step_index += 1;
                state.eta_inf = state.eta_inf.min(eval.eta);
                state.eta_sup = state.eta_sup.max(eval.eta);
                state.eval = eval;
                let rec = state.record(dt, eta);
                audit(state, &rec)?;
                return Ok(rec);
            }
            Err(FlowError::Geometry(_)) => {
                attempts += 1;
                if attempts >= MAX_REJECTS {
                    return Err(FlowError::ConvexityLoss { attempts, dt });
                }
                dt *= 0.5;
                lands_on_t_max = false;
            }
            Err(other) => return Err(other),
        }
    }
}

/// Check the post-step record against the flow's invariants.
fn audit(state: &mut FlowState, rec: &DiagnosticsRecord) -> Result<(), FlowError> {
    if !(rec.eta.is_finite() && rec.eta > 0.0) {
        return Err(FlowError::BadEta(rec.eta));
    }
    let tol = state.monitors.tol_invariant;
    if state.params.eta_mode == EtaMode::Normalized {
        let drift = rec.j_drift.abs();
        state.monitors.worst_j_drift = state.monitors.worst_j_drift.max(drift);
        state.monitors.check("J drift", drift, tol)?;
    }
    // F/h must stay inside the envelope spanned by its initial range and
    // the range of η.
    let hi_bound = state.fh_max0.max(state.eta_sup);
    let lo_bound = state.fh_min0.min(state.eta_inf);
    let excess = (rec.fh_max - hi_bound).max(lo_bound - rec.fh_min).max(0.0);
    state.monitors.worst_envelope_excess = state.monitors.worst_envelope_excess.max(excess);
    state
        .monitors
        .check("F/h envelope excursion", excess, tol)?;
    // Per-step contraction of the positive part of Fh_max − η, both taken
    // at the new time (rec.eta is the value used for the step, i.e. the
    // old one).
    let excess_now = (rec.fh_max - state.eval.eta).max(0.0);
    let growth = (excess_now - state.prev_excess).max(0.0);
    state.prev_excess = excess_now;
    state.monitors.worst_excess_growth = state.monitors.worst_excess_growth.max(growth);
    state.monitors.check("F/h excess growth", growth, tol)?;
    if state.monotone_armed {
        let below_one = (1.0 - rec.fh_min).max(0.0);
        state
            .monitors
            .check("F/h dropped below 1", below_one, tol)?;
        let mut defect = 0.0f64;
        for (new, old) in state.h.values.iter().zip(&state.prev_h) {
            defect = defect.max(old - new);
        }
        state.monitors.worst_monotonicity_defect =
            state.monitors.worst_monotonicity_defect.max(defect);
        state
            .monitors
            .check("h monotonicity defect", defect, 1e-6)?;
    }
    let sandwich_defect = (-rec.mv_lower_slack).max(-rec.mv_upper_slack).max(0.0);
    state.monitors.worst_sandwich_defect =
        state.monitors.worst_sandwich_defect.max(sandwich_defect);
    state
        .monitors
        .check("sandwich slack", sandwich_defect, QUAD_SLACK)?;
    Ok(())
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// max|F/h − c| ≤ tol_res.
    Converged,
    /// t_max or max_steps reached first.
    TimeCapped,
    /// A monitor or stepper error stopped the run.
    Aborted,
}

/// Final report of a flow run.
#[derive(Debug)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub steps: u64,
    pub t_final: f64,
    pub residual: f64,
    pub last_record: Option<DiagnosticsRecord>,
    pub monitors: Monitors,
    /// Human-readable cause when status is Aborted.
    pub abort_reason: Option<String>,
}

/// Evolve until the residual converges, the time/step budget runs out, or
/// an invariant aborts the run. Every accepted step's diagnostics row is
/// passed to `sink` together with the post-step field (CSV streaming,
/// snapshots, progress displays).
pub fn run(
    state: &mut FlowState,
    ctl: &StepControl,
    mut sink: impl FnMut(&DiagnosticsRecord, &ScalarField),
) -> RunOutcome {
    let mut last: Option<DiagnosticsRecord> = None;
    loop {
        if state.eval.residual <= ctl.tol_res {
            if state.params.eta_mode == EtaMode::FixedOne {
                // With η ≡ 1 the stopping residual is literally the
                // max-norm defect of f·h^{1−p}·ρ^{q−n}·σ_k = 1.
                debug_assert!(
                    crate::geometry::elliptic_residual(&state.h, &state.f_vals, &state.params, 1.0)
                        .map(|(_, sup)| sup <= ctl.tol_res)
                        .unwrap_or(false),
                    "converged state fails the elliptic residual check"
                );
            }
            return RunOutcome {
                status: RunStatus::Converged,
                steps: state.step_index,
                t_final: state.t,
                residual: state.eval.residual,
                last_record: last,
                monitors: state.monitors.clone(),
                abort_reason: None,
            };
        }
        if state.t >= ctl.t_max || state.step_index >= ctl.max_steps {
            return RunOutcome {
                status: RunStatus::TimeCapped,
                steps: state.step_index,
                t_final: state.t,
                residual: state.eval.residual,
                last_record: last,
                monitors: state.monitors.clone(),
                abort_reason: None,
            };
        }
        match step(state, ctl) {
            Ok(rec) => {
                sink(&rec, &state.h);
                last = Some(rec);
            }
            Err(err) => {
                return RunOutcome {
                    status: RunStatus::Aborted,
                    steps: state.step_index,
                    t_final: state.t,
                    residual: state.eval.residual,
                    last_record: last,
                    monitors: state.monitors.clone(),
                    abort_reason: Some(err.to_string()),
                };
            }
        }
    }
}
