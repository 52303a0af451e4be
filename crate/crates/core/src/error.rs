//! Error types shared across the solver modules.

use thiserror::Error;

/// Errors from grid construction and field/quadrature plumbing.
#[derive(Debug, Error)]
pub enum GridError {
    #[error("n_theta = {0} is too small (need n_theta >= 8)")]
    ThetaResolution(usize),
    #[error("n_phi = {0} is invalid (need n_phi >= 8 and even)")]
    PhiResolution(usize),
    #[error("ambient dimension n = {0} is invalid (need n >= 3)")]
    Dimension(u32),
    #[error("full spherical grids are implemented for n = 3 only (got n = {0})")]
    FullGridDimension(u32),
    #[error("field has {got} values but the grid has {expected} nodes")]
    LengthMismatch { got: usize, expected: usize },
    #[error("field and rule/grid belong to different grids")]
    GridMismatch,
    #[error("field contains a non-finite value at node {node}")]
    NonFinite { node: usize },
    #[error("great-circle axis must be a unit vector (|axis| - 1 = {defect:e})")]
    AxisNotUnit { defect: f64 },
    #[error("great-circle sampling needs an even count >= 32 (got {0})")]
    CircleSamples(usize),
}

/// Errors from the curvature pipeline and pointwise speed evaluation.
#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("support function is not strictly convex: margin {margin:e} at node {node}")]
    NonConvex { node: usize, margin: f64 },
    #[error("power base {base:e} for {what} left the supported range [1e-6, 1e6] (divergence)")]
    SpeedDivergence { base: f64, what: &'static str },
    #[error("non-finite {what} at node {node}")]
    NonFinite { what: &'static str, node: usize },
    #[error("rescale slack delta must be positive (got {0})")]
    BadDelta(f64),
    #[error("mesh export needs a full spherical grid; use the profile-curve CSV export instead")]
    MeshNeedsFullGrid,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Errors from anisotropy specs and the convexity-condition checker.
#[derive(Debug, Error)]
pub enum AnisotropyError {
    #[error("anisotropy must be strictly positive: floor {floor:e} at {location}")]
    NonPositive { floor: f64, location: String },
    #[error("anisotropy direction must be a unit vector (|direction| - 1 = {defect:e})")]
    DirectionNotUnit { defect: f64 },
    #[error("spec is not axisymmetric about the grid axis; it needs a full spherical grid")]
    NotAxisymmetric,
    #[error("tabulated spec has {got} values but the grid has {expected} nodes")]
    LengthMismatch { got: usize, expected: usize },
    #[error("condition-(A) checker needs parameters in the theorem window (k+1 < q-n < p-k-1)")]
    NeedsTheoremWindow,
    #[error("condition-(A) checker needs at least 64 circles (got {0})")]
    TooFewCircles(usize),
    #[error("condition-(A) checker needs at least 128 samples per circle (got {0})")]
    TooFewSamples(usize),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Errors that abort a flow run.
#[derive(Debug, Error)]
pub enum FlowError {
    #[error("stable step size {required:e} fell below dt_min = {dt_min:e} (stiffness)")]
    Stiffness { required: f64, dt_min: f64 },
    #[error("convexity lost: step rejected {attempts} times down to dt = {dt:e}")]
    ConvexityLoss { attempts: u32, dt: f64 },
    #[error("invariant violated beyond 10x tolerance: {what} = {magnitude:e} (tol {tol:e})")]
    InvariantViolation {
        what: String,
        magnitude: f64,
        tol: f64,
    },
    #[error(
        "fixed-one mode needs initial min F/h > 1 (got {min_ratio}); rescale_for_positivity first"
    )]
    NotInitiallyExpanding { min_ratio: f64 },
    #[error("invalid initial surface: {message}")]
    BadInitial { message: String },
    #[error("normalization eta = {0:e} is not a positive finite number")]
    BadEta(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Errors from config parsing and validation.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("invalid value for `{field}`: {message}")]
    Semantic { field: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
