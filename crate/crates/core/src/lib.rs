//! Numerical solver for a generalized L_p Christoffel-Minkowski problem.
//!
//! A closed convex hypersurface in R^n is encoded by its support function h on
//! the unit sphere S^{n-1}. This crate evolves h by the anisotropic curvature
//! flow
//!
//! ```text
//!     ∂h/∂t = f(x) · σ_k(b) · h^{2-p} · ρ^{q-n}  −  η(t) · h,
//! ```
//!
//! where b = ∇²h + h·I is the matrix of principal curvature radii, σ_k is the
//! normalized k-th elementary symmetric function of its eigenvalues
//! (σ_k(1,…,1) = 1), ρ = √(h² + |∇h|²) is the radial function, and η(t) is
//! either a normalizing integral ratio (volume-ratio preserving) or the
//! constant 1. Stationary points solve the elliptic equation
//!
//! ```text
//!     f(x) · h^{1-p} · ρ^{q-n} · σ_k(b) = c.
//! ```
//!
//! The crate provides the spherical grids and covariant calculus, the
//! curvature pipeline, a checker for the convexity condition that the
//! anisotropy f must satisfy, the adaptive explicit time stepper with
//! invariant monitoring, and config/CSV/mesh plumbing for the `cmflow` CLI.

pub mod anisotropy;
pub mod calculus;
pub mod config;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod output;
pub mod params;

pub use anisotropy::{condition_a_margin, eval_f, AnisotropySpec, ConditionAReport};
pub use error::{AnisotropyError, ConfigError, FlowError, GeometryError, GridError};
pub use flow::{
    build_initial, choose_dt, compute_eta, run, step, DiagnosticsRecord, FlowState, InitialData,
    Monitors, RunOutcome, RunStatus, StepControl,
};
pub use geometry::{
    curvature_pipeline, elliptic_residual, embed, rescale_for_positivity, sigma_k_of_spectrum,
    speed_and_ratio, CurvatureField, EmbeddedPoints, SigmaK, SpeedFields,
};
pub use grid::{build_grid, integrate, GridKind, QuadratureRule, ScalarField, SphericalGrid};
pub use params::{validate_params, EtaMode, ParamSet, Regime};
