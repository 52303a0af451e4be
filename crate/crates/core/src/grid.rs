//! Spherical grids and Gauss quadrature.
//!
//! Axisymmetric fields on S^{n−1} live on Gauss–Jacobi nodes in u = cosθ
//! with the exponent α = (n−3)/2 matching the surface measure
//! ω_{n−2}·(1−u²)^{(n−3)/2} du, so integrals of polynomials in cosθ up to
//! degree 2·n_theta−1 are exact. Full S² grids (n = 3) combine the same
//! Gauss–Legendre latitudes with a uniform trapezoidal longitude rule of
//! weight 2π/n_phi, which is exact for trigonometric polynomials in φ below
//! the Nyquist mode.
//!
//! Nodes never sit on the poles; derivative stencils reach across them via
//! the antipodal-meridian extension (see the calculus module).

use crate::calculus::{build_theta_stencils, ThetaStencil};
use crate::error::GridError;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Fraction of the φ Nyquist band kept at the equator by the polar mode
/// filter; row i keeps modes |m| ≤ max(1, ⌊fraction·(n_phi/2)·sinθ_i⌋).
pub(crate) const PHI_FILTER_FRACTION: f64 = 0.5;

/// Grid topology: a meridian of latitudes for axisymmetric data in any
/// dimension n ≥ 3, or a full latitude–longitude grid on S² (n = 3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Axisymmetric,
    FullS2,
}

/// A discrete sphere: node coordinates, trigonometric caches, and the
/// precomputed θ-derivative stencils shared by all fields on the grid.
/// Nodes are indexed row-major: node = i_theta·n_phi + j_phi.
#[derive(Debug)]
pub struct SphericalGrid {
    pub kind: GridKind,
    /// Ambient dimension n (the sphere is S^{n−1}).
    pub dim_n: u32,
    pub n_theta: usize,
    /// 1 for axisymmetric grids.
    pub n_phi: usize,
    /// Latitudes, ascending in (0, π).
    pub theta: Vec<f64>,
    /// Longitudes 2πj/n_phi; empty for axisymmetric grids.
    pub phi: Vec<f64>,
    pub sin_theta: Vec<f64>,
    pub cos_theta: Vec<f64>,
    pub(crate) theta_stencils: Vec<ThetaStencil>,
    /// Per-row φ spectral cap; empty for axisymmetric grids.
    pub(crate) phi_mode_cap: Vec<usize>,
    theta_symbol: f64,
    phi_symbol: f64,
}

impl SphericalGrid {
    pub fn node_count(&self) -> usize {
        self.n_theta * self.n_phi
    }

    /// Surface area |S^{n−1}| of the continuous sphere.
    pub fn area(&self) -> f64 {
        sphere_area(self.dim_n - 1)
    }

    /// Latitude of a node given its flat index.
    pub fn node_theta(&self, node: usize) -> f64 {
        self.theta[node / self.n_phi]
    }

    /// Multiplicity of the transverse principal direction for axisymmetric
    /// data (n − 2 equal eigenvalues).
    pub fn transverse_multiplicity(&self) -> usize {
        self.dim_n as usize - 2
    }

    /// Worst-case symbol of the discrete second-derivative operators,
    /// max over nodes of Σ|w₂| plus the (filtered) φ symbol (m/sinθ)².
    /// An explicit Euler step of u_t = D·Δu is stable when
    /// dt·D·symbol ≤ 2.
    pub(crate) fn stiffness_symbol(&self) -> f64 {
        self.theta_symbol + self.phi_symbol
    }

    /// Effective grid spacing: the uniform-grid spacing whose 5-point
    /// stencil has the same worst-case symbol. Equals the θ spacing on
    /// axisymmetric grids.
    pub fn effective_spacing(&self) -> f64 {
        (16.0 / 3.0 / self.stiffness_symbol()).sqrt()
    }

    /// Unit position vector of a node (full S² grids).
    pub fn unit_vector(&self, node: usize) -> [f64; 3] {
        debug_assert_eq!(self.kind, GridKind::FullS2);
        let (i, j) = (node / self.n_phi, node % self.n_phi);
        let (s, c) = (self.sin_theta[i], self.cos_theta[i]);
        [s * self.phi[j].cos(), s * self.phi[j].sin(), c]
    }

    /// ⟨d, x⟩ for a node, where x is the node's unit vector. On
    /// axisymmetric grids only the polar component d·e_n is meaningful and
    /// `d` must point along the axis.
    pub fn axial_component(&self, node: usize) -> f64 {
        self.cos_theta[node / self.n_phi]
    }
}

/// Surface area of the unit sphere S^m.
pub fn sphere_area(m: u32) -> f64 {
    match m {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (m as f64 - 1.0) * sphere_area(m - 2),
    }
}

/// Nodal weights for integration over S^{n−1}; bound to the grid it was
/// built with.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    grid: Arc<SphericalGrid>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    /// Σ wᵢ·vᵢ with Neumaier-compensated accumulation.
    pub(crate) fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        neumaier_sum(self.weights.iter().zip(values).map(|(w, v)| w * v))
    }

    /// Σ wᵢ·aᵢ·bᵢ, compensated.
    pub(crate) fn integrate_product(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.weights.len());
        neumaier_sum(
            self.weights
                .iter()
                .zip(a.iter().zip(b))
                .map(|(w, (x, y))| w * x * y),
        )
    }
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + comp
}

/// A scalar sampled at every grid node, tied to its grid by reference
/// identity so fields from different grids cannot be mixed.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<SphericalGrid>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(grid: &Arc<SphericalGrid>, value: f64) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![value; grid.node_count()],
        }
    }

    /// Sample `f(θ, φ)` at every node (φ = 0 on axisymmetric grids).
    pub fn from_fn(grid: &Arc<SphericalGrid>, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.node_count());
        for i in 0..grid.n_theta {
            for j in 0..grid.n_phi {
                let phi = if grid.phi.is_empty() {
                    0.0
                } else {
                    grid.phi[j]
                };
                values.push(f(grid.theta[i], phi));
            }
        }
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn from_values(grid: &Arc<SphericalGrid>, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.node_count() {
            return Err(GridError::LengthMismatch {
                got: values.len(),
                expected: grid.node_count(),
            });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite { node });
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// ∫ f dσ over S^{n−1}. The field must live on the rule's grid.
pub fn integrate(rule: &QuadratureRule, field: &ScalarField) -> Result<f64, GridError> {
    if !Arc::ptr_eq(&rule.grid, &field.grid) {
        return Err(GridError::GridMismatch);
    }
    Ok(rule.integrate_values(&field.values))
}

/// Build a grid and its quadrature rule.
///
/// `n_phi` is required (even, ≥ 8) for `FullS2` and ignored for
/// `Axisymmetric`. Full grids require n = 3; axisymmetric grids accept any
/// n ≥ 3 and represent fields by their meridian profile.
pub fn build_grid(
    kind: GridKind,
    n_theta: usize,
    n_phi: Option<usize>,
    dim_n: u32,
) -> Result<(Arc<SphericalGrid>, QuadratureRule), GridError> {
    if dim_n < 3 {
        return Err(GridError::Dimension(dim_n));
    }
    if kind == GridKind::FullS2 && dim_n != 3 {
        return Err(GridError::FullGridDimension(dim_n));
    }
    if n_theta < 8 {
        return Err(GridError::ThetaResolution(n_theta));
    }
    let np = match kind {
        GridKind::Axisymmetric => 1,
        GridKind::FullS2 => {
            let np = n_phi.unwrap_or(0);
            if np < 8 || np % 2 != 0 {
                return Err(GridError::PhiResolution(np));
            }
            np
        }
    };

    let alpha = (dim_n as f64 - 3.0) / 2.0;
    let (x, wx) = gauss_jacobi_symmetric(n_theta, alpha);
    // x ascends in cosθ, so reverse to make θ ascend.
    let theta: Vec<f64> = x.iter().rev().map(|u| u.clamp(-1.0, 1.0).acos()).collect();
    let w_theta: Vec<f64> = wx.iter().rev().copied().collect();
    let sin_theta: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
    let cos_theta: Vec<f64> = theta.iter().map(|t| t.cos()).collect();

    let phi: Vec<f64> = match kind {
        GridKind::Axisymmetric => Vec::new(),
        GridKind::FullS2 => (0..np).map(|j| 2.0 * PI * j as f64 / np as f64).collect(),
    };

    let weights: Vec<f64> = match kind {
        GridKind::Axisymmetric => {
            let omega = sphere_area(dim_n - 2);
            w_theta.iter().map(|w| omega * w).collect()
        }
        GridKind::FullS2 => {
            let wp = 2.0 * PI / np as f64;
            let mut v = Vec::with_capacity(n_theta * np);
            for w in &w_theta {
                for _ in 0..np {
                    v.push(w * wp);
                }
            }
            v
        }
    };

    let theta_stencils = build_theta_stencils(&theta);
    let theta_symbol = theta_stencils
        .iter()
        .map(|s| s.w2.iter().map(|w| w.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);

    let (phi_mode_cap, phi_symbol) = match kind {
        GridKind::Axisymmetric => (Vec::new(), 0.0),
        GridKind::FullS2 => {
            let caps: Vec<usize> = sin_theta
                .iter()
                .map(|s| {
                    let cap = (PHI_FILTER_FRACTION * (np / 2) as f64 * s).floor() as usize;
                    cap.max(1)
                })
                .collect();
            let symbol = caps
                .iter()
                .zip(&sin_theta)
                .map(|(c, s)| (*c as f64 / s).powi(2))
                .fold(0.0f64, f64::max);
            (caps, symbol)
        }
    };

    let grid = Arc::new(SphericalGrid {
        kind,
        dim_n,
        n_theta,
        n_phi: np,
        theta,
        phi,
        sin_theta,
        cos_theta,
        theta_stencils,
        phi_mode_cap,
        theta_symbol,
        phi_symbol,
    });
    let rule = QuadratureRule {
        grid: Arc::clone(&grid),
        weights,
    };
    Ok((grid, rule))
}

/// Value of the symmetric Jacobi polynomial P_n^{(α,α)} at x, together with
/// P_{n−1}^{(α,α)}(x), by the three-term recurrence.
fn jacobi_pair(n: usize, alpha: f64, x: f64) -> (f64, f64) {
    let mut pm1 = 1.0;
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p = (alpha + 1.0) * x;
    for k in 2..=n {
        let kf = k as f64;
        let a = 2.0 * kf * (kf + 2.0 * alpha) * (2.0 * kf + 2.0 * alpha - 2.0);
        let b = (2.0 * kf + 2.0 * alpha - 1.0)
            * (2.0 * kf + 2.0 * alpha)
            * (2.0 * kf + 2.0 * alpha - 2.0);
        let c = 2.0 * (kf + alpha - 1.0) * (kf + alpha - 1.0) * (2.0 * kf + 2.0 * alpha);
        let next = (b * x * p - c * pm1) / a;
        pm1 = p;
        p = next;
    }
    (p, pm1)
}

/// Derivative of P_n^{(α,α)} from the pair identity
/// (1−x²)·P′_n = −n·x·P_n + (n+α)·P_{n−1}.
fn jacobi_derivative(n: usize, alpha: f64, x: f64, p: f64, pm1: f64) -> f64 {
    (-(n as f64) * x * p + (n as f64 + alpha) * pm1) / (1.0 - x * x)
}

/// Nodes (ascending) and weights of the n-point Gauss–Jacobi rule with equal
/// exponents α = β, i.e. ∫_{−1}^{1} g(x)·(1−x²)^α dx ≈ Σ wᵢ·g(xᵢ), exact
/// for polynomials of degree ≤ 2n−1. α = 0 is Gauss–Legendre.
fn gauss_jacobi_symmetric(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    // Bracket roots by a sign scan of P_n(cos t) on a fine uniform t-grid;
    // interior roots are simple, and consecutive roots are separated by at
    // least ~π/(n+α+1) in t, far wider than the scan step.
    let m = 8 * n + 13;
    let eval = |t: f64| jacobi_pair(n, alpha, t.cos()).0;
    let mut roots_t = Vec::with_capacity(n);
    let mut prev_t = 0.0;
    let mut prev_v = eval(0.0);
    for j in 1..m {
        let t = PI * j as f64 / (m - 1) as f64;
        let v = eval(t);
        if prev_v == 0.0 {
            roots_t.push(prev_t);
        } else if v != 0.0 && prev_v.signum() != v.signum() {
            let (mut a, mut b, mut va) = (prev_t, t, prev_v);
            for _ in 0..90 {
                let mid = 0.5 * (a + b);
                if mid == a || mid == b {
                    break;
                }
                let vm = eval(mid);
                if vm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if vm.signum() == va.signum() {
                    a = mid;
                    va = vm;
                } else {
                    b = mid;
                }
            }
            roots_t.push(0.5 * (a + b));
        }
        prev_t = t;
        prev_v = v;
    }
    assert_eq!(
        roots_t.len(),
        n,
        "root scan lost Gauss nodes (n = {n}, alpha = {alpha})"
    );

    // Newton polish in x, then enforce the exact ± symmetry of the rule.
    let mut x: Vec<f64> = roots_t.iter().map(|t| t.cos()).collect();
    for xi in x.iter_mut() {
        for _ in 0..3 {
            let (p, pm1) = jacobi_pair(n, alpha, *xi);
            let dp = jacobi_derivative(n, alpha, *xi, p, pm1);
            let step = p / dp;
            if step.is_finite() {
                *xi -= step;
            }
        }
    }
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for i in 0..n / 2 {
        let v = 0.5 * (x[n - 1 - i] - x[i]);
        x[i] = -v;
        x[n - 1 - i] = v;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }

    // w_i = C / ((1−x²)·P′_n(x)²) with
    // C = 2^{2α+1}·Γ(n+α+1)² / (Γ(n+1)·Γ(n+2α+1)).
    let ln_c = (2.0 * alpha + 1.0) * std::f64::consts::LN_2
        + 2.0 * libm::lgamma(n as f64 + alpha + 1.0)
        - libm::lgamma(n as f64 + 1.0)
        - libm::lgamma(n as f64 + 2.0 * alpha + 1.0);
    let c = ln_c.exp();
    let mut w: Vec<f64> = x
        .iter()
        .map(|&xi| {
            let (p, pm1) = jacobi_pair(n, alpha, xi);
            let dp = jacobi_derivative(n, alpha, xi, p, pm1);
            c / ((1.0 - xi * xi) * dp * dp)
        })
        .collect();
    for i in 0..n / 2 {
        let v = 0.5 * (w[i] + w[n - 1 - i]);
        w[i] = v;
        w[n - 1 - i] = v;
    }
    // The lgamma differences above leave a ~1e−13 common factor error on all
    // weights; pin the zeroth moment Σw = 2^{2α+1}·Γ(α+1)²/Γ(2α+2) exactly
    // (small gamma arguments, so this value is accurate to rounding).
    let moment = (2.0 * alpha + 1.0).exp2() * libm::tgamma(alpha + 1.0).powi(2)
        / libm::tgamma(2.0 * alpha + 2.0);
    let total = neumaier_sum(w.iter().copied());
    let scale = moment / total;
    for wi in w.iter_mut() {
        *wi *= scale;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn five_point_legendre_matches_reference_table() {
        let (x, w) = gauss_jacobi_symmetric(5, 0.0);
        let x_ref = [
            -0.9061798459386640,
            -0.5384693101056831,
            0.0,
            0.5384693101056831,
            0.9061798459386640,
        ];
        let w_ref = [
            0.2369268850561891,
            0.4786286704993665,
            0.5688888888888889,
            0.4786286704993665,
            0.2369268850561891,
        ];
        for i in 0..5 {
            assert_abs_diff_eq!(x[i], x_ref[i], epsilon = 1e-14);
            assert_abs_diff_eq!(w[i], w_ref[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn jacobi_weight_sums_match_beta_moments() {
        // Σw = ∫(1−x²)^α dx: π/2 for α = ½, 4/3 for α = 1.
        for n in [8usize, 33, 64] {
            let (_, w) = gauss_jacobi_symmetric(n, 0.5);
            let total: f64 = w.iter().sum();
            assert_abs_diff_eq!(total, PI / 2.0, epsilon = 1e-13);
            let (_, w) = gauss_jacobi_symmetric(n, 1.0);
            let total: f64 = w.iter().sum();
            assert_abs_diff_eq!(total, 4.0 / 3.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn sphere_areas_follow_the_recurrence() {
        assert_abs_diff_eq!(sphere_area(1), 2.0 * PI, epsilon = 1e-15);
        assert_abs_diff_eq!(sphere_area(2), 4.0 * PI, epsilon = 1e-14);
        assert_abs_diff_eq!(sphere_area(3), 2.0 * PI * PI, epsilon = 1e-13);
        assert_abs_diff_eq!(sphere_area(4), 8.0 * PI * PI / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn quadrature_total_mass_is_sphere_area() {
        for (kind, np, dim) in [
            (GridKind::Axisymmetric, None, 3),
            (GridKind::Axisymmetric, None, 4),
            (GridKind::Axisymmetric, None, 5),
            (GridKind::Axisymmetric, None, 7),
            (GridKind::FullS2, Some(128), 3),
        ] {
            let (grid, rule) = build_grid(kind, 64, np, dim).unwrap();
            let one = ScalarField::constant(&grid, 1.0);
            let total = integrate(&rule, &one).unwrap();
            let area = sphere_area(dim - 1);
            assert!(
                ((total - area) / area).abs() < 1e-12,
                "dim {dim}: total {total} vs area {area}"
            );
        }
    }

    #[test]
    fn degree_two_n_minus_one_polynomials_integrate_exactly() {
        // Deterministic degree-15 polynomial in u = cosθ on an 8-row grid.
        let coeffs: [f64; 16] = [
            0.3, -1.1, 2.0, 0.7, -0.25, 1.6, -0.9, 0.05, 1.2, -2.3, 0.4, 0.8, -0.6, 1.05, -0.15,
            0.5,
        ];
        let poly = |u: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c);
        // ∫ u^j (1−u²)^α du over [−1,1]: zero for odd j.
        let moment = |j: usize, alpha_twice: u32| -> f64 {
            if j % 2 == 1 {
                return 0.0;
            }
            let jf = j as f64;
            match alpha_twice {
                0 => 2.0 / (jf + 1.0),
                2 => 2.0 / (jf + 1.0) - 2.0 / (jf + 3.0),
                _ => unreachable!(),
            }
        };
        for (dim, alpha_twice) in [(3u32, 0u32), (5, 2)] {
            let (grid, rule) = build_grid(GridKind::Axisymmetric, 8, None, dim).unwrap();
            let f = ScalarField::from_fn(&grid, |t, _| poly(t.cos()));
            let got = integrate(&rule, &f).unwrap();
            let omega = sphere_area(dim - 2);
            let want: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * omega * moment(j, alpha_twice))
                .sum();
            assert!(
                ((got - want) / want).abs() < 1e-12,
                "dim {dim}: got {got} want {want}"
            );
        }
    }

    #[test]
    fn full_grid_moments() {
        let (grid, rule) = build_grid(GridKind::FullS2, 32, Some(64), 3).unwrap();
        let x3sq = ScalarField::from_fn(&grid, |t, _| t.cos().powi(2));
        let x1sq = ScalarField::from_fn(&grid, |t, p| (t.sin() * p.cos()).powi(2));
        let x1x2 = ScalarField::from_fn(&grid, |t, p| t.sin().powi(2) * p.cos() * p.sin());
        let third = 4.0 * PI / 3.0;
        assert_abs_diff_eq!(integrate(&rule, &x3sq).unwrap(), third, epsilon = 1e-12);
        assert_abs_diff_eq!(integrate(&rule, &x1sq).unwrap(), third, epsilon = 1e-12);
        assert_abs_diff_eq!(integrate(&rule, &x1x2).unwrap(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn resolution_and_dimension_gates() {
        assert!(matches!(
            build_grid(GridKind::Axisymmetric, 7, None, 3),
            Err(GridError::ThetaResolution(7))
        ));
        assert!(matches!(
            build_grid(GridKind::FullS2, 16, Some(9), 3),
            Err(GridError::PhiResolution(9))
        ));
        assert!(matches!(
            build_grid(GridKind::FullS2, 16, Some(6), 3),
            Err(GridError::PhiResolution(6))
        ));
        assert!(matches!(
            build_grid(GridKind::FullS2, 16, None, 3),
            Err(GridError::PhiResolution(0))
        ));
        assert!(matches!(
            build_grid(GridKind::FullS2, 16, Some(32), 4),
            Err(GridError::FullGridDimension(4))
        ));
        assert!(matches!(
            build_grid(GridKind::Axisymmetric, 16, None, 2),
            Err(GridError::Dimension(2))
        ));
    }

    #[test]
    fn theta_nodes_are_interior_and_ascending() {
        let (grid, rule) = build_grid(GridKind::Axisymmetric, 48, None, 5).unwrap();
        assert!(grid.theta[0] > 0.0);
        assert!(*grid.theta.last().unwrap() < PI);
        assert!(grid.theta.windows(2).all(|w| w[0] < w[1]));
        assert!(rule.weights().iter().all(|w| *w > 0.0));
        // Symmetry about the equator.
        for i in 0..grid.n_theta {
            assert_abs_diff_eq!(
                grid.theta[i] + grid.theta[grid.n_theta - 1 - i],
                PI,
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn field_construction_is_checked() {
        let (grid, rule) = build_grid(GridKind::Axisymmetric, 16, None, 3).unwrap();
        assert!(matches!(
            ScalarField::from_values(&grid, vec![1.0; 15]),
            Err(GridError::LengthMismatch {
                got: 15,
                expected: 16
            })
        ));
        let mut vals = vec![1.0; 16];
        vals[4] = f64::NAN;
        assert!(matches!(
            ScalarField::from_values(&grid, vals),
            Err(GridError::NonFinite { node: 4 })
        ));
        // Fields from a different grid instance are rejected at integration.
        let (other, _) = build_grid(GridKind::Axisymmetric, 16, None, 3).unwrap();
        let f = ScalarField::constant(&other, 1.0);
        assert!(matches!(integrate(&rule, &f), Err(GridError::GridMismatch)));
    }

    #[test]
    fn effective_spacing_tracks_theta_spacing_on_axisym_grids() {
        let (grid, _) = build_grid(GridKind::Axisymmetric, 64, None, 3).unwrap();
        let min_dt = grid
            .theta
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let eff = grid.effective_spacing();
        assert!(
            (eff / min_dt - 1.0).abs() < 0.15,
            "effective {eff} vs min spacing {min_dt}"
        );
    }
}
