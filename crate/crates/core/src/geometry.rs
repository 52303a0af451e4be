//! Convex-body geometry from the support function.
//!
//! For a support function h on S^{n−1} the radial distance is
//! ρ = √(h² + |∇h|²), the matrix of principal curvature radii is
//! b = ∇²h + h·I in any local orthonormal frame, and the boundary embedding
//! is X = ∇h + h·x. The normalized k-th elementary symmetric function σ_k
//! of the eigenvalues of b (σ_k(1,…,1) = 1) closes the flow speed
//! F = f·h^{2−p}·ρ^{q−n}·σ_k and the elliptic residual F/h − c.

use crate::calculus::{covariant_hessian, gradient};
use crate::error::GeometryError;
use crate::grid::{GridKind, ScalarField};
use crate::params::ParamSet;

/// Admissible base range for real powers; bases outside signal a collapsing
/// or exploding configuration rather than a rounding issue.
pub const POW_BASE_MIN: f64 = 1e-6;
pub const POW_BASE_MAX: f64 = 1e6;

/// base^expo as exp(expo·ln base), guarded. Exact at base = 1 for any
/// exponent, which keeps the unit sphere an exact fixed point.
pub(crate) fn powr(base: f64, expo: f64, what: &'static str) -> Result<f64, GeometryError> {
    if !(POW_BASE_MIN..=POW_BASE_MAX).contains(&base) {
        return Err(GeometryError::SpeedDivergence { base, what });
    }
    Ok((expo * base.ln()).exp())
}

fn binomial(m: usize, k: usize) -> f64 {
    if k > m {
        return 0.0;
    }
    let k = k.min(m - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (m - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Normalized σ_k of one eigenvalue list and its partial derivatives.
#[derive(Debug, Clone)]
pub struct SigmaK {
    /// e_k(λ)/C(m,k), so σ_k(1,…,1) = 1.
    pub value: f64,
    /// ∂σ_k/∂λ_i, same normalization (each equals k/m at λ = (1,…,1)).
    pub partials: Vec<f64>,
}

fn elementary_symmetric(eigs: &[f64], k: usize) -> f64 {
    // e[j] update in descending j keeps the recurrence in place.
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for &v in eigs {
        for j in (1..=k).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e[k]
}

/// Normalized σ_k(λ) with partials, for an explicit eigenvalue list
/// (length m = n−1 for a hypersurface in R^n).
pub fn sigma_k_of_spectrum(eigs: &[f64], k: usize) -> SigmaK {
    let m = eigs.len();
    assert!(k >= 1 && k <= m, "need 1 <= k <= {m}, got {k}");
    let norm = binomial(m, k);
    let value = elementary_symmetric(eigs, k) / norm;
    // ∂e_k/∂λ_i = e_{k−1} of the list with λ_i removed; recomputing the
    // reduced list per i is numerically robust (no cancellation-prone
    // deflation) and cheap at the m this solver uses.
    let mut reduced = Vec::with_capacity(m - 1);
    let partials = (0..m)
        .map(|i| {
            reduced.clear();
            reduced.extend(
                eigs.iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, v)| *v),
            );
            elementary_symmetric(&reduced, k - 1) / norm
        })
        .collect();
    SigmaK { value, partials }
}

/// All pointwise curvature data derived from a support function: radial
/// distance, gradient, the radii matrix b = ∇²h + h·I, its eigenvalue
/// range, and normalized σ_k(b) with the largest eigenvalue of the
/// linearization σ_k^{ij} (the diffusion coefficient scale).
#[derive(Debug, Clone)]
pub struct CurvatureField {
    pub k: usize,
    pub h: Vec<f64>,
    pub rho: Vec<f64>,
    pub grad_theta: Vec<f64>,
    pub grad_phi: Option<Vec<f64>>,
    /// Meridional entry b₁₁ (axisymmetric: the multiplicity-1 radius).
    pub b11: Vec<f64>,
    pub b12: Option<Vec<f64>>,
    /// Transverse entry b₂₂ (axisymmetric: the multiplicity-(n−2) radius).
    pub b22: Vec<f64>,
    pub lambda_min: Vec<f64>,
    pub lambda_max: Vec<f64>,
    pub sigma: Vec<f64>,
    /// max_i ∂σ_k/∂λ_i per node.
    pub sigma_partial_max: Vec<f64>,
    /// Global min of λ_min(b): positive iff the surface is strictly convex.
    pub margin: f64,
}

/// Compute the curvature data of a support function for a given k.
/// Does not require convexity; `margin` reports how close b is to losing
/// positivity so callers can reject or abort.
pub fn curvature_pipeline(h: &ScalarField, k: usize) -> Result<CurvatureField, GeometryError> {
    let grid = h.grid();
    let nodes = grid.node_count();
    let g = gradient(h);
    let hess = covariant_hessian(h);
    let mut rho = vec![0.0; nodes];
    let mut b11 = vec![0.0; nodes];
    let mut b22 = vec![0.0; nodes];
    let mut lambda_min = vec![0.0; nodes];
    let mut lambda_max = vec![0.0; nodes];
    let mut sigma = vec![0.0; nodes];
    let mut sigma_partial_max = vec![0.0; nodes];
    let mut b12 = match grid.kind {
        GridKind::FullS2 => Some(vec![0.0; nodes]),
        GridKind::Axisymmetric => None,
    };
    let mut margin = f64::INFINITY;
    let trans_mult = grid.transverse_multiplicity();
    let mut eigs: Vec<f64> = Vec::with_capacity(grid.dim_n as usize - 1);
    for id in 0..nodes {
        let hv = h.values[id];
        rho[id] = (hv * hv + g.norm_sq(id)).sqrt();
        let a11 = hess.a11[id] + hv;
        let a22 = hess.a22[id] + hv;
        b11[id] = a11;
        b22[id] = a22;
        let (lo, hi) = match &hess.a12 {
            Some(a12v) => {
                let off = a12v[id];
                b12.as_mut().unwrap()[id] = off;
                let mean = 0.5 * (a11 + a22);
                let dev = f64::hypot(0.5 * (a11 - a22), off);
                (mean - dev, mean + dev)
            }
            None => (a11.min(a22), a11.max(a22)),
        };
        lambda_min[id] = lo;
        lambda_max[id] = hi;
        margin = margin.min(lo);
        eigs.clear();
        match grid.kind {
            GridKind::FullS2 => {
                eigs.push(lo);
                eigs.push(hi);
            }
            GridKind::Axisymmetric => {
                eigs.push(a11);
                for _ in 0..trans_mult {
                    eigs.push(a22);
                }
            }
        }
        let sk = sigma_k_of_spectrum(&eigs, k);
        sigma[id] = sk.value;
        sigma_partial_max[id] = sk
            .partials
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if !sigma[id].is_finite() || !rho[id].is_finite() {
            return Err(GeometryError::NonFinite {
                what: "curvature",
                node: id,
            });
        }
    }
    Ok(CurvatureField {
        k,
        h: h.values.clone(),
        rho,
        grad_theta: g.g_theta,
        grad_phi: g.g_phi,
        b11,
        b12,
        b22,
        lambda_min,
        lambda_max,
        sigma,
        sigma_partial_max,
        margin,
    })
}

/// Pointwise flow speed and normalized speed:
/// speed F = f·h^{2−p}·ρ^{q−n}·σ_k, ratio F/h = f·h^{1−p}·ρ^{q−n}·σ_k,
/// and the parabolic mobility N = f·h^{2−p}·ρ^{q−n} multiplying σ_k^{ij}.
#[derive(Debug, Clone)]
pub struct SpeedFields {
    pub speed: Vec<f64>,
    pub ratio: Vec<f64>,
    pub mobility: Vec<f64>,
}

/// Evaluate the speed fields. `f_vals` is the anisotropy sampled on the
/// same grid as the curvature data.
pub fn speed_and_ratio(
    curv: &CurvatureField,
    f_vals: &[f64],
    params: &ParamSet,
) -> Result<SpeedFields, GeometryError> {
    let nodes = curv.h.len();
    if f_vals.len() != nodes {
        return Err(GeometryError::Grid(
            crate::error::GridError::LengthMismatch {
                got: f_vals.len(),
                expected: nodes,
            },
        ));
    }
    let qn = params.q_minus_n();
    let one_minus_p = 1.0 - params.p;
    let mut speed = vec![0.0; nodes];
    let mut ratio = vec![0.0; nodes];
    let mut mobility = vec![0.0; nodes];
    for id in 0..nodes {
        let radial = powr(curv.rho[id], qn, "rho^(q-n)")?;
        let hpow = powr(curv.h[id], one_minus_p, "h^(1-p)")?;
        let base = f_vals[id] * radial;
        ratio[id] = base * hpow * curv.sigma[id];
        speed[id] = ratio[id] * curv.h[id];
        mobility[id] = base * hpow * curv.h[id];
        if !speed[id].is_finite() {
            return Err(GeometryError::NonFinite {
                what: "speed",
                node: id,
            });
        }
    }
    Ok(SpeedFields {
        speed,
        ratio,
        mobility,
    })
}

/// Pointwise residual F/h − c of the elliptic equation
/// f·h^{1−p}·ρ^{q−n}·σ_k = c, plus its max-norm. Requires strict convexity.
pub fn elliptic_residual(
    h: &ScalarField,
    f_vals: &[f64],
    params: &ParamSet,
    c_target: f64,
) -> Result<(Vec<f64>, f64), GeometryError> {
    let curv = curvature_pipeline(h, params.k as usize)?;
    if curv.margin <= 0.0 {
        let node = curv
            .lambda_min
            .iter()
            .position(|&v| v == curv.margin)
            .unwrap_or(0);
        return Err(GeometryError::NonConvex {
            node,
            margin: curv.margin,
        });
    }
    let sf = speed_and_ratio(&curv, f_vals, params)?;
    let residual: Vec<f64> = sf.ratio.iter().map(|r| r - c_target).collect();
    let max_abs = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok((residual, max_abs))
}

/// Boundary points X = ∇h + h·x together with their radial distances.
/// Full grids give genuine R³ positions; axisymmetric grids give the
/// meridian-plane representative (transverse radius, 0, axial height).
#[derive(Debug, Clone)]
pub struct EmbeddedPoints {
    pub points: Vec<[f64; 3]>,
    pub rho: Vec<f64>,
}

/// Embed the surface. |X| = ρ holds identically (the frame (e_θ, e_φ, x) is
/// orthonormal), so the returned lengths agree with ρ to rounding.
pub fn embed(h: &ScalarField) -> Result<EmbeddedPoints, GeometryError> {
    let grid = h.grid();
    let g = gradient(h);
    let nodes = grid.node_count();
    let mut points = Vec::with_capacity(nodes);
    let mut rho = Vec::with_capacity(nodes);
    for id in 0..nodes {
        let hv = h.values[id];
        let r = (hv * hv + g.norm_sq(id)).sqrt();
        rho.push(r);
        let i = id / grid.n_phi;
        let (st, ct) = (grid.sin_theta[i], grid.cos_theta[i]);
        let gt = g.g_theta[id];
        let p = match grid.kind {
            GridKind::Axisymmetric => [hv * st + gt * ct, 0.0, hv * ct - gt * st],
            GridKind::FullS2 => {
                let j = id % grid.n_phi;
                let (sp, cp) = (grid.phi[j].sin(), grid.phi[j].cos());
                let gp = g.g_phi.as_ref().unwrap()[id];
                // x, e_θ and the normalized e_φ in R³.
                let x = [st * cp, st * sp, ct];
                let et = [ct * cp, ct * sp, -st];
                let ep = [-sp, cp, 0.0];
                [
                    hv * x[0] + gt * et[0] + gp * ep[0],
                    hv * x[1] + gt * et[1] + gp * ep[1],
                    hv * x[2] + gt * et[2] + gp * ep[2],
                ]
            }
        };
        if !p.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite {
                what: "embedding",
                node: id,
            });
        }
        points.push(p);
    }
    Ok(EmbeddedPoints { points, rho })
}

/// Shrink a convex initial guess until its normalized speed clears 1 + δ
/// everywhere: F/h scales as λ^{q−n+k+1−p} under h ↦ λh, and that exponent
/// is negative in both admissible windows, so a small enough λ always
/// works. Returns the scaled field and λ.
pub fn rescale_for_positivity(
    h: &ScalarField,
    f_vals: &[f64],
    params: &ParamSet,
    delta: f64,
) -> Result<(ScalarField, f64), GeometryError> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(GeometryError::BadDelta(delta));
    }
    let target = 1.0 + delta;
    let min_ratio = |field: &ScalarField| -> Result<f64, GeometryError> {
        let curv = curvature_pipeline(field, params.k as usize)?;
        if curv.margin <= 0.0 {
            return Err(GeometryError::NonConvex {
                node: 0,
                margin: curv.margin,
            });
        }
        let sf = speed_and_ratio(&curv, f_vals, params)?;
        Ok(sf.ratio.iter().copied().fold(f64::INFINITY, f64::min))
    };
    let m0 = min_ratio(h)?;
    let decay = -params.speed_exponent(); // p + k + 1 − q + n − 2k... = p+k+1-(q-n)... positive
    let mut lambda = if m0 >= target {
        1.0
    } else {
        (m0 / target).powf(1.0 / decay)
    };
    let scaled = |lam: f64| {
        ScalarField::from_values(h.grid(), h.values.iter().map(|v| lam * v).collect())
            .expect("scaling preserves validity")
    };
    // The scaling law is exact in the continuum and holds to rounding on the
    // grid; verify, and bisect downward in the (unlikely) event rounding
    // lands us a hair short.
    let mut field = scaled(lambda);
    let mut achieved = min_ratio(&field)?;
    let mut shrink = 0;
    while achieved < target * (1.0 - 1e-12) && shrink < 60 {
        lambda *= 0.995;
        field = scaled(lambda);
        achieved = min_ratio(&field)?;
        shrink += 1;
    }
    if achieved < target * (1.0 - 1e-12) {
        return Err(GeometryError::NonFinite {
            what: "rescale",
            node: 0,
        });
    }
    Ok((field, lambda))
}
