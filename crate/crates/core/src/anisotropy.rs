//! Anisotropy profiles f and the great-circle admissibility check.
//!
//! The flow's data is a positive function f on S^{n−1}. Sufficient
//! admissibility (in the theorem window k+1 < q−n < p−k−1) is a pointwise
//! differential inequality along every unit-speed great circle:
//!
//!   f_ss − (1/(k+1))·(k + (q−n)/(q−n−k−1) + (p−2)/(p+k−1))·f_s²/f
//!        + (p+k−1−q+n)·f  >  0,
//!
//! where s is arc length. The checker samples a family of circles, takes
//! spectral derivatives along each, and reports the worst margin.

use crate::calculus::{axis_frame, circle_points, periodic_derivatives};
use crate::error::AnisotropyError;
use crate::grid::{GridKind, SphericalGrid};
use crate::params::{ParamSet, Regime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Values of f at or below this floor are treated as a positivity failure.
pub const F_FLOOR: f64 = 1e-8;

/// Anisotropy profiles. All variants are smooth and positive on their
/// admissible parameter ranges; positivity is re-checked at evaluation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnisotropySpec {
    /// f ≡ value.
    Constant { value: f64 },
    /// f(θ) = Σ_j coeffs[j]·cos(j·θ), a polynomial in ⟨e_n, x⟩.
    AxisymCosinePoly { coeffs: Vec<f64> },
    /// f(x) = base + epsilon·⟨direction, x⟩ with a unit direction.
    LinearHarmonic {
        base: f64,
        epsilon: f64,
        direction: Vec<f64>,
    },
    /// Axisymmetric table (θ ascending in [0, π]), interpolated cubically.
    Tabulated { theta: Vec<f64>, values: Vec<f64> },
}

impl AnisotropySpec {
    /// Whether f depends on the position only through ⟨e_n, x⟩.
    pub fn is_axisymmetric(&self) -> bool {
        match self {
            AnisotropySpec::Constant { .. }
            | AnisotropySpec::AxisymCosinePoly { .. }
            | AnisotropySpec::Tabulated { .. } => true,
            AnisotropySpec::LinearHarmonic { direction, .. } => direction
                .iter()
                .take(direction.len().saturating_sub(1))
                .all(|c| *c == 0.0),
        }
    }

    /// Structural validation: shape of the data, unit directions, and
    /// strict positivity of f over the sphere.
    pub fn validate(&self, dim_n: usize) -> Result<(), AnisotropyError> {
        match self {
            AnisotropySpec::Constant { value } => {
                if !(value.is_finite() && *value > F_FLOOR) {
                    return Err(AnisotropyError::NonPositive {
                        floor: F_FLOOR,
                        location: format!("constant value {value}"),
                    });
                }
            }
            AnisotropySpec::AxisymCosinePoly { coeffs } => {
                if coeffs.is_empty() {
                    return Err(AnisotropyError::LengthMismatch {
                        got: 0,
                        expected: 1,
                    });
                }
                // Dense scan: cheap, and the profile is a fixed trig polynomial.
                for i in 0..=4096 {
                    let t = PI * i as f64 / 4096.0;
                    let v = cosine_poly(coeffs, t);
                    if !(v.is_finite() && v > F_FLOOR) {
                        return Err(AnisotropyError::NonPositive {
                            floor: F_FLOOR,
                            location: format!("theta = {t:.6}"),
                        });
                    }
                }
            }
            AnisotropySpec::LinearHarmonic {
                base,
                epsilon,
                direction,
            } => {
                if direction.len() != dim_n {
                    return Err(AnisotropyError::LengthMismatch {
                        got: direction.len(),
                        expected: dim_n,
                    });
                }
                let norm = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(AnisotropyError::DirectionNotUnit { defect: norm - 1.0 });
                }
                let min = base - epsilon.abs();
                if !(min.is_finite() && min > F_FLOOR) {
                    return Err(AnisotropyError::NonPositive {
                        floor: F_FLOOR,
                        location: format!("min over the sphere = {min}"),
                    });
                }
            }
            AnisotropySpec::Tabulated { theta, values } => {
                if theta.len() != values.len() {
                    return Err(AnisotropyError::LengthMismatch {
                        got: values.len(),
                        expected: theta.len(),
                    });
                }
                if theta.len() < 4
                    || theta.windows(2).any(|w| w[0] >= w[1])
                    || theta[0] < 0.0
                    || *theta.last().unwrap() > PI
                {
                    return Err(AnisotropyError::LengthMismatch {
                        got: theta.len(),
                        expected: 4,
                    });
                }
                for (t, v) in theta.iter().zip(values) {
                    if !(v.is_finite() && *v > F_FLOOR) {
                        return Err(AnisotropyError::NonPositive {
                            floor: F_FLOOR,
                            location: format!("theta = {t:.6}"),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

fn cosine_poly(coeffs: &[f64], theta: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| c * (j as f64 * theta).cos())
        .sum()
}

/// Piecewise-cubic Lagrange evaluation of a table at `t`, clamped to the
/// table range. `linear` switches to piecewise-linear (used to estimate the
/// tabulation error).
fn table_eval(theta: &[f64], values: &[f64], t: f64, linear: bool) -> f64 {
    let n = theta.len();
    let t = t.clamp(theta[0], theta[n - 1]);
    let seg = match theta.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(i) => i.saturating_sub(1).min(n - 2),
    };
    if linear {
        let w = (t - theta[seg]) / (theta[seg + 1] - theta[seg]);
        return values[seg] * (1.0 - w) + values[seg + 1] * w;
    }
    let lo = seg.saturating_sub(1).min(n - 4);
    let mut acc = 0.0;
    for a in lo..lo + 4 {
        let mut lag = 1.0;
        for b in lo..lo + 4 {
            if a != b {
                lag *= (t - theta[b]) / (theta[a] - theta[b]);
            }
        }
        acc += lag * values[a];
    }
    acc
}

/// Evaluate f at an arbitrary point of S^{n−1} (given by its coordinates).
/// The polar angle is measured from the last coordinate axis.
pub fn value_at(spec: &AnisotropySpec, x: &[f64]) -> f64 {
    match spec {
        AnisotropySpec::Constant { value } => *value,
        AnisotropySpec::AxisymCosinePoly { coeffs } => {
            let ct = x[x.len() - 1].clamp(-1.0, 1.0);
            cosine_poly(coeffs, ct.acos())
        }
        AnisotropySpec::LinearHarmonic {
            base,
            epsilon,
            direction,
        } => base + epsilon * direction.iter().zip(x).map(|(d, c)| d * c).sum::<f64>(),
        AnisotropySpec::Tabulated { theta, values } => {
            let ct = x[x.len() - 1].clamp(-1.0, 1.0);
            table_eval(theta, values, ct.acos(), false)
        }
    }
}

/// Sample f at every node of a grid, validating shape parameters and positivity.
pub fn eval_f(
    spec: &AnisotropySpec,
    grid: &Arc<SphericalGrid>,
) -> Result<Vec<f64>, AnisotropyError> {
    spec.validate(grid.dim_n as usize)?;
    if grid.kind == GridKind::Axisymmetric && !spec.is_axisymmetric() {
        return Err(AnisotropyError::NotAxisymmetric);
    }
    let dim = grid.dim_n as usize;
    let mut vals = Vec::with_capacity(grid.node_count());
    for id in 0..grid.node_count() {
        let i = id / grid.n_phi;
        let x: Vec<f64> = match grid.kind {
            GridKind::FullS2 => grid.unit_vector(id).to_vec(),
            GridKind::Axisymmetric => {
                // Meridian representative (sinθ, 0, …, cosθ).
                let mut x = vec![0.0; dim];
                x[0] = grid.sin_theta[i];
                x[dim - 1] = grid.cos_theta[i];
                x
            }
        };
        let v = value_at(spec, &x);
        if !(v.is_finite() && v > F_FLOOR) {
            return Err(AnisotropyError::NonPositive {
                floor: F_FLOOR,
                location: format!("node {id} (theta = {:.6})", grid.theta[i]),
            });
        }
        vals.push(v);
    }
    Ok(vals)
}

/// Result of the great-circle admissibility scan.
#[derive(Debug, Clone)]
pub struct ConditionAReport {
    /// Global minimum of the circle expression; positive means admissible.
    pub margin: f64,
    pub circles: usize,
    pub samples_per_circle: usize,
    /// Normal direction (n = 3) or a basis vector of the worst plane.
    pub worst_plane: (Vec<f64>, Vec<f64>),
    /// Arc-length position of the worst sample on its circle.
    pub worst_arc: f64,
    /// Estimated evaluation error from tabulation (0 for analytic profiles).
    pub tabulation_error: f64,
    /// Set when |margin| is within 10× the tabulation error.
    pub inconclusive: bool,
}

impl ConditionAReport {
    pub fn passes(&self) -> bool {
        !self.inconclusive && self.margin > 0.0
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}

fn random_plane(rng: &mut ChaCha8Rng, dim: usize) -> (Vec<f64>, Vec<f64>) {
    loop {
        let u = random_unit(rng, dim);
        let mut v = random_unit(rng, dim);
        let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        for (vc, uc) in v.iter_mut().zip(&u) {
            *vc -= dot * uc;
        }
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return (u, v.into_iter().map(|c| c / norm).collect());
        }
    }
}

/// The 12 + 30 vertex directions of a once-subdivided icosahedron, used as
/// a deterministic well-spread set of circle normals on S².
fn icosphere_axes() -> Vec<[f64; 3]> {
    let g = (1.0 + 5.0f64.sqrt()) / 2.0;
    let norm = (1.0 + g * g).sqrt();
    let (a, b) = (1.0 / norm, g / norm);
    let mut verts: Vec<[f64; 3]> = Vec::new();
    for &s1 in &[-1.0f64, 1.0] {
        for &s2 in &[-1.0f64, 1.0] {
            verts.push([0.0, s1 * a, s2 * b]);
            verts.push([s1 * a, s2 * b, 0.0]);
            verts.push([s2 * b, 0.0, s1 * a]);
        }
    }
    let mut axes = verts.clone();
    // Edge midpoints: adjacent vertices pair at dot = 1/√5.
    for i in 0..verts.len() {
        for j in (i + 1)..verts.len() {
            let dot: f64 = (0..3).map(|c| verts[i][c] * verts[j][c]).sum();
            if (dot - 1.0 / 5.0f64.sqrt()).abs() < 1e-9 {
                let mid = [
                    verts[i][0] + verts[j][0],
                    verts[i][1] + verts[j][1],
                    verts[i][2] + verts[j][2],
                ];
                let n = (mid[0] * mid[0] + mid[1] * mid[1] + mid[2] * mid[2]).sqrt();
                axes.push([mid[0] / n, mid[1] / n, mid[2] / n]);
            }
        }
    }
    axes
}

/// Scan great circles for the admissibility margin of f under the given
/// parameters (theorem window only). `circles ≥ 64`, `samples ≥ 128` even.
pub fn condition_a_margin(
    spec: &AnisotropySpec,
    params: &ParamSet,
    circles: usize,
    samples_per_circle: usize,
) -> Result<ConditionAReport, AnisotropyError> {
    if *params.regime() != Regime::TheoremWindow {
        return Err(AnisotropyError::NeedsTheoremWindow);
    }
    if circles < 64 {
        return Err(AnisotropyError::TooFewCircles(circles));
    }
    if samples_per_circle < 128 || samples_per_circle % 2 != 0 {
        return Err(AnisotropyError::TooFewSamples(samples_per_circle));
    }
    let dim = params.n as usize;
    spec.validate(dim)?;

    let coeff = params.condition_a_fs2_coefficient();
    let constant = params.condition_a_constant();
    let mut planes: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(circles);
    if spec.is_axisymmetric() {
        // The meridian plane realizes the extremal profile of any
        // axisymmetric f; scan it first.
        let mut u = vec![0.0; dim];
        let mut v = vec![0.0; dim];
        u[dim - 1] = 1.0;
        v[0] = 1.0;
        planes.push((u, v));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x434d_464c);
    if dim == 3 {
        for axis in icosphere_axes() {
            let (u, v) = axis_frame(axis).expect("icosphere axes are unit");
            planes.push((u.to_vec(), v.to_vec()));
        }
    }
    while planes.len() < circles {
        planes.push(random_plane(&mut rng, dim));
    }

    let mut margin = f64::INFINITY;
    let mut worst_plane = planes[0].clone();
    let mut worst_arc = 0.0;
    let mut tab_err: f64 = 0.0;
    let arcs: Vec<f64> = (0..samples_per_circle)
        .map(|j| 2.0 * PI * j as f64 / samples_per_circle as f64)
        .collect();
    for (u, v) in &planes {
        let pts = circle_points(u, v, samples_per_circle);
        let mut vals = Vec::with_capacity(samples_per_circle);
        for (j, p) in pts.iter().enumerate() {
            let fv = value_at(spec, p);
            if !(fv.is_finite() && fv > F_FLOOR) {
                return Err(AnisotropyError::NonPositive {
                    floor: F_FLOOR,
                    location: format!("circle sample at arc {:.6}", arcs[j]),
                });
            }
            if let AnisotropySpec::Tabulated { theta, values } = spec {
                let t = p[dim - 1].clamp(-1.0, 1.0).acos();
                tab_err = tab_err.max((fv - table_eval(theta, values, t, true)).abs());
            }
            vals.push(fv);
        }
        let (d1, d2) = periodic_derivatives(&vals, 2.0 * PI);
        for j in 0..samples_per_circle {
            let expr = d2[j] - coeff * d1[j] * d1[j] / vals[j] + constant * vals[j];
            if expr < margin {
                margin = expr;
                worst_plane = (u.clone(), v.clone());
                worst_arc = arcs[j];
            }
        }
    }
    let inconclusive = margin.abs() <= 10.0 * tab_err;
    Ok(ConditionAReport {
        margin,
        circles: planes.len(),
        samples_per_circle,
        worst_plane,
        worst_arc,
        tabulation_error: tab_err,
        inconclusive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::params::EtaMode;
    use approx::assert_abs_diff_eq;

    fn theorem_params() -> ParamSet {
        ParamSet::new(3, 1, 6.0, 6.0, EtaMode::Normalized, 1.0).unwrap()
    }

    #[test]
    fn constant_profile_has_exact_margin() {
        // f ≡ 1: expr = (p+k−1−q+n)·f = 3 everywhere for (n,k,p,q) = (3,1,6,6).
        let spec = AnisotropySpec::Constant { value: 1.0 };
        let report = condition_a_margin(&spec, &theorem_params(), 64, 256).unwrap();
        assert_abs_diff_eq!(report.margin, 3.0, epsilon = 1e-12);
        assert!(report.passes());
        assert_eq!(report.tabulation_error, 0.0);
    }

    #[test]
    fn strong_fourth_harmonic_fails_decisively() {
        // f = 1 + 0.9·cos(4θ): at the pole expr = −14.4 + 3·1.9 = −8.7 and the
        // global minimum is below −27.
        let spec = AnisotropySpec::AxisymCosinePoly {
            coeffs: vec![1.0, 0.0, 0.0, 0.0, 0.9],
        };
        let report = condition_a_margin(&spec, &theorem_params(), 64, 512).unwrap();
        assert!(!report.passes());
        assert!(report.margin <= -27.0, "margin {}", report.margin);
        assert!(!report.inconclusive);
    }

    #[test]
    fn mild_linear_harmonic_passes() {
        // Along a meridian f = 1 + 0.05·cosθ gives
        // expr = 1 + 2f − (7/3)·f_s²/f, minimized near f's minimum.
        let spec = AnisotropySpec::LinearHarmonic {
            base: 1.0,
            epsilon: 0.05,
            direction: vec![0.0, 0.0, 1.0],
        };
        let report = condition_a_margin(&spec, &theorem_params(), 64, 256).unwrap();
        assert!(report.passes());
        assert!(
            report.margin > 2.88 && report.margin < 2.91,
            "margin {}",
            report.margin
        );
    }

    #[test]
    fn fs2_coefficient_value_enters_the_expression() {
        assert_abs_diff_eq!(
            theorem_params().condition_a_fs2_coefficient(),
            7.0 / 3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            theorem_params().condition_a_constant(),
            3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn overwhelming_harmonic_violates_positivity() {
        let spec = AnisotropySpec::LinearHarmonic {
            base: 1.0,
            epsilon: 1.5,
            direction: vec![0.0, 0.0, 1.0],
        };
        let (grid, _) = build_grid(GridKind::Axisymmetric, 16, None, 3).unwrap();
        assert!(matches!(
            eval_f(&spec, &grid),
            Err(AnisotropyError::NonPositive { .. })
        ));
    }

    #[test]
    fn direction_handling() {
        let (grid, _) = build_grid(GridKind::Axisymmetric, 16, None, 3).unwrap();
        let bad_norm = AnisotropySpec::LinearHarmonic {
            base: 1.0,
            epsilon: 0.05,
            direction: vec![0.0, 0.0, 2.0],
        };
        assert!(matches!(
            eval_f(&bad_norm, &grid),
            Err(AnisotropyError::DirectionNotUnit { .. })
        ));
        let tilted = AnisotropySpec::LinearHarmonic {
            base: 1.0,
            epsilon: 0.05,
            direction: vec![1.0, 0.0, 0.0],
        };
        assert!(matches!(
            eval_f(&tilted, &grid),
            Err(AnisotropyError::NotAxisymmetric)
        ));
        // The same tilted profile is fine on a full grid.
        let (full, _) = build_grid(GridKind::FullS2, 16, Some(32), 3).unwrap();
        let vals = eval_f(&tilted, &full).unwrap();
        assert_eq!(vals.len(), full.node_count());
        // The sup 1.05 is attained at x = e₁, which no node hits exactly.
        let max = vals.iter().copied().fold(f64::MIN, f64::max);
        assert!(max > 1.049 && max <= 1.05, "max {max}");
    }

    #[test]
    fn checker_input_gates() {
        let spec = AnisotropySpec::Constant { value: 1.0 };
        assert!(matches!(
            condition_a_margin(&spec, &theorem_params(), 32, 256),
            Err(AnisotropyError::TooFewCircles(32))
        ));
        assert!(matches!(
            condition_a_margin(&spec, &theorem_params(), 64, 100),
            Err(AnisotropyError::TooFewSamples(100))
        ));
        let c0 = ParamSet::new(3, 1, 4.0, 3.0, EtaMode::Normalized, 1.0).unwrap();
        assert!(matches!(
            condition_a_margin(&spec, &c0, 64, 256),
            Err(AnisotropyError::NeedsTheoremWindow)
        ));
    }

    #[test]
    fn fine_tabulation_matches_the_analytic_profile() {
        let m = 400;
        let theta: Vec<f64> = (0..=m).map(|i| PI * i as f64 / m as f64).collect();
        let values: Vec<f64> = theta.iter().map(|t| 1.0 + 0.05 * t.cos()).collect();
        let spec = AnisotropySpec::Tabulated { theta, values };
        let report = condition_a_margin(&spec, &theorem_params(), 64, 256).unwrap();
        assert!(report.tabulation_error < 1e-4);
        assert!(!report.inconclusive);
        assert!(report.passes());
        assert!(
            (report.margin - 2.895).abs() < 0.02,
            "margin {}",
            report.margin
        );
    }

    #[test]
    fn tabulation_near_the_admissibility_boundary_is_inconclusive() {
        // For f = 1 + ε·cos(4θ) the margin crosses zero near ε ≈ 0.2301
        // (analytically 3 − 13ε up to the f_s² correction); just below the
        // crossing the margin is smaller than the tabulation band.
        let m = 96;
        let eps = 0.2295;
        let theta: Vec<f64> = (0..=m).map(|i| PI * i as f64 / m as f64).collect();
        let values: Vec<f64> = theta.iter().map(|t| 1.0 + eps * (4.0 * t).cos()).collect();
        let spec = AnisotropySpec::Tabulated { theta, values };
        let report = condition_a_margin(&spec, &theorem_params(), 64, 256).unwrap();
        assert!(
            report.inconclusive,
            "margin {} vs tabulation error {}",
            report.margin, report.tabulation_error
        );
        assert!(report.margin.abs() < 0.01);
        assert!(!report.passes());
    }

    #[test]
    fn table_sanity_checks() {
        let spec = AnisotropySpec::Tabulated {
            theta: vec![0.0, 1.0, 0.5, 3.0],
            values: vec![1.0; 4],
        };
        let (grid, _) = build_grid(GridKind::Axisymmetric, 16, None, 3).unwrap();
        assert!(eval_f(&spec, &grid).is_err());
        let short = AnisotropySpec::Tabulated {
            theta: vec![0.0, 3.0],
            values: vec![1.0; 2],
        };
        assert!(eval_f(&short, &grid).is_err());
    }

    #[test]
    fn icosphere_axes_are_unit_and_well_spread() {
        let axes = icosphere_axes();
        assert_eq!(axes.len(), 42);
        for a in &axes {
            let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            assert_abs_diff_eq!(n, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn higher_dimensional_scan_runs() {
        // (n,k,p,q) = (5,2,8,8.5): k+1 = 3 < q−n = 3.5 < p−k−1 = 5.
        let p = ParamSet::new(5, 2, 8.0, 8.5, EtaMode::Normalized, 1.0).unwrap();
        let spec = AnisotropySpec::Constant { value: 2.0 };
        let report = condition_a_margin(&spec, &p, 64, 128).unwrap();
        assert_abs_diff_eq!(
            report.margin,
            p.condition_a_constant() * 2.0,
            epsilon = 1e-12
        );
        assert!(report.passes());
    }
}
