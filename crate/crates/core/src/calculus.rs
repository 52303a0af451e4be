//! Covariant calculus on the discrete sphere.
//!
//! θ-derivatives use 5-point (4th-order) centered finite differences with
//! weights generated for the actual Gauss node spacing; stencils that reach
//! past a pole read the antipodal meridian (value at −θ taken from
//! (θ, φ+π), or the even mirror for axisymmetric fields). φ-derivatives are
//! spectral: FFT, multiply by the wavenumber symbol, inverse FFT.
//!
//! The same Fourier machinery provides spectral differentiation of periodic
//! great-circle samples and the polar mode filter used by the time stepper.

use crate::error::GridError;
use crate::grid::{GridKind, ScalarField, SphericalGrid};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Below this sinθ the axisymmetric transverse Hessian entry cotθ·h_θ is
/// replaced by its analytic pole limit h_θθ. Gauss nodes keep sinθ of order
/// 1/n_theta, so this is a safety net, not a hot path.
pub const POLE_TOL: f64 = 1e-8;

/// Finite-difference weights on arbitrarily spaced nodes (Fornberg's
/// recurrence). Returns `w[d][j]` = weight of node `xs[j]` for the d-th
/// derivative at `z`, for d = 0..=max_order.
pub(crate) fn fornberg_weights(z: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut w = vec![vec![0.0; n]; max_order + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    w[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for d in (1..=mn).rev() {
                    w[d][i] = c1 * (d as f64 * w[d - 1][i - 1] - c5 * w[d][i - 1]) / c2;
                }
                w[0][i] = -c1 * c5 * w[0][i - 1] / c2;
            }
            for d in (1..=mn).rev() {
                w[d][j] = (c4 * w[d][j] - d as f64 * w[d - 1][j]) / c3;
            }
            w[0][j] = c4 * w[0][j] / c3;
        }
        c1 = c2;
    }
    w
}

/// One 5-point θ-derivative stencil. `src[j]` is the θ-row the j-th value is
/// read from; `opposite[j]` marks values read through a pole (φ shifted by π
/// on full grids, plain mirror for axisymmetric fields).
#[derive(Debug, Clone)]
pub(crate) struct ThetaStencil {
    pub src: [usize; 5],
    pub opposite: [bool; 5],
    pub w1: [f64; 5],
    pub w2: [f64; 5],
}

/// Build the per-row stencils for a θ node set (ascending, interior to
/// (0, π)), extending across both poles.
pub(crate) fn build_theta_stencils(theta: &[f64]) -> Vec<ThetaStencil> {
    let n = theta.len();
    assert!(n >= 5, "need at least 5 theta rows for 5-point stencils");
    // Extended coordinate for logical index e in [-2, n+2): reflected across
    // the nearest pole with a φ+π column swap.
    let ext = |e: i64| -> (f64, usize, bool) {
        if e < 0 {
            let s = (-1 - e) as usize;
            (-theta[s], s, true)
        } else if (e as usize) < n {
            (theta[e as usize], e as usize, false)
        } else {
            let s = 2 * n - 1 - e as usize;
            (2.0 * std::f64::consts::PI - theta[s], s, true)
        }
    };
    (0..n)
        .map(|i| {
            let mut xs = [0.0; 5];
            let mut src = [0usize; 5];
            let mut opposite = [false; 5];
            for (j, e) in ((i as i64 - 2)..=(i as i64 + 2)).enumerate() {
                let (x, s, o) = ext(e);
                xs[j] = x;
                src[j] = s;
                opposite[j] = o;
            }
            let w = fornberg_weights(theta[i], &xs, 2);
            let mut w1 = [0.0; 5];
            let mut w2 = [0.0; 5];
            for j in 0..5 {
                w1[j] = w[1][j];
                w2[j] = w[2][j];
            }
            // Derivative weights annihilate constants in exact arithmetic;
            // enforce that exactly so constant fields differentiate to 0.0.
            w1[2] -= w1.iter().sum::<f64>();
            w2[2] -= w2.iter().sum::<f64>();
            ThetaStencil {
                src,
                opposite,
                w1,
                w2,
            }
        })
        .collect()
}

/// First and second θ-derivatives of a nodal field (row-major layout).
pub(crate) fn theta_derivatives(grid: &SphericalGrid, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (nt, np) = (grid.n_theta, grid.n_phi);
    let mut d1 = vec![0.0; values.len()];
    let mut d2 = vec![0.0; values.len()];
    for i in 0..nt {
        let st = &grid.theta_stencils[i];
        for j in 0..np {
            // Difference form Σ w·(v − v_center): exactly zero on constant
            // fields, and equivalent to Σ w·v since derivative weights sum
            // to zero in exact arithmetic.
            let vc = values[i * np + j];
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for m in 0..5 {
                let col = if st.opposite[m] && np > 1 {
                    (j + np / 2) % np
                } else {
                    j
                };
                let dv = values[st.src[m] * np + col] - vc;
                s1 += st.w1[m] * dv;
                s2 += st.w2[m] * dv;
            }
            d1[i * np + j] = s1;
            d2[i * np + j] = s2;
        }
    }
    (d1, d2)
}

/// Spectral derivatives of rows of periodic samples. `data` holds `rows`
/// contiguous blocks of `len` samples covering one period. Writes the first
/// derivative into `out1` and the second into `out2` when given.
pub(crate) fn fourier_derivatives_batch(
    data: &[f64],
    rows: usize,
    len: usize,
    period: f64,
    mut out1: Option<&mut [f64]>,
    mut out2: Option<&mut [f64]>,
) {
    assert_eq!(data.len(), rows * len);
    assert!(len >= 4 && len % 2 == 0, "need an even sample count >= 4");
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let scale = 1.0 / len as f64;
    let base = 2.0 * std::f64::consts::PI / period;
    let mut spec = vec![Complex64::default(); len];
    let mut buf = vec![Complex64::default(); len];
    for r in 0..rows {
        let row = &data[r * len..(r + 1) * len];
        // Shift out a per-row constant: derivatives are unaffected (only the
        // DC bin changes, and its symbols are zero) and constant rows become
        // exactly zero, so they differentiate to 0.0 for any FFT size.
        let shift = row[0];
        for (s, &v) in spec.iter_mut().zip(row) {
            *s = Complex64::new(v - shift, 0.0);
        }
        fwd.process(&mut spec);
        if let Some(out) = out1.as_deref_mut() {
            for (m, b) in buf.iter_mut().enumerate() {
                let k = wavenumber(m, len) * base;
                // The unpaired Nyquist mode has no well-defined odd derivative.
                let k = if m == len / 2 { 0.0 } else { k };
                *b = Complex64::new(0.0, k) * spec[m];
            }
            inv.process(&mut buf);
            for (o, b) in out[r * len..(r + 1) * len].iter_mut().zip(&buf) {
                *o = b.re * scale;
            }
        }
        if let Some(out) = out2.as_deref_mut() {
            for (m, b) in buf.iter_mut().enumerate() {
                let k = wavenumber(m, len) * base;
                *b = Complex64::new(-k * k, 0.0) * spec[m];
            }
            inv.process(&mut buf);
            for (o, b) in out[r * len..(r + 1) * len].iter_mut().zip(&buf) {
                *o = b.re * scale;
            }
        }
    }
}

fn wavenumber(m: usize, len: usize) -> f64 {
    if m <= len / 2 {
        m as f64
    } else {
        m as f64 - len as f64
    }
}

/// First and second derivatives of a single closed loop of samples with the
/// given period (arc length 2π for unit great circles).
pub fn periodic_derivatives(values: &[f64], period: f64) -> (Vec<f64>, Vec<f64>) {
    let mut d1 = vec![0.0; values.len()];
    let mut d2 = vec![0.0; values.len()];
    fourier_derivatives_batch(
        values,
        1,
        values.len(),
        period,
        Some(&mut d1),
        Some(&mut d2),
    );
    (d1, d2)
}

/// Zero every φ Fourier mode above the grid's per-row polar cap. Smooth
/// fields on the sphere carry O(sinθ^m) energy in mode m near the poles, so
/// this only removes content an explicit stepper cannot resolve stably.
pub(crate) fn apply_phi_filter(grid: &SphericalGrid, values: &mut [f64]) {
    if grid.kind != GridKind::FullS2 {
        return;
    }
    let (nt, np) = (grid.n_theta, grid.n_phi);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(np);
    let inv = planner.plan_fft_inverse(np);
    let scale = 1.0 / np as f64;
    let mut spec = vec![Complex64::default(); np];
    for i in 0..nt {
        let cap = grid.phi_mode_cap[i];
        if cap >= np / 2 {
            continue;
        }
        let row = &mut values[i * np..(i + 1) * np];
        // Same constant shift as the spectral derivatives: axisymmetric rows
        // pass through bit-identically.
        let shift = row[0];
        for (s, &v) in spec.iter_mut().zip(row.iter()) {
            *s = Complex64::new(v - shift, 0.0);
        }
        fwd.process(&mut spec);
        for (m, s) in spec.iter_mut().enumerate() {
            if wavenumber(m, np).abs() > cap as f64 {
                *s = Complex64::default();
            }
        }
        inv.process(&mut spec);
        for (v, s) in row.iter_mut().zip(&spec) {
            *v = s.re * scale + shift;
        }
    }
}

/// Per-node gradient in the local orthonormal frame (e_θ, e_φ/sinθ).
/// Axisymmetric fields have no φ component.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub g_theta: Vec<f64>,
    pub g_phi: Option<Vec<f64>>,
}

impl Gradient {
    /// |∇h|² at a node.
    pub fn norm_sq(&self, node: usize) -> f64 {
        let gt = self.g_theta[node];
        let gp = self.g_phi.as_ref().map_or(0.0, |g| g[node]);
        gt * gt + gp * gp
    }
}

/// Per-node covariant Hessian in the orthonormal frame. For axisymmetric
/// fields the Hessian is diag(a11, a22·I_{n−2}) with a11 = h_θθ and
/// a22 = cotθ·h_θ; full grids carry the symmetric 2×2 matrix.
#[derive(Debug, Clone)]
pub struct Hessian {
    pub a11: Vec<f64>,
    pub a12: Option<Vec<f64>>,
    pub a22: Vec<f64>,
}

/// Gradient of a scalar field in the orthonormal frame.
pub fn gradient(field: &ScalarField) -> Gradient {
    let grid = field.grid();
    let (d1, _) = theta_derivatives(grid, &field.values);
    match grid.kind {
        GridKind::Axisymmetric => Gradient {
            g_theta: d1,
            g_phi: None,
        },
        GridKind::FullS2 => {
            let (nt, np) = (grid.n_theta, grid.n_phi);
            let mut dphi = vec![0.0; field.values.len()];
            fourier_derivatives_batch(
                &field.values,
                nt,
                np,
                2.0 * std::f64::consts::PI,
                Some(&mut dphi),
                None,
            );
            for i in 0..nt {
                let inv_sin = 1.0 / grid.sin_theta[i];
                for j in 0..np {
                    dphi[i * np + j] *= inv_sin;
                }
            }
            Gradient {
                g_theta: d1,
                g_phi: Some(dphi),
            }
        }
    }
}

/// Covariant Hessian of a scalar field in the orthonormal frame.
pub fn covariant_hessian(field: &ScalarField) -> Hessian {
    let grid = field.grid();
    let (d1, d2) = theta_derivatives(grid, &field.values);
    match grid.kind {
        GridKind::Axisymmetric => {
            let a22 = d1
                .iter()
                .zip(grid.sin_theta.iter().zip(&grid.cos_theta))
                .zip(&d2)
                .map(|((ht, (s, c)), htt)| if *s < POLE_TOL { *htt } else { c / s * ht })
                .collect();
            Hessian {
                a11: d2,
                a12: None,
                a22,
            }
        }
        GridKind::FullS2 => {
            let (nt, np) = (grid.n_theta, grid.n_phi);
            let tau = 2.0 * std::f64::consts::PI;
            let mut hp = vec![0.0; field.values.len()];
            let mut hpp = vec![0.0; field.values.len()];
            fourier_derivatives_batch(&field.values, nt, np, tau, Some(&mut hp), Some(&mut hpp));
            // Mixed derivative: θ-stencil applied to h_φ. The ghost values are
            // consistent because ∂_φ commutes with the cross-pole index map.
            let (hpt, _) = theta_derivatives(grid, &hp);
            let mut a11 = d2;
            let mut a12 = vec![0.0; field.values.len()];
            let mut a22 = vec![0.0; field.values.len()];
            for i in 0..nt {
                let s = grid.sin_theta[i];
                let cot = grid.cos_theta[i] / s;
                for j in 0..np {
                    let id = i * np + j;
                    a12[id] = (hpt[id] - cot * hp[id]) / s;
                    a22[id] = hpp[id] / (s * s) + cot * d1[id];
                }
            }
            // a11 already holds h_θθ.
            let _ = &mut a11;
            Hessian {
                a11,
                a12: Some(a12),
                a22,
            }
        }
    }
}

/// Cubic Lagrange interpolation of a nodal field at (θ, φ), using the 4
/// surrounding θ rows (extended across the poles) and, on full grids, the 4
/// surrounding periodic φ columns.
pub fn interpolate(field: &ScalarField, theta: f64, phi: f64) -> f64 {
    let grid = field.grid();
    let nt = grid.n_theta;
    // Logical θ-row index range is [-2, nt+2) via the pole extension.
    let mut lo = match grid
        .theta
        .binary_search_by(|t| t.partial_cmp(&theta).unwrap())
    {
        Ok(i) => i as i64 - 1,
        Err(i) => i as i64 - 2,
    };
    lo = lo.clamp(-2, nt as i64 - 3);
    let rows: Vec<(f64, usize, bool)> = (lo..lo + 4)
        .map(|e| {
            if e < 0 {
                let s = (-1 - e) as usize;
                (-grid.theta[s], s, true)
            } else if (e as usize) < nt {
                (grid.theta[e as usize], e as usize, false)
            } else {
                let s = 2 * nt - 1 - e as usize;
                (2.0 * std::f64::consts::PI - grid.theta[s], s, true)
            }
        })
        .collect();
    let row_value = |src: usize, opposite: bool| -> f64 {
        match grid.kind {
            GridKind::Axisymmetric => field.values[src],
            GridKind::FullS2 => {
                let np = grid.n_phi;
                let tau = 2.0 * std::f64::consts::PI;
                // Reading through a pole shifts the meridian by π.
                let ph = if opposite { phi + 0.5 * tau } else { phi };
                let x = (ph / tau * np as f64).rem_euclid(np as f64);
                let j0 = x.floor() as usize % np;
                let frac = x - x.floor();
                // Uniform cubic Lagrange on columns j0-1 .. j0+2.
                let v = |off: i64| {
                    let j = (j0 as i64 + off).rem_euclid(np as i64) as usize;
                    field.values[src * np + j]
                };
                let (vm1, v0, v1, v2) = (v(-1), v(0), v(1), v(2));
                let t = frac;
                let c_m1 = -t * (t - 1.0) * (t - 2.0) / 6.0;
                let c_0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
                let c_1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
                let c_2 = (t + 1.0) * t * (t - 1.0) / 6.0;
                c_m1 * vm1 + c_0 * v0 + c_1 * v1 + c_2 * v2
            }
        }
    };
    let mut acc = 0.0;
    for a in 0..4 {
        let mut lag = 1.0;
        for b in 0..4 {
            if a != b {
                lag *= (theta - rows[b].0) / (rows[a].0 - rows[b].0);
            }
        }
        acc += lag * row_value(rows[a].1, rows[a].2);
    }
    acc
}

/// Deterministic orthonormal frame (u, v) of the plane orthogonal to `axis`
/// in R³; the circle is p(s) = cos(s)·u + sin(s)·v.
pub fn axis_frame(axis: [f64; 3]) -> Result<([f64; 3], [f64; 3]), GridError> {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(GridError::AxisNotUnit { defect: norm - 1.0 });
    }
    let helper = if axis[2].abs() < 0.9 {
        [0.0, 0.0, 1.0]
    } else {
        [1.0, 0.0, 0.0]
    };
    let mut u = cross(helper, axis);
    let un = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    for c in u.iter_mut() {
        *c /= un;
    }
    let v = cross(axis, u);
    Ok((u, v))
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// The m uniform arc-length samples s_j = 2πj/m of a unit great circle.
pub fn circle_arc_samples(m: usize) -> Vec<f64> {
    (0..m)
        .map(|j| 2.0 * std::f64::consts::PI * j as f64 / m as f64)
        .collect()
}

/// Points of the great circle spanned by the orthonormal pair (u, v) in R^d.
pub fn circle_points(u: &[f64], v: &[f64], m: usize) -> Vec<Vec<f64>> {
    assert_eq!(u.len(), v.len());
    circle_arc_samples(m)
        .into_iter()
        .map(|s| {
            u.iter()
                .zip(v)
                .map(|(a, b)| s.cos() * a + s.sin() * b)
                .collect()
        })
        .collect()
}

/// Sample a tabulated field along the great circle orthogonal to `axis`
/// (n = 3 grids). Interpolates bicubically on full grids, cubically in θ on
/// axisymmetric grids.
pub fn sample_great_circle(
    field: &ScalarField,
    axis: [f64; 3],
    m: usize,
) -> Result<Vec<f64>, GridError> {
    if m < 32 || m % 2 != 0 {
        return Err(GridError::CircleSamples(m));
    }
    let (u, v) = axis_frame(axis)?;
    Ok(circle_points(&u, &v, m)
        .into_iter()
        .map(|p| {
            let theta = p[2].clamp(-1.0, 1.0).acos();
            let phi = p[1].atan2(p[0]);
            interpolate(field, theta, phi)
        })
        .collect())
}
