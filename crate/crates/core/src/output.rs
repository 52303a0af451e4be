//! Run artifacts: the diagnostics CSV, the human-readable report, state
//! files (grid descriptor + nodal h, decimal-round-trip exact), and the
//! surface exporters (OBJ polygon mesh for full grids, profile-curve CSV
//! for axisymmetric ones).

use crate::error::{ConfigError, GeometryError};
use crate::flow::{DiagnosticsRecord, RunOutcome};
use crate::geometry::{curvature_pipeline, embed};
use crate::grid::{build_grid, GridKind, QuadratureRule, ScalarField};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::Path;
use std::sync::Arc;

/// The diagnostics schema; the first line of every run CSV, byte-identical
/// across platforms.
pub const CSV_HEADER: &str = "step,t,dt,h_min,h_max,eta,J,Fh_min,Fh_max,residual,\
                              convexity_margin,kappa_max,mv_lower_slack,mv_upper_slack,J_drift";

/// 17 significant decimal digits: enough to reproduce any f64 exactly.
fn full(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ConfigError + '_ {
    move |source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Streaming writer for per-step diagnostics rows.
pub struct CsvWriter {
    out: BufWriter<File>,
    path: String,
}

impl CsvWriter {
    pub fn create(path: &Path) -> Result<CsvWriter, ConfigError> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{CSV_HEADER}").map_err(io_err(path))?;
        Ok(CsvWriter {
            out,
            path: path.display().to_string(),
        })
    }

    pub fn write_record(&mut self, rec: &DiagnosticsRecord) -> Result<(), ConfigError> {
        let row = format_record(rec);
        writeln!(self.out, "{row}").map_err(|source| ConfigError::Io {
            path: self.path.clone(),
            source,
        })
    }

    pub fn finish(mut self) -> Result<(), ConfigError> {
        self.out.flush().map_err(|source| ConfigError::Io {
            path: self.path.clone(),
            source,
        })
    }
}

fn format_record(rec: &DiagnosticsRecord) -> String {
    let floats = [
        rec.t,
        rec.dt,
        rec.h_min,
        rec.h_max,
        rec.eta,
        rec.j,
        rec.fh_min,
        rec.fh_max,
        rec.residual,
        rec.convexity_margin,
        rec.kappa_max,
        rec.mv_lower_slack,
        rec.mv_upper_slack,
        rec.j_drift,
    ];
    let mut row = rec.step.to_string();
    for x in floats {
        row.push(',');
        row.push_str(&full(x));
    }
    row
}

/// Write all records at once (the streaming [`CsvWriter`] is preferred for
/// long runs).
pub fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord]) -> Result<(), ConfigError> {
    let mut writer = CsvWriter::create(path)?;
    for rec in records {
        writer.write_record(rec)?;
    }
    writer.finish()
}

/// Human-readable run summary (the machine contract is the exit code and
/// the CSV, not this file).
pub fn write_report(path: &Path, outcome: &RunOutcome) -> Result<(), ConfigError> {
    let mut text = String::new();
    let _ = writeln!(text, "status: {:?}", outcome.status);
    if let Some(reason) = &outcome.abort_reason {
        let _ = writeln!(text, "abort reason: {reason}");
    }
    let _ = writeln!(text, "accepted steps: {}", outcome.steps);
    let _ = writeln!(text, "final time: {}", full(outcome.t_final));
    let _ = writeln!(
        text,
        "final residual sup|F/h - eta|: {}",
        full(outcome.residual)
    );
    let m = &outcome.monitors;
    let _ = writeln!(text, "monitor tolerance: {}", full(m.tol_invariant));
    let _ = writeln!(text, "worst |J - J0|/J0: {}", full(m.worst_j_drift));
    let _ = writeln!(
        text,
        "worst F/h envelope excess: {}",
        full(m.worst_envelope_excess)
    );
    let _ = writeln!(
        text,
        "worst F/h excess growth: {}",
        full(m.worst_excess_growth)
    );
    let _ = writeln!(
        text,
        "worst sandwich defect: {}",
        full(m.worst_sandwich_defect)
    );
    let _ = writeln!(
        text,
        "worst monotonicity defect: {}",
        full(m.worst_monotonicity_defect)
    );
    let _ = writeln!(text, "tolerance violations: {}", m.violations);
    if let Some(rec) = &outcome.last_record {
        let _ = writeln!(text, "last record: {CSV_HEADER}");
        let _ = writeln!(text, "             {}", format_record(rec));
    }
    std::fs::write(path, text).map_err(io_err(path))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateGrid {
    kind: GridKind,
    dim_n: u32,
    n_theta: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_phi: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateBody {
    t: f64,
    h: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    grid: StateGrid,
    state: StateBody,
}

/// Persist a nodal state. TOML's shortest-round-trip float encoding makes
/// `read_state(write_state(h))` bit-exact.
pub fn write_state(path: &Path, h: &ScalarField, t: f64) -> Result<(), ConfigError> {
    let grid = h.grid();
    let file = StateFile {
        grid: StateGrid {
            kind: grid.kind,
            dim_n: grid.dim_n,
            n_theta: grid.n_theta,
            n_phi: match grid.kind {
                GridKind::Axisymmetric => None,
                GridKind::FullS2 => Some(grid.n_phi),
            },
        },
        state: StateBody {
            t,
            h: h.values.clone(),
        },
    };
    let text = toml::to_string(&file).expect("state serializes to TOML");
    std::fs::write(path, text).map_err(io_err(path))
}

/// Load a state written by [`write_state`]: the field, its time stamp, and
/// a quadrature rule on the rebuilt grid.
pub fn read_state(path: &Path) -> Result<(ScalarField, f64, QuadratureRule), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let file: StateFile = toml::from_str(&text).map_err(|err| ConfigError::Parse {
        line: 1,
        col: 1,
        message: format!("{}: {}", path.display(), err.message()),
    })?;
    let (grid, rule) = build_grid(
        file.grid.kind,
        file.grid.n_theta,
        file.grid.n_phi,
        file.grid.dim_n,
    )
    .map_err(|e| ConfigError::Semantic {
        field: "grid".to_string(),
        message: e.to_string(),
    })?;
    let h = ScalarField::from_values(&grid, file.state.h).map_err(|e| ConfigError::Semantic {
        field: "state.h".to_string(),
        message: e.to_string(),
    })?;
    Ok((h, file.state.t, rule))
}

/// OBJ text for the embedded surface of a full-grid support function:
/// lattice vertices in row-major (θ outer, φ inner) order, quad faces, and
/// two triangle-fan caps around computed pole points (the φ-averages of
/// the first and last θ rows — a visualization-only closure that need not
/// lie on the surface).
pub fn obj_text(h: &ScalarField) -> Result<String, GeometryError> {
    let grid = Arc::clone(h.grid());
    if grid.kind != GridKind::FullS2 {
        return Err(GeometryError::MeshNeedsFullGrid);
    }
    let embedded = embed(h)?;
    let (nt, np) = (grid.n_theta, grid.n_phi);
    let ring_mean = |row: usize| -> [f64; 3] {
        let mut acc = [0.0f64; 3];
        for j in 0..np {
            let v = embedded.points[row * np + j];
            for a in 0..3 {
                acc[a] += v[a];
            }
        }
        acc.map(|c| c / np as f64)
    };

    let mut text = String::new();
    for v in &embedded.points {
        let _ = writeln!(text, "v {} {} {}", full(v[0]), full(v[1]), full(v[2]));
    }
    let north = ring_mean(0);
    let south = ring_mean(nt - 1);
    let _ = writeln!(
        text,
        "v {} {} {}",
        full(north[0]),
        full(north[1]),
        full(north[2])
    );
    let _ = writeln!(
        text,
        "v {} {} {}",
        full(south[0]),
        full(south[1]),
        full(south[2])
    );

    // 1-based OBJ indices; vertex (i, j) is i*np + j + 1.
    let vid = |i: usize, j: usize| i * np + (j % np) + 1;
    let (north_id, south_id) = (nt * np + 1, nt * np + 2);
    for i in 0..nt - 1 {
        for j in 0..np {
            let _ = writeln!(
                text,
                "f {} {} {} {}",
                vid(i, j),
                vid(i + 1, j),
                vid(i + 1, j + 1),
                vid(i, j + 1)
            );
        }
    }
    for j in 0..np {
        let _ = writeln!(text, "f {} {} {}", north_id, vid(0, j), vid(0, j + 1));
        let _ = writeln!(
            text,
            "f {} {} {}",
            south_id,
            vid(nt - 1, j + 1),
            vid(nt - 1, j)
        );
    }
    Ok(text)
}

/// Profile-curve CSV for an axisymmetric support function: one row per
/// colatitude node with the meridian/transverse principal radii and the
/// radial distance.
pub fn profile_text(h: &ScalarField) -> Result<String, GeometryError> {
    let grid = h.grid();
    let curv = curvature_pipeline(h, 1)?;
    let mut text = String::from("theta,h,lambda_meridian,lambda_transverse,rho\n");
    for i in 0..grid.n_theta {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            full(grid.theta[i]),
            full(h.values[i]),
            full(curv.b11[i]),
            full(curv.b22[i]),
            full(curv.rho[i])
        );
    }
    Ok(text)
}

/// Export a surface to `path`: an OBJ mesh on full grids, a profile CSV on
/// axisymmetric ones.
pub fn export_surface(path: &Path, h: &ScalarField) -> Result<(), ConfigError> {
    let text = match h.grid().kind {
        GridKind::FullS2 => obj_text(h),
        GridKind::Axisymmetric => profile_text(h),
    }
    .map_err(|e| ConfigError::Semantic {
        field: "state.h".to_string(),
        message: e.to_string(),
    })?;
    std::fs::write(path, text).map_err(io_err(path))
}

/// `final.obj` → `final_step42.obj`: snapshot naming for periodic exports.
pub fn snapshot_path(base: &Path, step: u64) -> std::path::PathBuf {
    let stem = base
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("snapshot");
    let name = match base.extension().and_then(|s| s.to_str()) {
        Some(ext) => format!("{stem}_step{step}.{ext}"),
        None => format!("{stem}_step{step}"),
    };
    base.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{run, FlowState, RunStatus, StepControl};
    use crate::params::{EtaMode, ParamSet};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = tempfile::tempdir().unwrap().keep();
        dir.join(name)
    }

    #[test]
    fn csv_header_is_the_documented_byte_sequence() {
        assert_eq!(
            CSV_HEADER,
            "step,t,dt,h_min,h_max,eta,J,Fh_min,Fh_max,residual,convexity_margin,\
             kappa_max,mv_lower_slack,mv_upper_slack,J_drift"
        );
        assert_eq!(CSV_HEADER.split(',').count(), 15);
    }

    #[test]
    fn float_cells_round_trip_exactly() {
        for x in [PI, 1.0 / 3.0, 6.02e23, -2.5e-19, 0.1 + 0.2] {
            let cell = full(x);
            assert_eq!(cell.parse::<f64>().unwrap(), x, "{cell}");
        }
    }

    #[test]
    fn stationary_run_writes_exact_rows() {
        // Three accepted steps of the stationary unit sphere: every row
        // must show h = 1, residual 0, and J = |S²| = 4π.
        let (grid, rule) = build_grid(GridKind::Axisymmetric, 32, None, 3).unwrap();
        let h = ScalarField::constant(&grid, 1.0);
        let params = ParamSet::new(3, 1, 6.0, 6.0, EtaMode::Normalized, 1.0).unwrap();
        // The stationary residual is exactly 0, so an impossible tol_res
        // keeps the run going until the step budget.
        let ctl = StepControl {
            max_steps: 3,
            tol_res: -1.0,
            ..StepControl::default()
        };
        let f = vec![1.0; grid.node_count()];
        let mut state = FlowState::new(h, params, f, rule, &ctl).unwrap();
        let path = tmp("diag.csv");
        {
            let mut writer = CsvWriter::create(&path).unwrap();
            let outcome = run(&mut state, &ctl, |rec, _| {
                writer.write_record(rec).unwrap();
            });
            writer.finish().unwrap();
            assert_eq!(outcome.status, RunStatus::TimeCapped);
            assert_eq!(outcome.steps, 3);
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 4); // header + one row per accepted step
        for (idx, line) in lines[1..].iter().enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells.len(), 15);
            assert_eq!(cells[0].parse::<u64>().unwrap(), idx as u64 + 1);
            let h_min: f64 = cells[3].parse().unwrap();
            let h_max: f64 = cells[4].parse().unwrap();
            let j: f64 = cells[6].parse().unwrap();
            let residual: f64 = cells[9].parse().unwrap();
            assert_eq!(h_min, 1.0);
            assert_eq!(h_max, 1.0);
            assert_eq!(residual, 0.0);
            assert_abs_diff_eq!(j, 4.0 * PI, epsilon = 4.0 * PI * 1e-12);
        }
    }

    #[test]
    fn state_files_round_trip_bit_exactly() {
        let (grid, _) = build_grid(GridKind::FullS2, 12, Some(16), 3).unwrap();
        let h = ScalarField::from_fn(&grid, |t, p| {
            1.0 + 0.03 * t.cos() + 0.01 * t.sin() * p.cos()
        });
        let path = tmp("state.toml");
        write_state(&path, &h, 0.62).unwrap();
        let (h2, t2, _) = read_state(&path).unwrap();
        assert_eq!(t2, 0.62);
        assert_eq!(h2.grid().n_theta, 12);
        assert_eq!(h2.grid().n_phi, 16);
        assert_eq!(h.values, h2.values);
    }

    #[test]
    fn unit_sphere_mesh_vertices_sit_on_the_unit_sphere() {
        let (grid, _) = build_grid(GridKind::FullS2, 24, Some(48), 3).unwrap();
        let h = ScalarField::constant(&grid, 1.0);
        let text = obj_text(&h).unwrap();
        let mut vertices = 0usize;
        let mut faces = 0usize;
        let lattice = grid.node_count();
        for line in text.lines() {
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("v") => {
                    let coords: Vec<f64> = parts.map(|c| c.parse::<f64>().unwrap()).collect();
                    let r = (coords[0].powi(2) + coords[1].powi(2) + coords[2].powi(2)).sqrt();
                    vertices += 1;
                    if vertices <= lattice {
                        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);
                    } else {
                        // Pole caps average a ring and sit slightly inside.
                        assert!(r < 1.0 && r > 0.9);
                    }
                }
                Some("f") => faces += 1,
                _ => {}
            }
        }
        assert_eq!(vertices, lattice + 2);
        assert_eq!(faces, (24 - 1) * 48 + 2 * 48);
    }

    #[test]
    fn translated_ball_mesh_is_a_unit_sphere_about_the_center() {
        let (grid, _) = build_grid(GridKind::FullS2, 64, Some(32), 3).unwrap();
        let h = ScalarField::from_fn(&grid, |t, _| 1.0 + 0.3 * t.cos());
        let text = obj_text(&h).unwrap();
        let lattice = grid.node_count();
        for line in text.lines().take(lattice) {
            let coords: Vec<f64> = line
                .split_whitespace()
                .skip(1)
                .map(|c| c.parse::<f64>().unwrap())
                .collect();
            let d = (coords[0].powi(2) + coords[1].powi(2) + (coords[2] - 0.3).powi(2)).sqrt();
            assert_abs_diff_eq!(d, 1.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn ellipsoid_mesh_satisfies_its_quadric_equation() {
        let axes = [1.0f64, 1.2, 1.5];
        let (grid, _) = build_grid(GridKind::FullS2, 320, Some(64), 3).unwrap();
        let h = ScalarField::from_fn(&grid, |t, p| {
            let x = [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()];
            ((axes[0] * x[0]).powi(2) + (axes[1] * x[1]).powi(2) + (axes[2] * x[2]).powi(2)).sqrt()
        });
        let text = obj_text(&h).unwrap();
        let mut worst = 0.0f64;
        for line in text.lines().take(grid.node_count()) {
            let coords: Vec<f64> = line
                .split_whitespace()
                .skip(1)
                .map(|c| c.parse::<f64>().unwrap())
                .collect();
            let q = (coords[0] / axes[0]).powi(2)
                + (coords[1] / axes[1]).powi(2)
                + (coords[2] / axes[2]).powi(2);
            worst = worst.max((q - 1.0).abs());
        }
        assert!(worst <= 1e-9, "worst quadric residual {worst}");
    }

    #[test]
    fn axisymmetric_grids_export_a_profile_curve() {
        let (grid, _) = build_grid(GridKind::Axisymmetric, 16, None, 3).unwrap();
        let h = ScalarField::constant(&grid, 1.0);
        assert!(matches!(
            obj_text(&h),
            Err(GeometryError::MeshNeedsFullGrid)
        ));
        let text = profile_text(&h).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "theta,h,lambda_meridian,lambda_transverse,rho");
        assert_eq!(lines.len(), 17);
        for line in &lines[1..] {
            let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            assert!(cells[0] > 0.0 && cells[0] < PI);
            assert_eq!(cells[1], 1.0);
            assert_eq!(cells[2], 1.0); // meridian radius of the unit sphere
            assert_eq!(cells[3], 1.0); // transverse radius
            assert_eq!(cells[4], 1.0); // rho
        }
    }

    #[test]
    fn snapshot_names_embed_the_step_index() {
        assert_eq!(
            snapshot_path(Path::new("out/final.obj"), 42),
            Path::new("out/final_step42.obj")
        );
        assert_eq!(
            snapshot_path(Path::new("profile"), 7),
            Path::new("profile_step7")
        );
    }
}
