//! Command-line front end: run flows, classify parameters, audit the
//! anisotropy, and evaluate or export saved states.
//!
//! Exit codes are the machine contract:
//! `run` 0 = converged, 3 = time-capped, 4 = aborted; `check-params`
//! 0 = valid, 1 = invalid; `check-f` 0 = pass, 1 = fail, 2 = inconclusive;
//! any operational failure (I/O, malformed files, inapplicable inputs) is
//! 10. Stdout is for humans.

use clap::{Parser, Subcommand};
use cmflow::config::{load_config, RunConfig};
use cmflow::flow::{build_initial, run, FlowState, RunStatus};
use cmflow::geometry::{elliptic_residual, rescale_for_positivity};
use cmflow::grid::{build_grid, ScalarField, SphericalGrid};
use cmflow::output::{
    export_surface, read_state, snapshot_path, write_report, write_state, CsvWriter,
};
use cmflow::params::ParamSet;
use cmflow::{condition_a_margin, eval_f};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

const EXIT_TIME_CAPPED: u8 = 3;
const EXIT_ABORTED: u8 = 4;
const EXIT_OPERATIONAL: u8 = 10;

#[derive(Parser)]
#[command(
    name = "cmflow",
    version,
    about = "Anisotropic curvature flow solver for convex hypersurfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured initial surface until the residual converges
    /// or a budget runs out.
    Run { config: PathBuf },
    /// Validate the exponent set and print its regime classification.
    CheckParams { config: PathBuf },
    /// Scan the anisotropy for the admissibility (convexity) condition on
    /// great circles.
    CheckF {
        config: PathBuf,
        /// Number of great circles to scan.
        #[arg(long, default_value_t = 64)]
        circles: usize,
        /// Sample count per circle (even).
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },
    /// Max-norm residual of a saved state against f·h^{1-p}·rho^{q-n}·sigma_k = c.
    Residual { config: PathBuf, state: PathBuf },
    /// Export a saved state: OBJ mesh on full grids, profile CSV on
    /// axisymmetric ones.
    ExportMesh {
        config: PathBuf,
        state: PathBuf,
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::CheckParams { config } => cmd_check_params(&config),
        Command::CheckF {
            config,
            circles,
            samples,
        } => cmd_check_f(&config, circles, samples),
        Command::Residual { config, state } => cmd_residual(&config, &state),
        Command::ExportMesh { config, state, out } => cmd_export_mesh(&config, &state, &out),
    };
    match code {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_OPERATIONAL)
        }
    }
}

/// Shared setup: validated config -> (params, grid sampling of f, h0).
fn prepare(
    config: &RunConfig,
) -> Result<
    (
        ParamSet,
        Arc<SphericalGrid>,
        cmflow::grid::QuadratureRule,
        Vec<f64>,
        ScalarField,
    ),
    String,
> {
    let params = config.param_set().map_err(|e| e.to_string())?;
    let (grid, rule) = build_grid(
        config.grid.kind,
        config.grid.n_theta,
        config.grid.resolved_n_phi(),
        params.n,
    )
    .map_err(|e| e.to_string())?;
    let f_vals = eval_f(&config.f, &grid).map_err(|e| e.to_string())?;
    let h0 = build_initial(&config.init, &grid).map_err(|e| e.to_string())?;
    Ok((params, grid, rule, f_vals, h0))
}

fn cmd_run(config_path: &Path) -> Result<u8, String> {
    let config = load_config(config_path).map_err(|e| e.to_string())?;
    let (params, _grid, rule, f_vals, mut h0) = prepare(&config)?;
    let ctl = config.control.step_control();

    if let Some(delta) = config.control.rescale_delta {
        let (rescaled, lambda) =
            rescale_for_positivity(&h0, &f_vals, &params, delta).map_err(|e| e.to_string())?;
        println!("rescaled initial surface by {lambda:.6} for clearance {delta}");
        h0 = rescaled;
    }

    let mut state = match FlowState::new(h0, params, f_vals, rule, &ctl) {
        Ok(state) => state,
        Err(err) => {
            // The configuration was valid but the surface fails the flow's
            // mathematical preconditions: that is an aborted run, not an
            // operational error.
            eprintln!("aborted before the first step: {err}");
            return Ok(EXIT_ABORTED);
        }
    };

    let csv_path = PathBuf::from(&config.outputs.csv_path);
    let mut writer = CsvWriter::create(&csv_path).map_err(|e| e.to_string())?;
    let mesh_path = config.outputs.mesh_path.as_ref().map(PathBuf::from);
    let snapshot_every = config.outputs.snapshot_every;
    let mut sink_err: Option<String> = None;

    let outcome = run(&mut state, &ctl, |rec, h| {
        if sink_err.is_some() {
            return;
        }
        if let Err(e) = writer.write_record(rec) {
            sink_err = Some(e.to_string());
            return;
        }
        if let (Some(every), Some(mesh)) = (snapshot_every, mesh_path.as_ref()) {
            if rec.step % every == 0 {
                if let Err(e) = export_surface(&snapshot_path(mesh, rec.step), h) {
                    sink_err = Some(e.to_string());
                }
            }
        }
    });
    writer.finish().map_err(|e| e.to_string())?;
    if let Some(message) = sink_err {
        return Err(message);
    }

    write_report(Path::new(&config.outputs.report_path), &outcome).map_err(|e| e.to_string())?;
    if let Some(state_path) = &config.outputs.state_path {
        write_state(Path::new(state_path), &state.h, state.t).map_err(|e| e.to_string())?;
    }
    if let Some(mesh) = &mesh_path {
        export_surface(mesh, &state.h).map_err(|e| e.to_string())?;
    }

    println!(
        "{:?} after {} steps at t = {:.6}: residual sup|F/h - eta| = {:.3e}",
        outcome.status, outcome.steps, outcome.t_final, outcome.residual
    );
    println!(
        "h range [{:.6}, {:.6}], worst J drift {:.3e}, monitor violations {}",
        state.h.min(),
        state.h.max(),
        outcome.monitors.worst_j_drift,
        outcome.monitors.violations
    );
    if let Some(reason) = &outcome.abort_reason {
        eprintln!("aborted: {reason}");
    }
    Ok(match outcome.status {
        RunStatus::Converged => 0,
        RunStatus::TimeCapped => EXIT_TIME_CAPPED,
        RunStatus::Aborted => EXIT_ABORTED,
    })
}

fn cmd_check_params(config_path: &Path) -> Result<u8, String> {
    // Parse without full semantic validation so parameter problems are
    // reported as the classification instead of a config error.
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| format!("{}: {e}", config_path.display()))?;
    let config: RunConfig = toml::from_str(&text).map_err(|e| e.message().to_string())?;
    match config.param_set() {
        Ok(params) => {
            println!(
                "regime: {} (n = {}, k = {}, p = {}, q = {})",
                params.regime().name(),
                params.n,
                params.k,
                params.p,
                params.q
            );
            println!("speed exponent q-n+k+1-p = {}", params.speed_exponent());
            println!(
                "admissibility constant p+k-1-q+n = {}",
                params.condition_a_constant()
            );
            Ok(0)
        }
        Err(err) => {
            println!("invalid: {err}");
            Ok(1)
        }
    }
}

fn cmd_check_f(config_path: &Path, circles: usize, samples: usize) -> Result<u8, String> {
    let config = load_config(config_path).map_err(|e| e.to_string())?;
    let params = config.param_set().map_err(|e| e.to_string())?;
    let report =
        condition_a_margin(&config.f, &params, circles, samples).map_err(|e| e.to_string())?;
    println!(
        "worst margin {} over {} great circles x {} samples",
        report.margin, report.circles, report.samples_per_circle
    );
    if report.tabulation_error > 0.0 {
        println!("tabulation error estimate {}", report.tabulation_error);
    }
    if report.inconclusive {
        println!("inconclusive: the margin is within the tabulation error band");
        Ok(2)
    } else if report.passes() {
        println!("pass: the admissibility expression stays positive");
        Ok(0)
    } else {
        println!("fail: the admissibility expression goes nonpositive");
        Ok(1)
    }
}

fn cmd_residual(config_path: &Path, state_path: &Path) -> Result<u8, String> {
    let config = load_config(config_path).map_err(|e| e.to_string())?;
    let params = config.param_set().map_err(|e| e.to_string())?;
    let (h, t, _rule) = read_state(state_path).map_err(|e| e.to_string())?;
    if h.grid().dim_n != params.n {
        return Err(format!(
            "state grid lives on S^{} but the config asks for n = {}",
            h.grid().dim_n - 1,
            params.n
        ));
    }
    let f_vals = eval_f(&config.f, h.grid()).map_err(|e| e.to_string())?;
    let (_, sup) =
        elliptic_residual(&h, &f_vals, &params, params.c_target).map_err(|e| e.to_string())?;
    println!(
        "state at t = {t}: sup|f h^(1-p) rho^(q-n) sigma_k - {}| = {:.6e}",
        params.c_target, sup
    );
    Ok(0)
}

fn cmd_export_mesh(config_path: &Path, state_path: &Path, out: &Path) -> Result<u8, String> {
    let config = load_config(config_path).map_err(|e| e.to_string())?;
    let params = config.param_set().map_err(|e| e.to_string())?;
    let (h, _, _) = read_state(state_path).map_err(|e| e.to_string())?;
    if h.grid().dim_n != params.n {
        return Err(format!(
            "state grid lives on S^{} but the config asks for n = {}",
            h.grid().dim_n - 1,
            params.n
        ));
    }
    export_surface(out, &h).map_err(|e| e.to_string())?;
    println!("wrote {}", out.display());
    Ok(0)
}
