//! Run configuration: a single TOML document that pins down the parameter
//! set, grid, anisotropy, initial surface, step controls, and output
//! destinations of one flow run. A config round-trips through
//! [`to_toml`]/[`parse_config`] bit-exactly, so the file is a complete,
//! reproducible record of the run.

use crate::anisotropy::AnisotropySpec;
use crate::error::ConfigError;
use crate::flow::{InitialData, StepControl};
use crate::grid::GridKind;
use crate::params::{EtaMode, ParamSet};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// `[params]`: the exponents and normalization mode of the flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub n: u32,
    pub k: u32,
    pub p: f64,
    pub q: f64,
    #[serde(default = "default_eta_mode")]
    pub eta_mode: EtaMode,
    #[serde(default = "default_c_target")]
    pub c_target: f64,
}

fn default_eta_mode() -> EtaMode {
    EtaMode::Normalized
}

fn default_c_target() -> f64 {
    1.0
}

/// `[grid]`: discretization of the unit sphere. `n_phi` only applies to
/// `full_s2` grids and defaults to 128 there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub kind: GridKind,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_phi: Option<usize>,
}

fn default_n_theta() -> usize {
    64
}

impl GridSection {
    /// The φ resolution a builder should use (fills in the default for
    /// full grids).
    pub fn resolved_n_phi(&self) -> Option<usize> {
        match self.kind {
            GridKind::Axisymmetric => None,
            GridKind::FullS2 => Some(self.n_phi.unwrap_or(128)),
        }
    }
}

/// `[control]`: step-size safety factors, budgets, and tolerances; all
/// optional with conservative defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    pub dt_safety: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_max: f64,
    pub max_steps: u64,
    pub tol_res: f64,
    pub tol_invariant: f64,
    /// When present, shrink the initial surface by
    /// `rescale_for_positivity` with this clearance before flowing
    /// (required input massaging for fixed-one runs that do not already
    /// expand).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rescale_delta: Option<f64>,
}

impl Default for ControlSection {
    fn default() -> Self {
        let ctl = StepControl::default();
        ControlSection {
            dt_safety: ctl.dt_safety,
            dt_min: ctl.dt_min,
            dt_max: ctl.dt_max,
            t_max: ctl.t_max,
            max_steps: ctl.max_steps,
            tol_res: ctl.tol_res,
            tol_invariant: ctl.tol_invariant,
            rescale_delta: None,
        }
    }
}

impl ControlSection {
    pub fn step_control(&self) -> StepControl {
        StepControl {
            dt_safety: self.dt_safety,
            dt_min: self.dt_min,
            dt_max: self.dt_max,
            t_max: self.t_max,
            max_steps: self.max_steps,
            tol_res: self.tol_res,
            tol_invariant: self.tol_invariant,
        }
    }
}

/// `[outputs]`: file destinations. Optional paths are simply not written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsSection {
    pub csv_path: String,
    pub report_path: String,
    /// Final mesh (full grids) or profile curve (axisymmetric grids).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh_path: Option<String>,
    /// Final state file (grid descriptor + nodal h), reusable by the
    /// `residual` and `export-mesh` subcommands.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_path: Option<String>,
    /// Also export the mesh/profile every this many accepted steps, with
    /// `_stepN` appended to the mesh file stem.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<u64>,
}

impl Default for OutputsSection {
    fn default() -> Self {
        OutputsSection {
            csv_path: "diagnostics.csv".to_string(),
            report_path: "report.txt".to_string(),
            mesh_path: None,
            state_path: None,
            snapshot_every: None,
        }
    }
}

/// A fully validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: ParamsSection,
    pub grid: GridSection,
    pub f: AnisotropySpec,
    pub init: InitialData,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

impl RunConfig {
    /// The validated parameter set ([`parse_config`] guarantees this
    /// succeeds on configs it returned).
    pub fn param_set(&self) -> Result<ParamSet, ConfigError> {
        ParamSet::new(
            self.params.n,
            self.params.k,
            self.params.p,
            self.params.q,
            self.params.eta_mode,
            self.params.c_target,
        )
        .map_err(|e| ConfigError::Semantic {
            field: "params".to_string(),
            message: e.to_string(),
        })
    }
}

fn semantic(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Semantic {
        field: field.to_string(),
        message: message.into(),
    }
}

fn positive(field: &str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(semantic(
            field,
            format!("must be positive and finite, got {value}"),
        ))
    }
}

/// Parse and validate a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = toml::from_str(text).map_err(|err| {
        let (line, col) = err
            .span()
            .map(|span| offset_to_line_col(text, span.start))
            .unwrap_or((1, 1));
        ConfigError::Parse {
            line,
            col,
            message: err.message().to_string(),
        }
    })?;
    validate(&config)?;
    Ok(config)
}

/// Serialize a configuration back to TOML (`parse_config(to_toml(c)) == c`).
pub fn to_toml(config: &RunConfig) -> String {
    toml::to_string_pretty(config).expect("RunConfig serializes to TOML")
}

/// Load and validate a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

fn offset_to_line_col(text: &str, offset: usize) -> (usize, usize) {
    let clamped = offset.min(text.len());
    let before = &text[..clamped];
    let line = before.bytes().filter(|&b| b == b'\n').count() + 1;
    let col = before
        .rsplit_once('\n')
        .map_or(before.len(), |(_, tail)| tail.len())
        + 1;
    (line, col)
}

fn validate(config: &RunConfig) -> Result<(), ConfigError> {
    config.param_set()?;

    let grid = &config.grid;
    if grid.kind == GridKind::FullS2 && config.params.n != 3 {
        return Err(semantic(
            "grid.kind",
            format!("full_s2 grids require n = 3, got n = {}", config.params.n),
        ));
    }
    if grid.n_theta < 8 {
        return Err(semantic(
            "grid.n_theta",
            format!("need at least 8 colatitude nodes, got {}", grid.n_theta),
        ));
    }
    if grid.kind == GridKind::Axisymmetric && grid.n_phi.is_some() {
        return Err(semantic(
            "grid.n_phi",
            "axisymmetric grids have no longitude resolution; remove n_phi",
        ));
    }
    if let Some(np) = grid.resolved_n_phi() {
        if np < 8 || np % 2 != 0 {
            return Err(semantic(
                "grid.n_phi",
                format!("need an even longitude count of at least 8, got {np}"),
            ));
        }
    }

    config
        .f
        .validate(config.params.n as usize)
        .map_err(|e| semantic("f", e.to_string()))?;
    if grid.kind == GridKind::Axisymmetric && !config.f.is_axisymmetric() {
        return Err(semantic(
            "f",
            "axisymmetric grids require an axisymmetric anisotropy",
        ));
    }

    let ctl = &config.control;
    positive("control.dt_safety", ctl.dt_safety)?;
    positive("control.dt_min", ctl.dt_min)?;
    positive("control.dt_max", ctl.dt_max)?;
    positive("control.t_max", ctl.t_max)?;
    positive("control.tol_res", ctl.tol_res)?;
    positive("control.tol_invariant", ctl.tol_invariant)?;
    if ctl.dt_max < ctl.dt_min {
        return Err(semantic(
            "control.dt_max",
            format!("dt_max = {} is below dt_min = {}", ctl.dt_max, ctl.dt_min),
        ));
    }
    if ctl.max_steps == 0 {
        return Err(semantic("control.max_steps", "must be at least 1"));
    }
    if let Some(delta) = ctl.rescale_delta {
        positive("control.rescale_delta", delta)?;
    }
    if let Some(every) = config.outputs.snapshot_every {
        if every == 0 {
            return Err(semantic("outputs.snapshot_every", "must be at least 1"));
        }
        if config.outputs.mesh_path.is_none() {
            return Err(semantic(
                "outputs.snapshot_every",
                "snapshots need outputs.mesh_path to derive file names",
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [params]
        n = 3
        k = 1
        p = 6.0
        q = 6.0

        [grid]
        kind = "axisymmetric"

        [f]
        kind = "constant"
        value = 1.0

        [init]
        kind = "sphere"
        radius = 0.8
    "#;

    #[test]
    fn minimal_config_gets_all_defaults() {
        let config = parse_config(MINIMAL).unwrap();
        assert_eq!(config.params.eta_mode, EtaMode::Normalized);
        assert_eq!(config.params.c_target, 1.0);
        assert_eq!(config.grid.n_theta, 64);
        assert_eq!(config.grid.resolved_n_phi(), None);
        assert_eq!(config.control.dt_safety, 0.2);
        assert_eq!(config.control.dt_min, 1e-10);
        assert_eq!(config.control.dt_max, 1e-2);
        assert_eq!(config.control.t_max, 100.0);
        assert_eq!(config.control.max_steps, 1_000_000);
        assert_eq!(config.control.tol_res, 1e-6);
        assert_eq!(config.control.tol_invariant, 1e-3);
        assert_eq!(config.control.rescale_delta, None);
        assert_eq!(config.outputs.csv_path, "diagnostics.csv");
        assert_eq!(config.outputs.report_path, "report.txt");
        assert_eq!(config.outputs.mesh_path, None);
        assert!(config.param_set().is_ok());
    }

    #[test]
    fn full_grid_defaults_to_128_longitudes() {
        let text = MINIMAL.replace("kind = \"axisymmetric\"", "kind = \"full_s2\"");
        let config = parse_config(&text).unwrap();
        assert_eq!(config.grid.resolved_n_phi(), Some(128));
    }

    #[test]
    fn invalid_window_is_a_semantic_error_naming_the_inequality() {
        let text = MINIMAL.replace("k = 1", "k = 2");
        match parse_config(&text) {
            Err(ConfigError::Semantic { field, message }) => {
                assert_eq!(field, "params");
                assert!(message.contains("k < n-1 violated"), "{message}");
            }
            other => panic!("expected semantic error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let text = MINIMAL.to_string() + "\n[control]\ndt_safetyy = 0.1\n";
        match parse_config(&text) {
            Err(ConfigError::Parse { message, line, .. }) => {
                assert!(message.contains("dt_safetyy"), "{message}");
                assert!(line > 1);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn fixed_one_outside_the_theorem_window_cites_it() {
        // (3,1,6,3) sits in the C0 window (q − n = 0), which is not enough
        // for the fixed-one normalization.
        let text = MINIMAL.replace("q = 6.0", "q = 3.0\neta_mode = \"fixed_one\"");
        match parse_config(&text) {
            Err(ConfigError::Semantic { field, message }) => {
                assert_eq!(field, "params");
                assert!(message.contains("k+1 < q-n < p-k-1"), "{message}");
            }
            other => panic!("expected semantic error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_and_column() {
        match parse_config("[params]\nn = \n") {
            Err(ConfigError::Parse { line, col, .. }) => {
                assert_eq!(line, 2);
                assert!(col >= 1);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_through_toml_is_identity() {
        let mut config = parse_config(MINIMAL).unwrap();
        config.control.rescale_delta = Some(0.25);
        config.outputs.mesh_path = Some("final.obj".to_string());
        config.outputs.snapshot_every = Some(500);
        config.f = AnisotropySpec::LinearHarmonic {
            base: 1.0,
            epsilon: 0.05,
            direction: vec![0.0, 0.0, 1.0],
        };
        let text = to_toml(&config);
        let reparsed = parse_config(&text).unwrap();
        assert_eq!(reparsed, config);
    }

    #[test]
    fn grid_and_anisotropy_cross_checks() {
        let text = MINIMAL.replace("n = 3", "n = 5");
        let full = text.replace("kind = \"axisymmetric\"", "kind = \"full_s2\"");
        assert!(matches!(
            parse_config(&full),
            Err(ConfigError::Semantic { field, .. }) if field == "grid.kind"
        ));

        let off_axis = MINIMAL.replace(
            "kind = \"constant\"\n        value = 1.0",
            "kind = \"linear_harmonic\"\n        base = 1.0\n        epsilon = 0.05\n        direction = [1.0, 0.0, 0.0]",
        );
        assert!(matches!(
            parse_config(&off_axis),
            Err(ConfigError::Semantic { field, .. }) if field == "f"
        ));

        let tiny = MINIMAL.replace(
            "kind = \"axisymmetric\"",
            "kind = \"axisymmetric\"\nn_theta = 4",
        );
        assert!(matches!(
            parse_config(&tiny),
            Err(ConfigError::Semantic { field, .. }) if field == "grid.n_theta"
        ));

        let snap = MINIMAL.to_string() + "\n[outputs]\nsnapshot_every = 10\n";
        assert!(matches!(
            parse_config(&snap),
            Err(ConfigError::Semantic { field, .. }) if field == "outputs.snapshot_every"
        ));
    }
}
