//! Black-box tests of the command-line interface: exit codes, output files,
//! and the shape of the human-readable summaries.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cmflow::output::CSV_HEADER;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cmflow"))
}

fn tmp() -> PathBuf {
    tempfile::tempdir().unwrap().keep()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process killed by signal")
}

/// Axisymmetric fixed-η benchmark that converges to the unit sphere, with
/// every optional output enabled.
const CONVERGING: &str = r#"
[params]
n = 3
k = 1
p = 6.0
q = 6.0
eta_mode = "fixed_one"

[grid]
kind = "axisymmetric"
n_theta = 48

[f]
kind = "constant"
value = 1.0

[init]
kind = "sphere"
radius = 0.8

[control]
t_max = 50.0

[outputs]
csv_path = "diagnostics.csv"
report_path = "report.txt"
state_path = "final.toml"
mesh_path = "profile.csv"
snapshot_every = 500
"#;

#[test]
fn run_converges_and_the_saved_state_round_trips() {
    let dir = tmp();
    let config = write(&dir, "run.toml", CONVERGING);
    let out = bin()
        .arg("run")
        .arg(&config)
        .current_dir(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("Converged"), "{}", stdout(&out));

    let csv = fs::read_to_string(dir.join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let first = lines.next().expect("at least one data row");
    assert!(first.starts_with("1,"), "rows are 1-based: {first}");
    assert_eq!(first.split(',').count(), 15);

    let report = fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(report.contains("Converged"), "{report}");

    // The run takes well over 500 steps, so at least one snapshot exists.
    assert!(dir.join("profile_step500.csv").exists());
    let profile = fs::read_to_string(dir.join("profile.csv")).unwrap();
    assert!(profile.starts_with("theta,h,lambda_meridian,lambda_transverse,rho"));

    // residual: the converged state solves the stationary equation.
    let out = bin()
        .arg("residual")
        .arg(&config)
        .arg(dir.join("final.toml"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("sup|f h^(1-p)"), "{text}");

    // export-mesh on an axisymmetric state writes the meridian profile.
    let out = bin()
        .arg("export-mesh")
        .arg(&config)
        .arg(dir.join("final.toml"))
        .arg(dir.join("exported.csv"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let exported = fs::read_to_string(dir.join("exported.csv")).unwrap();
    assert!(exported.starts_with("theta,h,"));
}

#[test]
fn run_exits_three_when_time_capped() {
    let dir = tmp();
    let config = write(
        &dir,
        "run.toml",
        &CONVERGING
            .replace("t_max = 50.0", "t_max = 0.01\ntol_res = 1e-12")
            .replace("snapshot_every = 500", ""),
    );
    let out = bin()
        .arg("run")
        .arg(&config)
        .current_dir(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 3, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("TimeCapped"), "{}", stdout(&out));
}

#[test]
fn run_exits_four_when_the_data_is_inadmissible() {
    // Fixed-η mode rejects initially contracting data (F/h < 1 somewhere).
    let dir = tmp();
    let config = write(
        &dir,
        "run.toml",
        &CONVERGING.replace("radius = 0.8", "radius = 1.2"),
    );
    let out = bin()
        .arg("run")
        .arg(&config)
        .current_dir(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 4, "stderr: {}", stderr(&out));
    assert!(
        stderr(&out).contains("aborted before the first step"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn check_params_classifies_the_exponents() {
    let dir = tmp();
    let good = write(&dir, "good.toml", CONVERGING);
    let out = bin().arg("check-params").arg(&good).output().unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("theorem-window"), "{text}");
    assert!(text.contains("speed exponent"), "{text}");

    // q − n = 0 sits outside the window (k+1, p−k−1) = (2, 4), which the
    // fixed-η mode requires.
    let bad = write(&dir, "bad.toml", &CONVERGING.replace("q = 6.0", "q = 3.0"));
    let out = bin().arg("check-params").arg(&bad).output().unwrap();
    assert_eq!(code(&out), 1, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("invalid"), "{}", stdout(&out));
}

#[test]
fn check_f_distinguishes_pass_fail_and_inconclusive() {
    let dir = tmp();
    let pass = write(
        &dir,
        "pass.toml",
        &CONVERGING.replace("eta_mode = \"fixed_one\"", ""),
    );
    let out = bin().arg("check-f").arg(&pass).output().unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("pass"), "{}", stdout(&out));

    let wavy = "[f]\nkind = \"axisym_cosine_poly\"\ncoeffs = [1.0, 0.0, 0.0, 0.0, 0.9]\n";
    let fail = write(
        &dir,
        "fail.toml",
        &CONVERGING.replace("[f]\nkind = \"constant\"\nvalue = 1.0\n", wavy),
    );
    let out = bin().arg("check-f").arg(&fail).output().unwrap();
    assert_eq!(code(&out), 1, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("fail"), "{}", stdout(&out));

    // A tabulated profile just below the admissibility crossing: the margin
    // lands inside the tabulation error band, so no verdict is possible.
    let m = 96usize;
    let pi = std::f64::consts::PI;
    let theta: Vec<String> = (0..=m)
        .map(|i| format!("{:.17e}", pi * i as f64 / m as f64))
        .collect();
    let values: Vec<String> = (0..=m)
        .map(|i| {
            let t = pi * i as f64 / m as f64;
            format!("{:.17e}", 1.0 + 0.2295 * (4.0 * t).cos())
        })
        .collect();
    let table = format!(
        "[f]\nkind = \"tabulated\"\ntheta = [{}]\nvalues = [{}]\n",
        theta.join(", "),
        values.join(", ")
    );
    let borderline = write(
        &dir,
        "borderline.toml",
        &CONVERGING
            .replace("[f]\nkind = \"constant\"\nvalue = 1.0\n", &table)
            .replace("eta_mode = \"fixed_one\"", ""),
    );
    let out = bin().arg("check-f").arg(&borderline).output().unwrap();
    assert_eq!(code(&out), 2, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("inconclusive"), "{}", stdout(&out));
}

#[test]
fn export_mesh_writes_an_obj_on_full_grids() {
    let dir = tmp();
    let config = write(
        &dir,
        "run.toml",
        &CONVERGING
            .replace(
                "kind = \"axisymmetric\"\nn_theta = 48",
                "kind = \"full_s2\"\nn_theta = 16\nn_phi = 32",
            )
            .replace("t_max = 50.0", "t_max = 0.02")
            .replace("mesh_path = \"profile.csv\"", "mesh_path = \"surface.obj\"")
            .replace("snapshot_every = 500", ""),
    );
    let out = bin()
        .arg("run")
        .arg(&config)
        .current_dir(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 3, "stderr: {}", stderr(&out));

    let out = bin()
        .arg("export-mesh")
        .arg(&config)
        .arg(dir.join("final.toml"))
        .arg(dir.join("exported.obj"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let obj = fs::read_to_string(dir.join("exported.obj")).unwrap();
    assert!(obj.lines().any(|l| l.starts_with("v ")), "no vertices");
    assert!(obj.lines().any(|l| l.starts_with("f ")), "no faces");
}

#[test]
fn operational_failures_exit_ten() {
    let dir = tmp();

    // Missing config file.
    let out = bin()
        .arg("run")
        .arg(dir.join("nope.toml"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 10);
    assert!(stderr(&out).starts_with("error:"), "{}", stderr(&out));

    // Misspelled key, reported by name.
    let typo = write(
        &dir,
        "typo.toml",
        &CONVERGING.replace("t_max = 50.0", "dt_safetyy = 0.2"),
    );
    let out = bin()
        .arg("run")
        .arg(&typo)
        .current_dir(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 10);
    assert!(stderr(&out).contains("dt_safetyy"), "{}", stderr(&out));

    // Missing state file for residual.
    let config = write(&dir, "run.toml", CONVERGING);
    let out = bin()
        .arg("residual")
        .arg(&config)
        .arg(dir.join("missing_state.toml"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 10);

    // Dimension mismatch between a saved state and the config.
    let out = bin()
        .arg("run")
        .arg(&config)
        .current_dir(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let five_d = write(
        &dir,
        "five_d.toml",
        &CONVERGING
            .replace(
                "n = 3\nk = 1\np = 6.0\nq = 6.0",
                "n = 5\nk = 2\np = 8.0\nq = 9.0",
            )
            .replace("n_theta = 48", "n_theta = 32"),
    );
    let out = bin()
        .arg("residual")
        .arg(&five_d)
        .arg(dir.join("final.toml"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 10);
    assert!(
        stderr(&out).contains("state grid lives on"),
        "{}",
        stderr(&out)
    );
}
