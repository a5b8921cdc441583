use std::path::Path;
use std::process::{Command, Output};

use isotrack::fields::{GridField, Position2};
use isotrack::harness::{load_trajectory_csv, CSV_COLUMNS};

const LINEAR_PI: &str = r#"
name = "linear"
vehicle = "dubins"
v = 0.5
s_d = 20.0
duration = 20.0

[gains]
c1 = 10.0
c2 = 1.0
c3 = 0.3
c4 = 1.0

[field]
kind = "linear-radial"
level = 20.0
slope = 1.0
radius = 4.0
source = { x = 0.0, y = 0.0 }

[[initial]]
x = 8.0
y = 0.0
theta = 1.5707963267948966

[[initial]]
x = 0.0
y = 6.0
theta = 0.0
"#;

fn isotrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isotrack")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_parseable_csvs_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "s.toml", LINEAR_PI);
    let out = dir.path().join("out");
    let o = isotrack(&["run", &scenario, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for k in 0..2 {
        let path = out.join(format!("linear_{k}.csv"));
        let header = std::fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
        assert_eq!(header, CSV_COLUMNS.join(","));
        let records = load_trajectory_csv(&path).unwrap();
        assert_eq!(records.len(), 2001);
        assert!(records.iter().all(|r| r.zeta.is_none() && r.sigma.is_some()));
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("linear_report.json")).unwrap()).unwrap();
    assert_eq!(report["runs"].as_array().unwrap().len(), 2);
    assert!(report["equilibrium"]["omega_c"].as_f64().unwrap() < 0.0);
}

#[test]
fn dt_and_mode_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "s.toml", LINEAR_PI);
    let out = dir.path().join("out");
    let o = isotrack(&["run", &scenario, "--out", out.to_str().unwrap(), "--dt", "0.05", "--mode", "oracle"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let records = load_trajectory_csv(&out.join("linear_0.csv")).unwrap();
    assert_eq!(records.len(), 401);
    assert_ne!(records[0].sdot, 0.0);
}

#[test]
fn malformed_scenario_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "bad.toml", &LINEAR_PI.replace("c4 = 1.0", "c4 = 1.0\nc7 = 1.0"));
    let o = isotrack(&["run", &scenario, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("c7"), "{}", stderr(&o));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn divergence_exits_2_with_step_index() {
    let dir = tempfile::tempdir().unwrap();
    let text = LINEAR_PI
        .replace("vehicle = \"dubins\"", "vehicle = \"double-integrator\"")
        .replace("c1 = 10.0", "c1 = 1e300")
        .replace("c2 = 1.0", "c2 = 1e300\nc5 = 0.1");
    let scenario = write(dir.path(), "div.toml", &text);
    let o = isotrack(&["run", &scenario, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("step"), "{}", stderr(&o));
}

#[test]
fn analyze_reports_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "s.toml", LINEAR_PI);
    let o = isotrack(&["analyze", &scenario]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("equilibrium.omega_c = -0.125"), "{text}");
    assert!(text.contains("stability.pi_conditions_ok = true"));

    let bad = write(dir.path(), "c3.toml", &LINEAR_PI.replace("c3 = 0.3", "c3 = 0.6"));
    let o = isotrack(&["analyze", &bad]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("analysis.conditions_ok = false"));
}

#[test]
fn analyze_grid_needs_bounds_region() {
    let dir = tempfile::tempdir().unwrap();
    let grid = GridField::from_fn(Position2::new(-10.0, -10.0), 0.5, 0.5, 41, 41, |x, y| 30.0 - x.hypot(y)).unwrap();
    write(dir.path(), "field.csv", &grid.to_file_string());
    let fields = LINEAR_PI.find("[field]").unwrap();
    let initial = LINEAR_PI.find("[[initial]]").unwrap();
    let text = format!(
        "{}[field]\nkind = \"grid\"\npath = \"field.csv\"\n\n{}",
        &LINEAR_PI[..fields],
        &LINEAR_PI[initial..]
    );
    let scenario = write(dir.path(), "grid.toml", &text);
    let o = isotrack(&["analyze", &scenario]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bounds"), "{}", stderr(&o));

    let with_bounds = write(dir.path(), "grid_b.toml", &format!("{text}\n[bounds]\nregion = [2.0, 2.0, 8.0, 8.0]\n"));
    let o = isotrack(&["analyze", &with_bounds]);
    assert!(matches!(o.status.code(), Some(0) | Some(3)), "{}", stderr(&o));
    assert!(stdout(&o).contains("bounds.gamma1"));
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{LINEAR_PI}\n[sweep]\nparameter = \"c1\"\nvalues = [1.0, 5.0, 10.0, 30.0, 50.0]\n");
    let scenario = write(dir.path(), "s.toml", &text);
    let out = dir.path().join("out");
    let o = isotrack(&["sweep", &scenario, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("linear_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("c1,steady_state_error"));
}

#[test]
fn reproduce_unknown_study_is_a_usage_error() {
    let o = isotrack(&["reproduce", "fig9"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reproduce_double_int_speed_reports_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let o = isotrack(&["reproduce", "double-int-speed", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("predicted T = 5.0000"), "{}", stdout(&o));
    assert!(dir.path().join("double_int_speed.csv").exists());
}

#[test]
fn reproduce_fig6_gain_sweep_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = isotrack(&["reproduce", "fig6-gain-sweep", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let table = std::fs::read_to_string(dir.path().join("fig6_sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 7);
}

#[test]
fn shipped_scenarios_analyze() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for (name, code) in [("circular_pi.toml", 0), ("gaussian_double.toml", 3)] {
        let o = isotrack(&["analyze", dir.join(name).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(code), "{name}: {}", stderr(&o));
    }
}
