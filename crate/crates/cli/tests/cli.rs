use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const ELLIPSOID: &str = "schema = 1\n[shape]\naxes = [1.0, 0.8, 0.6]\n";
const SPHERE: &str = "schema = 1\n[shape]\npreset = \"sphere\"\n";
const FIVE: &str = "[movements]\nkind = \"rigid-shell\"\ncount = 5\n";

fn translation_target(axis: usize, length: f64, tol: f64) -> String {
    let mut p = [0.0; 3];
    p[axis] = length;
    format!(
        "[target]\ntolerance = {tol:e}\nwaypoints = [\n  {{ t = 0.0, quaternion = [1.0, 0.0, 0.0, 0.0], position = [0.0, 0.0, 0.0] }},\n  {{ t = 1.0, quaternion = [1.0, 0.0, 0.0, 0.0], position = [{:?}, {:?}, {:?}] }},\n]\n",
        p[0], p[1], p[2]
    )
}

struct Run {
    dir: tempfile::TempDir,
}

impl Run {
    fn new(scenario: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("scenario.toml"), scenario).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn exec(&self, cmd: &str, out: &str, extra: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_swimmer"))
            .arg(cmd)
            .arg("--scenario")
            .arg(self.path("scenario.toml"))
            .arg("--out")
            .arg(self.path(out))
            .args(extra)
            .output()
            .unwrap()
    }

    fn json(&self, out: &str, name: &str) -> Value {
        read_json(&self.path(out).join(name))
    }
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn negative_axis_is_rejected_with_field_name() {
    let run = Run::new("schema = 1\n[shape]\naxes = [-1.0, 1.0, 1.0]\n");
    let o = run.exec("addedmass", "out", &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("shape.axes[0]"));
}

#[test]
fn unknown_key_is_a_parse_error() {
    let run = Run::new("schema = 1\n[shape]\naxes = [1.0, 1.0, 1.0]\nshade = 2\n");
    assert_eq!(code(&run.exec("addedmass", "out", &[])), 2);
}

#[test]
fn missing_scenario_file_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_swimmer")).args(["rank", "--scenario", "/nonexistent/x.toml"]).output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn sphere_added_mass_has_three_null_directions() {
    let run = Run::new(SPHERE);
    let o = run.exec("addedmass", "out", &["--refinement", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = run.json("out", "addedmass.json");
    assert_eq!(r["near_zero_eigenvalues"], 3);
    assert_eq!(r["bem"].as_array().unwrap().len(), 6);
}

#[test]
fn ellipsoid_added_mass_matches_oracle() {
    let run = Run::new(ELLIPSOID);
    assert_eq!(code(&run.exec("addedmass", "out", &[])), 0);
    let r = run.json("out", "addedmass.json");
    assert!(f(&r["max_translational_relative_error"]) < 0.02);
    assert!(f(&r["min_eigenvalue"]) > 0.0);
    assert_eq!(r["near_zero_eigenvalues"], 0);
}

#[test]
fn zero_controls_keep_the_state() {
    let run = Run::new(&format!("{ELLIPSOID}{FIVE}[controls]\nduration = 0.5\nsegments = [{{ start = 0.0, end = 0.5, values = [0.0, 0.0, 0.0, 0.0, 0.0] }}]\n"));
    assert_eq!(code(&run.exec("simulate", "out", &["--step", "0.05"])), 0);
    let csv = fs::read_to_string(run.path("out").join("trajectory.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).map(|l| l.split_once(',').unwrap().1).collect();
    assert!(rows.len() > 2);
    assert!(rows.iter().all(|r| *r == rows[0]));
    let s = run.json("out", "summary.json");
    assert_eq!(s["returns_to_start"], true);
}

#[test]
fn cyclic_single_field_returns() {
    let run = Run::new(&format!(
        "{ELLIPSOID}{FIVE}[controls]\nduration = 1.0\nsegments = [\n  {{ start = 0.0, end = 0.5, values = [0.0, 0.0, 0.06, 0.0, 0.0] }},\n  {{ start = 0.5, end = 1.0, values = [0.0, 0.0, -0.06, 0.0, 0.0] }},\n]\n"
    ));
    assert_eq!(code(&run.exec("simulate", "out", &[])), 0);
    let s = run.json("out", "summary.json");
    assert!(f(&s["return_distance"]) < 1e-8);
    assert_eq!(s["returns_to_start"], true);
}

#[test]
fn five_field_waveforms_move_the_body() {
    let waves: String = (0..5)
        .map(|i| format!("  {{ field = {i}, amplitude = 0.2, frequency = {}.0, phase = {}.0 }},\n", i + 1, i))
        .collect();
    let run = Run::new(&format!("{ELLIPSOID}{FIVE}[controls]\nduration = 0.75\nwaveforms = [\n{waves}]\n"));
    assert_eq!(code(&run.exec("simulate", "out", &[])), 0);
    let s = run.json("out", "summary.json");
    assert!(f(&s["net_rotation_angle"]) > 1e-6);
    assert!(f(&s["net_translation"]) > 1e-6);
    assert!(f(&s["impulse_residual_max"]) < 1e-10);
    assert!(f(&s["so3_drift_max"]) < 1e-10);
}

#[test]
fn rank_certificates() {
    let run = Run::new(&format!("{ELLIPSOID}{FIVE}"));
    assert_eq!(code(&run.exec("rank", "out", &[])), 0);
    let r = run.json("out", "rank.json");
    assert_eq!(r["rank"], 11);
    assert_eq!(r["controllable"], true);
    assert_eq!(r["condition"]["factors"].as_array().unwrap().len(), 3);

    let run = Run::new(&format!("{SPHERE}{FIVE}"));
    assert_eq!(code(&run.exec("rank", "out", &[])), 0);
    let r = run.json("out", "rank.json");
    assert_eq!(r["controllable"], false);
    assert!(r["rank"].as_u64().unwrap() < 11);

    let run = Run::new(&format!("{ELLIPSOID}[movements]\nkind = \"rigid-shell\"\ncount = 1\n"));
    assert_eq!(code(&run.exec("rank", "out", &[])), 0);
    let r = run.json("out", "rank.json");
    assert_eq!(r["rank"], 1);
    assert_eq!(r["controllable"], false);
}

#[test]
fn stationary_target_needs_no_control() {
    let run = Run::new(&format!("{ELLIPSOID}{FIVE}{}", translation_target(0, 0.0, 1e-2)));
    assert_eq!(code(&run.exec("plan", "out", &[])), 0);
    let p = run.json("out", "plan.json");
    assert_eq!(f(&p["sup_error"]), 0.0);
    let csv = fs::read_to_string(run.path("out").join("schedule.csv")).unwrap();
    for line in csv.lines().skip(1) {
        assert!(line.split(',').skip(2).all(|v| v.parse::<f64>().unwrap() == 0.0));
    }
}

#[test]
fn sphere_plan_is_not_controllable() {
    let run = Run::new(&format!("{SPHERE}{FIVE}{}", translation_target(2, 0.05, 1e-2)));
    assert_eq!(code(&run.exec("plan", "out", &[])), 4);
}

#[test]
fn outputs_are_deterministic() {
    let run = Run::new(&format!(
        "schema = 1\nseed = 11\n[shape]\naxes = [1.0, 0.8, 0.6]\n{FIVE}[controls]\nduration = 0.5\nwaveforms = [{{ field = 1, amplitude = 0.2, frequency = 2.0 }}, {{ field = 3, amplitude = 0.1, frequency = 1.0 }}]\n"
    ));
    for out in ["a", "b"] {
        assert_eq!(code(&run.exec("simulate", out, &[])), 0);
        assert_eq!(code(&run.exec("rank", out, &[])), 0);
    }
    for name in ["trajectory.csv", "summary.json", "rank.json"] {
        assert_eq!(fs::read(run.path("a").join(name)).unwrap(), fs::read(run.path("b").join(name)).unwrap(), "{name}");
    }
}

#[test]
fn planned_translation_round_trips_through_simulate() {
    let target = translation_target(2, 0.05, 1e-2);
    let run = Run::new(&format!("{ELLIPSOID}{FIVE}{target}"));
    let o = run.exec("plan", "out", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let p = run.json("out", "plan.json");
    assert_eq!(p["met"], true);
    assert!(f(&p["sup_error"]) < 1e-2);
    assert!(f(&p["endpoint_error"]) < 1e-3);

    fs::write(
        run.path("replay.toml"),
        format!("{ELLIPSOID}{FIVE}[controls]\nfile = \"out/schedule.csv\"\n{target}"),
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_swimmer"))
        .arg("simulate")
        .arg("--scenario")
        .arg(run.path("replay.toml"))
        .arg("--out")
        .arg(run.path("replay"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = run.json("replay", "summary.json");
    assert!((f(&s["tracking"]["sup_error"]) - f(&p["sup_error"])).abs() < 1e-12);
    assert!((f(&s["tracking"]["endpoint_error"]) - f(&p["endpoint_error"])).abs() < 1e-12);
}
