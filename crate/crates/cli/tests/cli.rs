//! End-to-end runs of the `platoon` binary on small scenarios.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_platoon");

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn vehicles(n: usize) -> Value {
    let all = [(8.0, 0.1, 1.0), (4.0, 0.2, 2.0), (1.0, 0.05, 3.0), (2.0, 0.15, 1.5)];
    Value::Array(
        all[..n]
            .iter()
            .map(|&(m, tau, sigma)| serde_json::json!({"mass_kg": m, "actuator_tau_s": tau, "zero_sigma_rad_s": sigma}))
            .collect(),
    )
}

/// A quick heterogeneous string: small basis, coarse grid, short run.
fn small(n: usize, theta_s: f64, phi_s: f64) -> Value {
    serde_json::json!({
        "platoon": {"n": n, "headway_s": 0.5, "vehicles": vehicles(n)},
        "design": {"basis_degree": 3, "grid_points": 60},
        "delays": {"theta_s": theta_s, "phi_s": phi_s},
        "simulation": {
            "dt_s": 0.01,
            "duration_s": 8.0,
            "u0": {"kind": "pulses", "pulses": [{"start_s": 0.5, "end_s": 2.0, "amplitude": 1.0}]},
            "disturbances": {"2": {"kind": "pulses", "pulses": [{"start_s": 4.0, "end_s": 4.5, "amplitude": 0.3}]}}
        }
    })
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    fs::write(dir.join(name), serde_json::to_string_pretty(v).unwrap()).unwrap();
    name.to_string()
}

fn synth(dir: &Path, scenario: &str, out: &str) {
    let r = run(dir, &["synth", scenario, "--out", out]);
    assert_eq!(r.code, 0, "synth failed: {}", r.stderr);
}

fn edit_controller(dir: &Path, from: &str, to: &str, f: impl FnOnce(&mut Value)) {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(dir.join(from)).unwrap()).unwrap();
    f(&mut v["controller"]);
    write(dir, to, &v);
}

fn failed_checks(r: &Run) -> Vec<String> {
    r.stdout.lines().filter(|l| l.starts_with("FAIL")).map(str::to_string).collect()
}

#[test]
fn malformed_input_exits_with_schema_code() {
    let tmp = TempDir::new().unwrap();
    let mut bad = small(2, 0.0, 0.0);
    bad["platoon"]["headway"] = Value::from(0.5);
    let name = write(tmp.path(), "bad.json", &bad);
    assert_eq!(run(tmp.path(), &["synth", &name]).code, 2);

    let mut count = small(2, 0.0, 0.0);
    count["platoon"]["n"] = Value::from(3);
    let name = write(tmp.path(), "count.json", &count);
    assert_eq!(run(tmp.path(), &["synth", &name]).code, 2);

    assert_eq!(run(tmp.path(), &["synth", "missing.json"]).code, 2);
    assert_eq!(run(tmp.path(), &["synth"]).code, 2);
    // One radio step is not a whole number of samples.
    let mut dt = small(2, 0.03, 0.1);
    dt["simulation"]["dt_s"] = Value::from(0.007);
    let name = write(tmp.path(), "dt.json", &dt);
    synth(tmp.path(), &name, "c.json");
    assert_eq!(run(tmp.path(), &["simulate", "c.json", &name]).code, 2);
}

#[test]
fn synth_verify_simulate_round_trip() {
    let tmp = TempDir::new().unwrap();
    let name = write(tmp.path(), "s.json", &small(3, 0.0, 0.0));
    synth(tmp.path(), &name, "c.json");
    let v = run(tmp.path(), &["verify", "c.json", &name]);
    assert_eq!(v.code, 0, "{}", v.stdout);
    assert_eq!(v.stdout.lines().filter(|l| l.starts_with("PASS")).count(), 9);

    let a = run(tmp.path(), &["simulate", "c.json", &name, "--out", "a"]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    let b = run(tmp.path(), &["simulate", "c.json", &name, "--out", "b"]);
    assert_eq!(b.code, 0);
    let csv = fs::read(tmp.path().join("a/trajectories.csv")).unwrap();
    assert_eq!(csv, fs::read(tmp.path().join("b/trajectories.csv")).unwrap());
    for panel in ["inputs.svg", "spacing_error.svg", "position.svg", "velocity.svg"] {
        let svg = fs::read_to_string(tmp.path().join("a").join(panel)).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"), "{panel}");
    }
    let header = String::from_utf8_lossy(&csv).lines().next().unwrap().to_string();
    assert!(header.starts_with("t,y_0,v_0,z_0,u_0,y_1"), "{header}");
    assert!(header.ends_with("w_1,w_2,w_3"), "{header}");
}

#[test]
fn perturbed_feedforward_fails_verification() {
    let tmp = TempDir::new().unwrap();
    let name = write(tmp.path(), "s.json", &small(3, 0.0, 0.0));
    synth(tmp.path(), &name, "c.json");
    edit_controller(tmp.path(), "c.json", "p.json", |c| {
        let num = &mut c["feedforward"][1]["num"][0];
        *num = Value::from(num.as_f64().unwrap() * 1.01);
    });
    let r = run(tmp.path(), &["verify", "p.json", &name]);
    assert_eq!(r.code, 1, "{}", r.stdout);
    assert!(failed_checks(&r).iter().any(|l| l.contains("Y_Q^-1 X_Q")), "{}", r.stdout);
}

#[test]
fn delays_without_compensation_break_the_structure() {
    let tmp = TempDir::new().unwrap();
    let name = write(tmp.path(), "d.json", &small(3, 0.03, 0.1));
    synth(tmp.path(), &name, "c.json");
    let ok = run(tmp.path(), &["verify", "c.json", &name]);
    assert_eq!(ok.code, 0, "{}", ok.stdout);

    edit_controller(tmp.path(), "c.json", "raw.json", |c| c["delays"] = Value::Null);
    let r = run(tmp.path(), &["verify", "raw.json", &name]);
    assert_eq!(r.code, 1);
    let failed = failed_checks(&r);
    assert!(failed.iter().any(|l| l.contains("(I + GK)^-1 diagonal")), "{}", r.stdout);
    assert!(failed.iter().any(|l| l.contains("leader-information subspace")), "{}", r.stdout);
}

#[test]
fn zero_inputs_give_flat_trajectories() {
    let tmp = TempDir::new().unwrap();
    let scenario = scenario_dir().join("zero_signal.json");
    let scenario = scenario.to_str().unwrap();
    let r = run(tmp.path(), &["synth", scenario, "--basis-degree", "3", "--grid-points", "60", "--out", "c.json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(run(tmp.path(), &["simulate", "c.json", scenario, "--out", "z"]).code, 0);
    let text = fs::read_to_string(tmp.path().join("z/trajectories.csv")).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        rows += 1;
        assert!(line.split(',').skip(1).all(|x| x.parse::<f64>().unwrap() == 0.0), "{line}");
    }
    assert_eq!(rows, 1001);
}

#[test]
fn unstable_loop_exits_with_divergence_code() {
    let tmp = TempDir::new().unwrap();
    let name = write(tmp.path(), "s.json", &small(2, 0.0, 0.0));
    synth(tmp.path(), &name, "c.json");
    edit_controller(tmp.path(), "c.json", "flip.json", |c| {
        for hk in c["local_hk"].as_array_mut().unwrap() {
            for x in hk["num"].as_array_mut().unwrap() {
                *x = Value::from(-40.0 * x.as_f64().unwrap());
            }
        }
    });
    let r = run(tmp.path(), &["simulate", "flip.json", &name, "--out", "o"]);
    assert_eq!(r.code, 4, "{}\n{}", r.stdout, r.stderr);
}

#[test]
fn identical_vehicles_get_identical_local_norms() {
    let tmp = TempDir::new().unwrap();
    let scenario = scenario_dir().join("homogeneous.json");
    let scenario = scenario.to_str().unwrap();
    let r = run(tmp.path(), &["synth", scenario, "--norm", "hinf", "--basis-degree", "3", "--grid-points", "60"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let norms: Vec<&str> = r
        .stdout
        .lines()
        .filter(|l| l.contains("local H∞ norm"))
        .map(|l| l.split("local H∞ norm ").nth(1).unwrap())
        .collect();
    assert_eq!(norms.len(), 3);
    assert!(norms.iter().all(|n| *n == norms[0]), "{norms:?}");

    let r = run(tmp.path(), &["synth", scenario, "--basis-degree", "3", "--grid-points", "60", "--out", "h2.json"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("identical-vehicle bound"), "{}", r.stdout);
    assert!(r.stdout.contains("local parameters agree across vehicles to 0.000e0"), "{}", r.stdout);
}
