use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn ahflow() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ahflow"));
    c.env_remove("AHFLOW_THREADS");
    c
}

/// Writes `config` into `dir`, pointing its output at `dir/out`.
fn write_config(dir: &Path, mut config: Value) -> PathBuf {
    config["output"] = serde_json::json!({ "dir": dir.join("out") });
    let name = config["name"].as_str().unwrap().to_string();
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

fn run(dir: &Path, config: Value) -> Output {
    let path = write_config(dir, config);
    ahflow().arg("run").arg(path).output().unwrap()
}

fn summary(dir: &Path, name: &str) -> Value {
    let text = std::fs::read_to_string(dir.join("out").join(format!("{name}.summary.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn schema_is_valid_json_and_names_the_tasks() {
    let o = ahflow().arg("schema").output().unwrap();
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let text = v.to_string();
    for task in ["verify-expansions", "flow-pde", "convergence-study"] {
        assert!(text.contains(task), "schema lacks {task}");
    }
}

#[test]
fn unknown_key_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        serde_json::json!({ "name": "u", "task": "ch-mass", "parameters": { "n": 3, "colour": 1 } }),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn dimension_two_is_rejected_before_any_computation() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        serde_json::json!({ "name": "d", "task": "geon-mass", "parameters": { "n": 2 } }),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n = 2"));
}

#[test]
fn malformed_json_and_missing_file_are_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{ \"name\": ").unwrap();
    let o = ahflow().arg("run").arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = ahflow().arg("run").arg(dir.path().join("absent.json")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oversized_time_step_is_a_numerical_abort() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        serde_json::json!({
            "name": "unstable", "task": "flow-pde",
            "parameters": { "n": 3, "grid": { "points": 51 }, "courant": 1.0, "t_end": 0.1 }
        }),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("instability"));
}

#[test]
fn failed_check_exits_one_and_names_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        serde_json::json!({ "name": "tight", "task": "geon-mass", "parameters": { "n": 3, "tolerance": 1e-14 } }),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("extrapolated flux mass"));
    assert_eq!(summary(dir.path(), "tight")["status"], "fail");
}

#[test]
fn expansion_identities_are_exact_in_dimension_four() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        serde_json::json!({
            "name": "exp4", "task": "verify-expansions", "seed": 2,
            "parameters": { "n": 4, "kappa": { "random": { "count": 3 } } }
        }),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(dir.path(), "exp4");
    let entries = s["results"]["entries"].as_array().unwrap();
    assert!(!entries.is_empty());
    let mut pairs = std::collections::BTreeSet::new();
    for e in entries {
        assert_eq!(e["residual"], "0");
        assert!(pairs.insert((e["m"].as_u64().unwrap(), e["identity"].to_string())));
    }
    let ms: std::collections::BTreeSet<u64> = pairs.iter().map(|p| p.0).collect();
    assert_eq!(ms, (1..=4).collect());
}

#[test]
fn sphere_expansions_and_gauge_identities_pass() {
    let dir = tempfile::tempdir().unwrap();
    for (name, task) in [("se", "verify-expansions"), ("sd", "verify-deturck")] {
        let o = run(
            dir.path(),
            serde_json::json!({
                "name": name, "task": task, "seed": 9,
                "parameters": { "n": 3, "k": 1, "kappa": { "random": { "count": 2 } }, "w": { "random": { "count": 2 } } }
            }),
        );
        assert_eq!(o.status.code(), Some(0), "{task}: {}", stderr(&o));
    }
}

#[test]
fn geon_mass_in_dimension_three_is_minus_eight_pi_squared_over_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        serde_json::json!({ "name": "geon3", "task": "geon-mass", "parameters": { "n": 3, "moduli": ["2pi"] } }),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = &summary(dir.path(), "geon3")["results"];
    assert_eq!(r["wang_mass_exact"], "(-8/3)*pi^2");
    let target = -8.0 * std::f64::consts::PI.powi(2) / 3.0;
    assert!((r["wang_mass"].as_f64().unwrap() - target).abs() < 1e-12);
}

#[test]
fn zero_coefficients_give_an_all_zero_series() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        serde_json::json!({
            "name": "zero", "task": "kappa-ode",
            "parameters": { "n": 3, "m": 3, "samples": 4, "kappa": { "blocks": { "radial": "0", "boundary": ["0", "0"] } } }
        }),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/zero.kappa.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("t,sample,"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert!(r.split(',').skip(2).all(|c| c.parse::<f64>().unwrap() == 0.0));
    }
    let checks = summary(dir.path(), "zero")["checks"].to_string();
    assert!(checks.contains("exactly zero"));
}

#[test]
fn empty_time_series_gives_a_header_only_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        serde_json::json!({ "name": "empty", "task": "kappa-ode", "parameters": { "n": 3, "samples": 0 } }),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/empty.kappa.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.ends_with('\n'));
}

#[test]
fn same_seed_gives_byte_identical_reports() {
    let config = serde_json::json!({
        "name": "det", "task": "verify-deturck", "seed": 42,
        "parameters": { "n": 3, "kappa": { "random": { "count": 3 } }, "w": { "random": { "count": 3 } } }
    });
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(a.path(), config.clone()).status.code(), Some(0));
    let o = {
        let path = write_config(b.path(), config);
        ahflow().env("AHFLOW_THREADS", "1").arg("run").arg(path).output().unwrap()
    };
    assert_eq!(o.status.code(), Some(0));
    for file in ["det.summary.json", "det.identities.csv"] {
        let x = std::fs::read(a.path().join("out").join(file)).unwrap();
        let y = std::fs::read(b.path().join("out").join(file)).unwrap();
        assert_eq!(x, y, "{file} differs");
    }
}

#[test]
fn flow_table_has_the_documented_columns_and_reference_curve() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        serde_json::json!({
            "name": "flow", "task": "flow-pde",
            "parameters": {
                "n": 3, "grid": { "points": 61 }, "t_end": 0.01, "samples": 2,
                "tolerance": 10.0
            }
        }),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/flow.flow.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "t,mass_fitted,mass_predicted,max_abs_E,min_R_plus_n_n_minus_1,fit_condition_number"
    );
    assert_eq!(csv.lines().count(), 4);
    let r = &summary(dir.path(), "flow")["results"];
    let m0 = r["m0"].as_f64().unwrap();
    for p in r["curve"].as_array().unwrap() {
        let t = p["t"].as_f64().unwrap();
        let predicted = p["mass_predicted"].as_f64().unwrap();
        assert!((predicted - m0 * (-t).exp()).abs() <= 1e-12 * m0.abs());
    }
}

#[test]
fn hyperbolic_refinement_reports_saturation() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        serde_json::json!({
            "name": "hyp", "task": "convergence-study",
            "parameters": { "n": 3, "background": { "hyperbolic": { "x_max": 1.0 } }, "grid": { "points": 31 } }
        }),
    );
    let o = ahflow().args(["converge", "--levels", "3"]).arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/hyp.converge.orders.csv")).unwrap();
    assert_eq!(csv.matches("saturated").count(), 2);
}

#[test]
fn refinement_needs_a_grid_based_task() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        serde_json::json!({ "name": "nogrid", "task": "kappa-ode", "parameters": { "n": 3 } }),
    );
    let o = ahflow().args(["converge", "--levels", "2"]).arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        serde_json::json!({ "name": "th", "task": "kappa-ode", "parameters": { "n": 3 } }),
    );
    for bad in ["0", "many"] {
        let o = ahflow().env("AHFLOW_THREADS", bad).arg("run").arg(&path).output().unwrap();
        assert_eq!(o.status.code(), Some(2), "AHFLOW_THREADS={bad}");
    }
}

#[test]
fn unwritable_output_directory_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "not a directory").unwrap();
    let config = serde_json::json!({
        "name": "blocked", "task": "kappa-ode", "parameters": { "n": 3 },
        "output": { "dir": blocker.join("sub") }
    });
    let path = dir.path().join("blocked.json");
    std::fs::write(&path, config.to_string()).unwrap();
    let o = ahflow().arg("run").arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot write output"));
}
