use std::fs;

use hadaflow::harness::{run_experiment, ExperimentConfig};
use serde_json::Value;

fn config(dir: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig {
        iterations: 2_000,
        log_points: 20,
        seeds: vec![0, 1],
        output_dir: dir.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

#[test]
fn long_run_logs_exactly_the_scheduled_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        iterations: 1_000_000,
        log_points: 100,
        seeds: vec![42],
        arms: vec!["ode".into(), "logit-ode".into(), "mse-reference".into()],
        ..config(dir.path())
    };
    let out = run_experiment(&cfg).unwrap();
    for cell in &out.cells {
        let traj = cell.result.as_ref().unwrap();
        assert_eq!(traj.rows.len(), 100, "{}", cell.arm);
        assert_eq!(traj.rows.first().unwrap().iter, 1);
        assert_eq!(traj.rows.last().unwrap().iter, 1_000_000);
    }
    let csv = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 100);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&config(a.path())).unwrap();
    run_experiment(&config(b.path())).unwrap();
    let csv_a = fs::read(a.path().join("runs.csv")).unwrap();
    let csv_b = fs::read(b.path().join("runs.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    for stem in ["loss", "kl", "alignment", "singular_values", "normalized_singular_values", "residual_energy"] {
        let file = format!("{stem}.svg");
        assert_eq!(fs::read(a.path().join(&file)).unwrap(), fs::read(b.path().join(&file)).unwrap());
    }
}

#[test]
fn failing_arm_does_not_sink_the_others() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        lr: 500.0,
        ..config(dir.path())
    };
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.summary.failed_arms(), vec!["random"]);
    for (name, arm) in &out.summary.arms {
        if name == "random" {
            assert_eq!(arm.status, "failed");
            assert!(arm.failures.iter().all(|f| f.error.contains("non-finite")), "{:?}", arm.failures);
        } else {
            assert_eq!(arm.status, "ok", "{name}");
        }
    }
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn summary_json_layout() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&config(dir.path())).unwrap();
    let json: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["k"], 4);
    let arms = json["arms"].as_object().unwrap();
    assert_eq!(arms.len(), 5);
    for (name, arm) in arms {
        assert_eq!(arm["status"], "ok", "{name}");
        assert_eq!(arm["seeds"].as_array().unwrap().len(), 2);
        let loss = arm["series"]["loss"].as_array().unwrap();
        assert_eq!(loss.len(), 20);
        assert!(loss[0]["stderr"].is_number());
        assert!(arm["final_values"]["M"].is_number());
        assert_eq!(arm["monotonicity"]["loss"]["verdict"], "monotone", "{name}");
    }
}
