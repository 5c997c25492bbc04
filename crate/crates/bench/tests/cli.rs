use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(args)
        .output()
        .expect("bench binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_SINGLE: &str = r#"{
    "experiment": "single",
    "planners": [{"type": "mpt"}, {"type": "cem-reuse"}],
    "search": {"iterations": 40},
    "cem": {"elite_frac": 0.25},
    "episode": {"steps": 12}
}"#;

#[test]
fn single_run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "single.json", SMALL_SINGLE);
    let out = dir.path().join("out");
    let result = bench(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    for planner in ["mpt", "cem-reuse"] {
        for suffix in ["steps.csv", "trajectory.csv", "summary.json"] {
            assert!(out.join(format!("{planner}_{suffix}")).is_file(), "{planner}_{suffix}");
        }
    }
    let trajectory = fs::read_to_string(out.join("mpt_trajectory.csv")).unwrap();
    let mut lines = trajectory.lines();
    assert_eq!(lines.next().unwrap(), "k,x,y,theta,x_o,y_o,V,delta,reward,contact_flag");
    assert_eq!(lines.count(), 12);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("mpt_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["steps"], 12);
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 16);
}

#[test]
fn seed_flag_controls_the_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "single.json", SMALL_SINGLE);
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let r = bench(&["run", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(r.status.success());
        fs::read(out.join("mpt_steps.csv")).unwrap()
    };
    assert_eq!(run("3", "a"), run("3", "b"));
    assert_ne!(run("3", "a"), run("4", "c"));
}

#[test]
fn grid_run_reuses_finished_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "grid.json",
        r#"{"experiment": "grid", "planners": [{"type": "uct"}], "search": {"iterations": 20},
            "grid": {"resolution": 2, "seeds_per_cell": 2}, "episode": {"steps": 8}}"#,
    );
    let out = dir.path().join("grid");
    let args = ["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "2"];
    assert!(bench(&args).status.success());
    let csv = fs::read(out.join("grid.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&csv).lines().count(), 5);
    assert_eq!(fs::read_dir(out.join("cells")).unwrap().count(), 4);

    // a cached cell is picked up instead of recomputed
    let cell = out.join("cells").join("uct_0_0.json");
    let mut cached: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cell).unwrap()).unwrap();
    cached["values"] = serde_json::json!([1.0, 3.0]);
    fs::write(&cell, cached.to_string()).unwrap();
    assert!(bench(&args).status.success());
    let rerun = fs::read_to_string(out.join("grid.csv")).unwrap();
    assert!(rerun.lines().any(|l| l.starts_with("uct,-2.5,-2,2,")), "{rerun}");
}

#[test]
fn mismatched_budget_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    // 45 rollouts cannot be split into 10 equal CEM iterations
    let cfg = write_config(
        dir.path(),
        "sweep.json",
        r#"{"experiment": "sweep", "planners": [{"type": "cem"}], "cem": {"elite_frac": 0.25},
            "sweep": {"l_values": [40, 45], "trials": 1}, "episode": {"steps": 5}}"#,
    );
    let out = dir.path().join("sweep");
    let result = bench(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
    let rows = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(rows.lines().any(|l| l.starts_with("cem,40,") && l.ends_with(",0")));
    assert!(rows.lines().any(|l| l.starts_with("cem,45,") && l.ends_with(",1")));
}

#[test]
fn bad_configs_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "unknown.json", r#"{"experiment": "single", "planners": [{"type": "mpt"}], "serch": {}}"#);
    let gamma = write_config(dir.path(), "gamma.json", r#"{"experiment": "single", "planners": [{"type": "mpt"}], "search": {"gamma": 1.0}}"#);
    for cfg in [unknown.as_str(), gamma.as_str(), "/nonexistent/config.json"] {
        let result = bench(&["run", "--config", cfg]);
        assert_eq!(result.status.code(), Some(1), "{cfg}");
        assert!(String::from_utf8_lossy(&result.stderr).starts_with("error:"));
    }
}

#[test]
fn bounds_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bounds.json",
        r#"{"experiment": "bounds", "bounds": {"depths": [10], "etas": [0.0, 0.01], "eps": [0.0, 0.05],
            "alpha": 0.5, "m_lower": 1.0, "m_upper": 1.0}}"#,
    );
    let out = dir.path().join("bounds");
    let result = bench(&["bounds", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(result.status.success());
    let table = fs::read_to_string(out.join("bounds.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "K,eta,eps,alpha,bound");
    assert!(rows.contains(&"10,0,0,0.5,0"));
    assert!(rows.contains(&"10,0.01,0.05,0.5,0.32"));
}
