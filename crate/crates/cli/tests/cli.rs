use std::fs;
use std::process::{Command, Output};

fn hetnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn simulate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = hetnet(&[
        "simulate",
        "--num_vues",
        "8",
        "--num-rsus=2",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.toml", "scenario.json", "trace.csv", "timings.csv", "report.csv", "events.csv", "power.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,utility,eta,omega,association_changes,status\n"));
    let cfg = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(cfg.contains("num_vues = 8"));
    assert!(cfg.contains("seed = 5"));
}

#[test]
fn simulate_trace_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut traces = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = hetnet(&["simulate", "--override", "num_vues=10", "--override", "num_rsus=3", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        traces.push(fs::read(out.join("trace.csv")).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, "num_vues = 6\nnum_rsus = 2\nseed = 1\n").unwrap();
    let o = hetnet(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("utility"));

    fs::write(&path, "num_vues = 6\nunknown_field = 2\n").unwrap();
    assert_eq!(code(&hetnet(&["simulate", "--config", path.to_str().unwrap()])), 4);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&hetnet(&["simulate", "--override", "num_vues=0"])), 4);
    assert_eq!(code(&hetnet(&["simulate", "--override", "no_such_field=1"])), 4);
    assert_eq!(code(&hetnet(&["experiment", "--preset", "fig1", "--out", "unused"])), 4);
    let infeasible = hetnet(&["simulate", "--num_vues", "5", "--num_rsus", "2", "--qos_rate", "1e9"]);
    assert_eq!(code(&infeasible), 2);
}

#[test]
fn experiment_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig9");
    let o = hetnet(&[
        "experiment",
        "--preset",
        "fig9",
        "--reps",
        "1",
        "--svg",
        "--num_vues",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(lines.next(), Some("scheme,param,seed,utility,status"));
    // 5 PSD values x 2 schemes x 1 seed.
    assert_eq!(lines.count(), 10);
    assert!(fs::read_to_string(out.join("timings.csv")).unwrap().starts_with("scheme,param,seed,runtime_s\n"));
    assert!(fs::read_to_string(out.join("plot.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn validate_bandwidth_passes() {
    let o = hetnet(&["validate", "--oracle", "bandwidth", "--seeds", "5"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("5/5 within tolerance (pass)"));
}
