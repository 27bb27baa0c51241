//! End-to-end runs of the binary: exit codes, output layout, report round trip.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use blobot::config::{presets, ExperimentConfig};

fn blobot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blobot"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, cfg: &ExperimentConfig) -> String {
    let p = dir.join(name);
    fs::write(&p, cfg.to_json()).unwrap();
    p.to_str().unwrap().to_string()
}

fn short(mut cfg: ExperimentConfig, steps: usize) -> ExperimentConfig {
    cfg.optimizer.max_steps = steps;
    cfg
}

#[test]
fn run_writes_outputs_and_reproduces_from_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &short(presets::comparison(), 100));
    let a = dir.path().join("a");
    let out = blobot(&["run", &cfg, "--out", a.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let traj = fs::read_to_string(a.join("trajectories.csv")).unwrap();
    let lines: Vec<&str> = traj.lines().collect();
    assert_eq!(lines[0], "particle_index,knot_index,t,coord_0,coord_1");
    assert_eq!(lines.len(), 30 * 3 + 1);
    let loss = fs::read_to_string(a.join("loss.csv")).unwrap();
    assert!(loss.starts_with("iter,total,kinetic_or_cc,potential,nonlocal,lr\n"));
    assert_eq!(loss.lines().count(), 101 + 1);
    // 17 significant digits
    let field = lines[1].split(',').nth(3).unwrap();
    assert_eq!(
        field
            .split('e')
            .next()
            .unwrap()
            .replace(['.', '-'], "")
            .len(),
        17
    );

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    for key in [
        "config",
        "initial",
        "final",
        "metrics",
        "wall_time_s",
        "rng_algorithm",
    ] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert!(report["config"]["delta"].is_number());
    assert!(report["metrics"]["assignment_mean_cost"].is_number());

    let b = dir.path().join("b");
    let out = blobot(&[
        "run",
        a.join("report.json").to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--threads",
        "3",
    ]);
    assert!(out.status.success());
    for f in ["trajectories.csv", "loss.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn acceleration_output_has_velocity_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &short(presets::acceleration(), 10));
    let out_dir = dir.path().join("o");
    assert!(blobot(&["run", &cfg, "--out", out_dir.to_str().unwrap()])
        .status
        .success());
    let traj = fs::read_to_string(out_dir.join("trajectories.csv")).unwrap();
    assert!(traj.starts_with("particle_index,knot_index,t,coord_0,vel_0\n"));
    assert_eq!(traj.lines().count(), 10 * 11 + 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"experiment": "comparison", "n_particles": 0}"#).unwrap();
    assert_eq!(
        blobot(&["run", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(
        blobot(&["run", "/nonexistent/config.json"]).status.code(),
        Some(2)
    );

    let mut cfg = short(presets::comparison(), 5);
    cfg.delta = Some(-1.0);
    cfg.delta_rule = None;
    let p = write_config(dir.path(), "neg.json", &cfg);
    assert_eq!(
        blobot(&["run", &p, "--out", dir.path().join("x").to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    // the first step overflows
    let mut cfg = short(presets::comparison(), 10_000);
    cfg.optimizer.alpha = Some(1e300);
    cfg.optimizer.alpha_rule = None;
    let p = write_config(dir.path(), "div.json", &cfg);
    let o = dir.path().join("div");
    let out = blobot(&["run", &p, "--out", o.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(o.join("report.json")).unwrap()).unwrap();
    assert!(report["failure"].is_string());
}

#[test]
fn existing_outputs_need_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &short(presets::comparison(), 2));
    let o = dir.path().join("o");
    let o = o.to_str().unwrap();
    assert!(blobot(&["run", &cfg, "--out", o]).status.success());
    assert_eq!(blobot(&["run", &cfg, "--out", o]).status.code(), Some(2));
    assert!(blobot(&["run", &cfg, "--out", o, "--overwrite"])
        .status
        .success());
}

#[test]
fn landscape_and_gradcheck() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = presets::landscape(0.5, None);
    cfg.landscape.as_mut().unwrap().grid_size = 11;
    let p = write_config(dir.path(), "l.json", &cfg);
    let o = dir.path().join("l");
    assert!(blobot(&["landscape", &p, "--out", o.to_str().unwrap()])
        .status
        .success());
    let csv = fs::read_to_string(o.join("landscape.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11 * 11 + 1);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(o.join("report.json")).unwrap()).unwrap();
    // the source configuration costs nothing to reach; the flipped one costs more than the target
    assert_eq!(report["source"]["energies"]["control"], 0.0);
    assert!(
        report["flipped"]["energies"]["total"].as_f64()
            > report["target"]["energies"]["total"].as_f64()
    );

    let g = dir.path().join("g");
    let out = blobot(&["gradcheck", "--out", g.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(g.join("gradcheck.json").exists());

    let mut cfg = presets::gradcheck();
    let gc = cfg.gradcheck.as_mut().unwrap();
    gc.instances_per_mode = 5;
    gc.corrupt = Some(blobot::gradients::Term::Control);
    let p = write_config(dir.path(), "g.json", &cfg);
    let out = blobot(&[
        "gradcheck",
        &p,
        "--out",
        dir.path().join("g2").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn convergence_reports_slope() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = presets::convergence();
    cfg.optimizer.max_steps = 200;
    cfg.convergence.as_mut().unwrap().n_values = vec![4, 8];
    let p = write_config(dir.path(), "c.json", &cfg);
    let o = dir.path().join("c");
    let out = blobot(&[
        "convergence",
        &p,
        "--out",
        o.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(o.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
    assert!(report["slope"].is_number());
    assert_eq!(
        fs::read_to_string(o.join("convergence.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
}

#[test]
fn preset_listing() {
    let out = blobot(&["preset"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("comparison"));
    let out = blobot(&["preset", "obstacle"]);
    let cfg = ExperimentConfig::from_json(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(cfg.n_particles, 25);
    assert_eq!(blobot(&["preset", "nope"]).status.code(), Some(2));
}
