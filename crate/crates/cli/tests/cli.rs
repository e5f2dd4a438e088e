//! End-to-end runs of the `pointmass` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pointmass"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pointmass-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_exits_zero() {
    let o = bin().arg("--help").output().unwrap();
    assert!(o.status.success());
    for sub in ["spectrum", "control", "verify", "epsilon"] {
        assert!(stdout(&o).contains(sub));
    }
}

#[test]
fn spectrum_table_for_dirichlet() {
    let dir = scratch("spectrum");
    let o = run(&["spectrum", "--case", "dirichlet", "--n-max", "4"], &dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.join("spectrum.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,kind,mu,lambda,norm_sq,b,gap_to_next,asymptotic_deviation");
    let row: Vec<&str> = lines[2].split(',').collect();
    let pi = std::f64::consts::PI;
    assert_eq!(row[1], "DirichletEven");
    assert_eq!(row[3].parse::<f64>().unwrap(), -pi * pi);
    assert_eq!(row[5].parse::<f64>().unwrap(), -pi);
}

#[test]
fn neumann_gaps_grow_like_n_pi_squared_over_two() {
    let dir = scratch("gaps");
    let o = run(&["spectrum", "--case", "neumann", "--n-max", "50"], &dir);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.join("spectrum.csv")).unwrap();
    let gaps: Vec<f64> = text.lines().skip(1).filter_map(|l| l.split(',').nth(6)?.parse().ok()).collect();
    assert_eq!(gaps.len(), 49);
    assert!(gaps.windows(2).all(|w| w[1] > w[0]));
    for (i, g) in gaps.iter().enumerate() {
        let n = (i + 1) as f64;
        assert!((g - n * std::f64::consts::PI.powi(2) / 2.0).abs() < 20.0, "n = {n}: {g}");
    }
}

#[test]
fn control_files_and_residuals() {
    let dir = scratch("control");
    let o = run(&["control", "--case", "dirichlet", "--T", "0.5", "--N", "10", "--modes", "1:1.0"], &dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("control.json")).unwrap()).unwrap();
    let res = json["residuals"].as_array().unwrap();
    assert_eq!(res.len(), 10);
    assert!(res.iter().all(|r| r.as_f64().unwrap().abs() <= 1e-8));
    for key in ["T", "lambdas", "coeffs", "condition"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    let csv = std::fs::read_to_string(dir.join("control.csv")).unwrap();
    assert!(csv.starts_with("t,f\n"));
}

#[test]
fn empty_modes_give_zero_control() {
    let dir = scratch("zero");
    let o = run(&["control", "--modes", ""], &dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.join("control.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap() == 0.0));
}

#[test]
fn short_horizon_is_refused_with_advisory() {
    let dir = scratch("short");
    let o = run(&["control", "--T", "0.01", "--N", "10"], &dir);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("advisory"), "{}", stderr(&o));
    assert!(!dir.join("control.csv").exists());
}

#[test]
fn verify_passes_on_the_standard_datum() {
    for case in ["dirichlet", "neumann"] {
        let dir = scratch(&format!("verify-{case}"));
        let o = run(&["verify", "--case", case, "--T", "0.5", "--N", "10"], &dir);
        assert!(o.status.success(), "{case}: {}{}", stdout(&o), stderr(&o));
        assert!(stdout(&o).contains("duality gap"));
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
        assert_eq!(report["pass"], serde_json::Value::Bool(true));
        for key in ["case", "T", "N", "initial_norm", "final_norm_fd", "final_modal", "moment_residuals", "gram_condition", "control_norm"] {
            assert!(report.get(key).is_some(), "missing {key}");
        }
    }
}

#[test]
fn sabotaged_sign_fails_verification() {
    let dir = scratch("flip");
    let o = run(&["verify", "--case", "dirichlet", "--T", "0.5", "--flip-b-sign", "--no-extrapolate", "--dt", "1e-3"], &dir);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let gap_line = stdout(&o).lines().find(|l| l.starts_with("duality gap")).unwrap().to_string();
    let gap: f64 = gap_line.split_whitespace().last().unwrap().parse().unwrap();
    assert!(gap > 1e-2, "{gap_line}");
}

#[test]
fn reruns_are_byte_identical() {
    let a = scratch("det-a");
    let b = scratch("det-b");
    let args = ["verify", "--case", "neumann", "--T", "0.5", "--N", "6", "--dt", "1e-3", "--mesh-n", "64", "--seed", "7"];
    run(&args, &a);
    run(&args, &b);
    for f in ["report.json", "control.csv", "final_state.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = scratch("config");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "# spectrum run\ncase = neumann\nn_max = 3\n").unwrap();
    let o = bin()
        .args(["spectrum", "--config", cfg.to_str().unwrap(), "--case", "dirichlet", "--out", dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.join("spectrum.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.contains("DirichletEven"));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = scratch("badcfg");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "case = neumann\nhorizon = 2\n").unwrap();
    let o = bin().args(["spectrum", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("'horizon'"), "{}", stderr(&o));
}

#[test]
fn state_file_round_trip_through_verify() {
    let dir = scratch("state");
    let o = run(&["verify", "--case", "neumann", "--T", "0.5", "--N", "6", "--mesh-n", "64", "--dt", "1e-3", "--modes", "1:1"], &dir);
    assert!(o.status.code().is_some());
    // Reuse the written final state as an initial datum: it is tiny, so
    // whatever the verdict the pipeline must accept the file.
    let state = dir.join("final_state.csv");
    let o = bin()
        .args(["control", "--case", "neumann", "--T", "0.5", "--N", "6", "--state"])
        .arg(&state)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn epsilon_trend_and_resolution_error() {
    let dir = scratch("eps");
    let o = run(&["epsilon", "--eps", "0.2,0.1,0.05"], &dir);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("decreases"));
    let text = std::fs::read_to_string(dir.join("epsilon.csv")).unwrap();
    assert!(text.starts_with("eps,t_star,error_H\n"));
    let errs: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]));

    let o = run(&["epsilon", "--eps", "0.1"], &dir);
    assert!(stdout(&o).contains("no verdict"));

    let o = run(&["epsilon", "--eps", "0.4", "--mesh-n", "16"], &dir);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("not resolved"));
}
