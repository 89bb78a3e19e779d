use std::fs;
use std::process::{Command, Output};

fn qdetect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdetect")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn fvalue_methods_agree() {
    let args = ["fvalue", "--signs", "1,-1", "--h", "4,4", "--c", "1,1"];
    let series = json(&qdetect(&args));
    assert_eq!(series["method"], "series_quadrature");
    let fd = json(&qdetect(&[&args[..], &["--method", "fd", "--grid", "100"]].concat()));
    let mc = json(&qdetect(&[&args[..], &["--method", "mc", "--paths", "20000"]].concat()));
    let v = series["value"].as_f64().unwrap();
    for other in [fd, mc] {
        let d = (other["value"].as_f64().unwrap() - v).abs();
        assert!(
            d <= other["error"].as_f64().unwrap() + series["error"].as_f64().unwrap(),
            "{other}"
        );
    }
}

#[test]
fn calibrate_and_gap_sweep() {
    let r = json(&qdetect(&["calibrate", "--c", "1,1", "--gamma", "1e4", "--symmetric"]));
    assert_eq!(r["regime"], "symmetric");
    assert!((r["false_alarm"].as_f64().unwrap() / 1e4 - 1.0).abs() < 1e-6);
    let out = qdetect(&["gap-sweep", "--gammas", "1e2,1e3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "gamma,h1,h2,j_kl,lower_bound,gap,provenance");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("100,"));
}

#[test]
fn kernel_and_simulate() {
    let k = json(&qdetect(&["kernel", "--sign", "-1", "--eps", "0.2", "--t", "0.01"]));
    assert_eq!(k["value"].as_f64().unwrap(), 1.0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let out = qdetect(&[
        "simulate",
        "--c",
        "1,-2",
        "--mu",
        "1",
        "--tau",
        "0.5,inf",
        "--horizon",
        "1",
        "--dt",
        "0.01",
        "--h",
        "3,3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&path).unwrap();
    assert_eq!(csv.lines().count(), 102);
    let report: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(report.get("stopped").is_some());
}

#[test]
fn exit_codes() {
    // bad input
    assert_eq!(
        qdetect(&["fvalue", "--signs", "-1", "--h", "4,4", "--c", "1,1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        qdetect(&["calibrate", "--c", "2,1", "--gamma", "10"]).status.code(),
        Some(2)
    );
    assert_eq!(
        qdetect(&["calibrate", "--c", "1,2", "--gamma", "10", "--symmetric"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(qdetect(&["no-such-verb"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    fs::write(
        &cfg,
        format!(
            "gamma_sweep = []\ntau_scenarios = [[0.0]]\nn_paths = 100\ndt = 0.1\nseed = 0\noutput_dir = {:?}\n\
             [system]\ncs = [1.0]\ndrift = {{ kind = \"constant\", mu = 1.0 }}\n",
            dir.path().display().to_string()
        ),
    )
    .unwrap();
    assert_eq!(
        qdetect(&["run", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(2)
    );
    // numeric failure: a horizon too short for any alarm
    let cfg2 = dir.path().join("short.toml");
    fs::write(
        &cfg2,
        format!(
            "gamma_sweep = [1e4]\ntau_scenarios = [[\"inf\"]]\nn_paths = 100\ndt = 0.1\nseed = 0\nmax_horizon = 1.0\n\
             output_dir = {:?}\n[system]\ncs = [1.0]\ndrift = {{ kind = \"constant\", mu = 1.0 }}\n",
            dir.path().display().to_string()
        ),
    )
    .unwrap();
    let out = qdetect(&["demo", "--config", cfg2.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn thread_cap_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_qdetect"))
        .env("QDETECT_THREADS", "zero")
        .args(["kernel", "--sign", "1", "--eps", "0.2", "--t", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_qdetect"))
        .env("QDETECT_THREADS", "1")
        .args(["kernel", "--sign", "1", "--eps", "0.2", "--t", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
}
