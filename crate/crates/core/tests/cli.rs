use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_squeezefit");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn two_point(dir: &Path) -> String {
    let path = dir.join("two_point.csv");
    std::fs::write(&path, "0,0,0\n1,2,0\n").unwrap();
    path.to_str().unwrap().to_string()
}

fn read_matrix(path: &Path) -> (usize, Vec<f64>) {
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let dim = v["dim"].as_u64().unwrap() as usize;
    let data = v["data"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    (dim, data)
}

#[test]
fn solve_two_point_at_delta_two() {
    let tmp = TempDir::new().unwrap();
    let data = two_point(tmp.path());
    let out = tmp.path().join("out");
    let o = run(&[
        "solve",
        "--data",
        &data,
        "--delta",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let (dim, m) = read_matrix(&out.join("M.json"));
    assert_eq!(dim, 2);
    let expect = [1.0, 0.0, 0.0, 0.0];
    let err: f64 = m
        .iter()
        .zip(expect)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(err <= 1e-2, "M = {m:?}");
    assert!(out.join("results.json").exists());
}

#[test]
fn infeasible_delta_exits_two() {
    let tmp = TempDir::new().unwrap();
    let data = two_point(tmp.path());
    let out = tmp.path().join("out");
    let o = run(&[
        "solve",
        "--data",
        &data,
        "--delta",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_plus_warns_about_delta() {
    let tmp = TempDir::new().unwrap();
    let data = two_point(tmp.path());
    let out = tmp.path().join("out");
    let o = run(&[
        "solve",
        "--data",
        &data,
        "--mode",
        "zero_plus",
        "--delta",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ignoring --delta"));
}

fn write_matrix(dir: &Path, name: &str, diag: [f64; 2]) -> String {
    let path = dir.join(name);
    let json = format!(r#"{{"dim":2,"data":[{},0.0,0.0,{}]}}"#, diag[0], diag[1]);
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn certify_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let data = two_point(tmp.path());
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();

    let optimal = write_matrix(tmp.path(), "opt.json", [1.0, 0.0]);
    let o = run(&[
        "certify", "--data", &data, "--matrix", &optimal, "--delta", "2", "--out", out,
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );

    // Feasible at Δ = 1 but four times the optimal trace.
    let loose = write_matrix(tmp.path(), "loose.json", [1.0, 0.0]);
    let o = run(&[
        "certify", "--data", &data, "--matrix", &loose, "--delta", "1", "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(1));

    let short = write_matrix(tmp.path(), "short.json", [0.5, 0.0]);
    let o = run(&[
        "certify", "--data", &data, "--matrix", &short, "--delta", "2", "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("violating pair   (0, 1)"), "{stdout}");

    let broken = tmp.path().join("broken.json");
    std::fs::write(&broken, "{\"dim\": 2, \"data\": [1.0,").unwrap();
    let o = run(&[
        "certify",
        "--data",
        &data,
        "--matrix",
        broken.to_str().unwrap(),
        "--delta",
        "2",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn results_are_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data.csv");
    std::fs::write(
        &data,
        "0,0.0,0.1,0.3\n0,0.2,-0.4,1.0\n1,1.5,0.3,-0.2\n1,1.1,1.2,0.4\n2,-1.0,2.0,0.0\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for run_id in 0..2 {
        let out = tmp.path().join(format!("out{run_id}"));
        let o = run(&[
            "solve",
            "--data",
            data.to_str().unwrap(),
            "--delta",
            "0.5",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        outputs.push((
            std::fs::read(out.join("results.json")).unwrap(),
            std::fs::read(out.join("M.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn statdim_rejects_few_trials() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run(&[
        "statdim",
        "--cone",
        "orthant",
        "--n",
        "8",
        "--trials",
        "50",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unknown_flag_is_an_input_error() {
    let o = run(&["solve", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(3));
}
