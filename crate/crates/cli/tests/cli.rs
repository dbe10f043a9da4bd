use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparselab"))
        .args(args)
        .env("SPARSELAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid json")
}

#[test]
fn exponents_report() {
    let v = json(&["exponents", "--p0", "1", "--q0", "inf", "--p", "4"]);
    assert_eq!(v["result"]["gamma"].as_f64(), Some(0.5));
    assert_eq!(v["result"]["critical"].as_f64(), Some(3.0));
    assert_eq!(v["config"]["q0"], "inf");
    assert_eq!(v["config"]["q"], Value::Null);
}

#[test]
fn sweep_csv_has_target_slope() {
    let out = run(&[
        "sharpness-sweep",
        "--case",
        "low",
        "--p0",
        "1",
        "--q0",
        "4",
        "--p",
        "2.2",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "eps,lhs,rhs,ratio");
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[1].split(',').next().unwrap(), "1.5625000000000000e-2");
    let slopes = text.lines().find(|l| l.starts_with("# slopes")).unwrap();
    let lhs: f64 = slopes.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!((lhs + 3.0).abs() <= 0.05, "{lhs}");
}

#[test]
fn sweep_json_high_case() {
    let v = json(&[
        "sharpness-sweep",
        "--case",
        "high",
        "--p0",
        "1",
        "--q0",
        "inf",
        "--p",
        "4",
    ]);
    let slope = v["result"]["rhs_fit"]["slope"].as_f64().unwrap();
    assert!((slope + 2.0).abs() <= 0.05, "{slope}");
}

#[test]
fn sparse_check_small_grid() {
    let v = json(&["sparse-check", "--seed", "7", "--N", "512", "--m", "200"]);
    let r = &v["result"];
    assert!(r["ratio"].as_f64().unwrap().is_finite());
    assert_eq!(r["sparsity"]["ok"], true);
    assert_eq!(v["config"]["N"], Value::Null);
    assert_eq!(v["config"]["n"].as_u64(), Some(512));
}

#[test]
fn sparse_check_fine_grid() {
    let v = json(&["sparse-check", "--seed", "7", "--N", "4096"]);
    assert!(v["result"]["ratio"].as_f64().unwrap() > 0.0);
    assert_eq!(v["result"]["sparsity"]["ok"], true);
}

#[test]
fn sparse_build_family_round_trips() {
    let v = json(&[
        "sparse-build",
        "--seed",
        "3",
        "--N",
        "256",
        "--m",
        "120",
        "--t-min",
        "1e-7",
        "--t-max",
        "10",
    ]);
    let fam = sparselab::lattice::SparseFamily::from_json(&v["result"]["family"]).unwrap();
    assert!(fam.verify_sparsity().unwrap().ok);
}

#[test]
fn reruns_are_byte_identical() {
    for args in [
        &["sparse-check", "--seed", "11", "--N", "256", "--m", "150"][..],
        &["square", "--seed", "2", "--N", "256", "--format", "csv"][..],
        &["weight-char", "--exponent", "-0.5", "--p", "2"][..],
    ] {
        let a = run(args);
        let b = Command::new(env!("CARGO_BIN_EXE_sparselab"))
            .args(args)
            .env("SPARSELAB_THREADS", "1")
            .output()
            .unwrap();
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn square_function_plancherel_from_cli() {
    let v = json(&["square", "--seed", "4", "--N", "1024", "--kmax", "20"]);
    let ratio = v["result"]["l2_ratio"].as_f64().unwrap();
    assert!((ratio / 0.5f64.sqrt() - 1.0).abs() < 0.02);
    assert_eq!(v["result"]["band_warning"], false);
}

#[test]
fn weight_char_reports_argmax() {
    let v = json(&[
        "weight-char",
        "--exponent",
        "0.5",
        "--class",
        "rh",
        "--p",
        "2",
    ]);
    let value = v["result"]["value"].as_f64().unwrap();
    assert!((value - 1.5 / 2f64.sqrt()).abs() < 1e-9, "{value}");
    assert_eq!(v["result"]["argmax_interval"].as_array().unwrap().len(), 2);
}

#[test]
fn offdiag_check_ratio() {
    let v = json(&["offdiag-check", "--t", "1e-4", "--sep", "8"]);
    let ratio = v["result"]["ratio"].as_f64().unwrap();
    assert!(ratio <= 1.0 && ratio > 0.0);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["exponents", "--p0", "1"]).status.code(), Some(1));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(
        run(&["exponents", "--p0", "1", "--q0", "2", "--p", "3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "sharpness-sweep",
            "--case",
            "low",
            "--p0",
            "1",
            "--q0",
            "4",
            "--p",
            "3"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        run(&["acceptance", "--inject-critical", "2.6"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_sparselab"))
        .args(["exponents", "--p0", "1", "--q0", "4", "--p", "3"])
        .env("SPARSELAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
