use std::io::Write;
use std::process::{Command, Output, Stdio};

use matembed_core::linalg::expm;
use matembed_core::Matrix;
use serde_json::Value;

fn run(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_matembed"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn doc(rows: &[&[f64]]) -> String {
    serde_json::json!({ "n": rows.len(), "entries": rows }).to_string()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn real_entries(v: &Value) -> Vec<Vec<f64>> {
    v.as_array().unwrap().iter().map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()).collect()
}

fn violated(report: &Value, name: &str) -> bool {
    report["conditions"].as_array().unwrap().iter().any(|c| c["name"] == name && c["status"] == "violated")
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn check_real_minus_one_is_refused() {
    let out = run(&["check-real"], &doc(&[&[-1.0]]));
    assert_eq!(code(&out), 1);
    let r = json(&out);
    assert_eq!(r["verdict"], "NOT_EMBEDDABLE");
    assert!(violated(&r, "PARITY"));
    let details: Vec<&str> = r["conditions"].as_array().unwrap().iter().filter_map(|c| c["detail"].as_str()).collect();
    assert!(details.iter().any(|d| d.contains("odd Jordan-block count at -1")), "{details:?}");
    assert!(r["certificate"].is_null());
}

#[test]
fn check_real_identity_has_zero_generator() {
    let out = run(&["check-real"], &doc(&[&[1.0, 0.0], &[0.0, 1.0]]));
    assert_eq!(code(&out), 0);
    let r = json(&out);
    let a = real_entries(&r["certificate"]["generator"]);
    assert!(a.iter().flatten().all(|x| x.abs() < 1e-14), "{a:?}");
}

#[test]
fn check_real_minus_identity_from_file() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(doc(&[&[-1.0, 0.0], &[0.0, -1.0]]).as_bytes()).unwrap();
    let out = run(&["check-real", f.path().to_str().unwrap()], "");
    assert_eq!(code(&out), 0);
    let r = json(&out);
    assert_eq!(r["verdict"], "EMBEDDABLE");
    assert!(r["certificate"]["residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(r["negative_blocks"][0]["count"], 2);
}

#[test]
fn check_positive_zero_diagonal() {
    let out = run(&["check-positive"], &doc(&[&[0.5, 0.5], &[1.0, 0.0]]));
    assert_eq!(code(&out), 1);
    assert!(violated(&json(&out), "N1"));
}

#[test]
fn check_positive_unipotent_on_threshold() {
    let out = run(&["check-positive"], &doc(&[&[1.0, 1.0, 0.5], &[0.0, 1.0, 1.0], &[0.0, 0.0, 1.0]]));
    assert_eq!(code(&out), 0);
    let r = json(&out);
    assert_eq!(r["certificate"]["construction"], "unipotent3");
    let a = real_entries(&r["certificate"]["generator"]);
    assert!(a[0][2].abs() < 1e-12, "gamma = {}", a[0][2]);
    assert!((a[0][1] - 1.0).abs() < 1e-12 && (a[1][2] - 1.0).abs() < 1e-12);
}

#[test]
fn check_positive_by_search() {
    let a = Matrix::from_real_rows(&[[-1.0, 0.5, 0.3], [0.2, -0.8, 0.4], [0.6, 0.1, -1.2]]);
    let t = expm(&a).to_real_rows();
    let rows: Vec<&[f64]> = t.iter().map(Vec::as_slice).collect();
    let out = run(&["check-positive", "--branch-bound", "1"], &doc(&rows));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let r = json(&out);
    assert_eq!(r["certificate"]["construction"], "metzler_search");
    assert!(r["certificate"]["residual"].as_f64().unwrap() <= 1e-8);
    let g = real_entries(&r["certificate"]["generator"]);
    for (i, row) in g.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            assert!(i == j || *x >= -1e-12);
            assert!((x - a[(i, j)].re).abs() < 1e-8);
        }
    }
}

#[test]
fn check_positive_negative_entry() {
    let out = run(&["check-positive"], &doc(&[&[1.0, -0.5], &[0.0, 1.0]]));
    assert_eq!(code(&out), 1);
    assert!(violated(&json(&out), "NONNEGATIVE"));
}

#[test]
fn check_positive_undecided_exit_code() {
    // Not diagonalizable and not a scaled unipotent: the search does not apply.
    let out = run(&["check-positive"], &doc(&[&[2.0, 1.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, 1.0]]));
    assert_eq!(code(&out), 4);
    assert_eq!(json(&out)["verdict"], "UNDECIDED");
}

#[test]
fn parse_errors() {
    assert_eq!(code(&run(&["check-real"], "{\"n\": 2, \"entries\": [[1, 2]")), 2);
    assert_eq!(code(&run(&["check-real"], "{\"n\": 2, \"entries\": [[1, 2], [3]]}")), 2);
    assert_eq!(code(&run(&["check-real"], "{\"n\": 1, \"entries\": [[1]], \"tolerances\": {\"pos_tol\": -1}}")), 2);
    assert_eq!(code(&run(&["check-real", "--rank-tol", "-1"], &doc(&[&[1.0]]))), 2);
    assert_eq!(code(&run(&["check-real", "--no-such-flag"], &doc(&[&[1.0]]))), 2);
    assert_eq!(code(&run(&["check-real", "/nonexistent/matrix.json"], "")), 2);
    assert_eq!(code(&run(&["sample", "--steps", "1"], &doc(&[&[1.0]]))), 2);
}

#[test]
fn analysis_error_exit_code() {
    let out = run(&["check-real"], r#"{"n": 1, "entries": [[[1, 1]]]}"#);
    assert_eq!(code(&out), 3);
    let r = json(&out);
    assert_eq!(r["verdict"], "ERROR");
    assert!(r["error"].as_str().unwrap().contains("not real"));
}

#[test]
fn reports_are_deterministic_and_ignore_labels() {
    let plain = doc(&[&[2.0, 1.0], &[1.0, 2.0]]);
    let labelled = r#"{"n": 2, "entries": [[2, 1], [1, 2]], "labels": ["x", "y"]}"#;
    for cmd in ["check-real", "check-positive", "sqrt-real"] {
        let a = without_timing(json(&run(&[cmd], &plain)));
        let b = without_timing(json(&run(&[cmd], &plain)));
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = without_timing(json(&run(&[cmd], labelled)));
        for key in ["verdict", "conditions", "certificate"] {
            assert_eq!(a[key], c[key], "{cmd} {key}");
        }
        assert_eq!(c["input"]["labels"][1], "y");
    }
}

#[test]
fn tolerances_layer_document_then_flags() {
    let text = r#"{"n": 1, "entries": [[2]], "tolerances": {"verify_tol": 1e-6, "rank_tol": 1e-9}}"#;
    let r = json(&run(&["check-real", "--verify-tol", "1e-7"], text));
    assert_eq!(r["tolerances"]["verify_tol"].as_f64(), Some(1e-7));
    assert_eq!(r["tolerances"]["rank_tol"].as_f64(), Some(1e-9));
    assert_eq!(r["tolerances"]["pos_tol"].as_f64(), Some(1e-12));
}

fn csv_rows(out: &Output) -> Vec<(f64, usize, usize, f64, f64)> {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,i,j,re,im"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap(), f[4].parse().unwrap())
        })
        .collect()
}

#[test]
fn sample_identity() {
    let out = run(&["sample", "--t-min", "0", "--t-max", "1", "--steps", "3"], &doc(&[&[1.0, 0.0], &[0.0, 1.0]]));
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 3 * 4);
    let times: Vec<f64> = rows.iter().step_by(4).map(|r| r.0).collect();
    assert_eq!(times, vec![0.0, 0.5, 1.0]);
    for (_, i, j, re, im) in rows {
        assert_eq!(re, if i == j { 1.0 } else { 0.0 });
        assert_eq!(im, 0.0);
    }
}

#[test]
fn sample_jordan_block_at_three() {
    let out = run(&["sample", "--t-min", "3", "--t-max", "3", "--steps", "2"], &doc(&[&[1.0, 1.0], &[0.0, 1.0]]));
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&out);
    let e01 = rows.iter().find(|r| r.1 == 0 && r.2 == 1).unwrap();
    assert!((e01.3 - 3.0).abs() < 1e-12);
}

#[test]
fn sample_half_power_and_unit_time() {
    let t = [[2.0, 1.0], [1.0, 2.0]];
    let out = run(&["sample", "--t-min", "0.5", "--t-max", "1", "--steps", "2"], &doc(&[&t[0], &t[1]]));
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&out);
    let at = |s: f64| {
        let mut m = [[0.0; 2]; 2];
        for r in rows.iter().filter(|r| r.0 == s) {
            m[r.1][r.2] = r.3;
        }
        m
    };
    let h = at(0.5);
    let (r3, one) = (3f64.sqrt(), 1.0);
    // Eigenvalues sqrt(3) and 1 on eigenvectors (1, 1) and (1, -1).
    let expected = [[(r3 + one) / 2.0, (r3 - one) / 2.0], [(r3 - one) / 2.0, (r3 + one) / 2.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((h[i][j] - expected[i][j]).abs() < 1e-10);
            assert!((at(1.0)[i][j] - t[i][j]).abs() <= 1e-8 * 3.0);
        }
    }
}

#[test]
fn sample_refuses_non_embeddable() {
    let out = run(&["sample"], &doc(&[&[-1.0]]));
    assert_eq!(code(&out), 1);
    assert!(out.stdout.is_empty());
    let report: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(report["verdict"], "NOT_EMBEDDABLE");
}

#[test]
fn sample_positive_certificate() {
    let out = run(&["sample", "--positive", "--steps", "5"], &doc(&[&[2.0, 1.0], &[1.0, 2.0]]));
    assert_eq!(code(&out), 0);
    assert!(csv_rows(&out).iter().all(|r| r.3 >= 0.0));
}

#[test]
fn sqrt_real_examples() {
    let out = run(&["sqrt-real"], &doc(&[&[4.0, 0.0], &[0.0, 9.0]]));
    assert_eq!(code(&out), 0);
    let s = real_entries(&json(&out)["square_root"]["entries"]);
    assert!((s[0][0] - 2.0).abs() < 1e-12 && (s[1][1] - 3.0).abs() < 1e-12 && s[0][1].abs() < 1e-12);

    let out = run(&["sqrt-real"], &doc(&[&[-1.0, 0.0], &[0.0, -1.0]]));
    assert_eq!(code(&out), 0);
    assert!(json(&out)["square_root"]["residual"].as_f64().unwrap() <= 1e-8);

    assert_eq!(code(&run(&["sqrt-real"], &doc(&[&[-1.0]]))), 1);
    assert_eq!(code(&run(&["sqrt-real"], &doc(&[&[0.0, 1.0], &[0.0, 0.0]]))), 4);
}

#[test]
fn verify_single_probe() {
    let out = run(&["verify", "--probe", "chu-vandermonde"], "");
    assert_eq!(code(&out), 0);
    let r = json(&out);
    assert_eq!(r["passed"], true);
    assert!(r["probes"][0]["worst_residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn verify_flags_a_loose_rank_tolerance() {
    let out = run(&["verify", "--probe", "jordan-oracle", "--trials", "30", "--rank-tol", "0.5"], "");
    assert_eq!(code(&out), 1);
    let r = json(&out);
    assert_eq!(r["passed"], false);
    assert!(r["probes"][0]["failures"].as_u64().unwrap() > 0);
    assert!(r["probes"][0]["counterexample"].is_array());
}

#[test]
fn verify_unknown_probe() {
    assert_eq!(code(&run(&["verify", "--probe", "no-such-probe"], "")), 2);
}

#[test]
fn verify_default_suite_passes() {
    let out = run(&["verify"], "");
    let r = json(&out);
    let failing: Vec<&Value> = r["probes"].as_array().unwrap().iter().filter(|p| p["passed"] != true).collect();
    assert!(failing.is_empty(), "{failing:?}");
    assert_eq!(code(&out), 0);
    assert_eq!(r["probes"].as_array().unwrap().len(), 11);
}
