//! End-to-end runs of the `specpreserve` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_specpreserve"))
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

struct Fixtures {
    dir: TempDir,
    diag: PathBuf,
    bilinear: PathBuf,
    sum2: PathBuf,
    prod2: PathBuf,
    sum4: PathBuf,
    garbage: PathBuf,
}

fn fixtures() -> Fixtures {
    let dir = tempfile::tempdir().unwrap();
    Fixtures {
        diag: write(&dir, "diag_b_1_1.json", r#"{"arity": 2, "kind": "diagonal", "b": [1.0, 1.0]}"#),
        bilinear: write(
            &dir,
            "sum_minus_3prod.json",
            r#"{"arity": 2, "kind": "series", "coeffs": [{"index": [1, 0], "value": 1.0}, {"index": [1, 1], "value": -3.0}]}"#,
        ),
        sum2: write(&dir, "sum2.json", r#"{"arity": 2, "kind": "builtin", "name": "sum"}"#),
        prod2: write(&dir, "prod2.json", r#"{"arity": 2, "kind": "builtin", "name": "product"}"#),
        sum4: write(&dir, "sum4.json", r#"{"arity": 4, "kind": "builtin", "name": "sum"}"#),
        garbage: write(&dir, "garbage.json", "{not json"),
        dir,
    }
}

#[test]
fn certify_exit_codes() {
    let f = fixtures();
    assert_eq!(run(&["certify", "--f", s(&f.diag), "--max-order", "6"]).status.code(), Some(0));

    let out = run(&["certify", "--f", s(&f.bilinear)]);
    assert_eq!(out.status.code(), Some(2));
    let report = json(&out);
    assert_eq!(report["verdict"], "falsified");
    assert_eq!(report["witness"]["order"], serde_json::json!([1, 1]));
    assert_eq!(report["max_order"], 6);

    let out = run(&["certify", "--f", s(&f.garbage)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    // arity 4 cannot be mollified, so a passing lattice is not enough
    assert_eq!(run(&["certify", "--f", s(&f.sum4), "--max-order", "2"]).status.code(), Some(3));
}

#[test]
fn falsify_exit_codes_and_reference_witness() {
    let f = fixtures();
    let out = run(&["falsify", "--f", s(&f.sum2), "--m", "2", "--families", "thm6"]);
    assert_eq!(out.status.code(), Some(2));
    let report = json(&out);
    let det = report["reference"]["determinant"].as_f64().unwrap();
    assert!((det + 0.9801).abs() < 1e-12);
    assert_eq!(report["reference"]["epsilon"].as_f64(), Some(0.1));

    let out = run(&["falsify", "--f", s(&f.prod2), "--m", "2", "--trials", "200", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));

    assert_eq!(run(&["falsify", "--f", s(&f.sum2), "--m", "3"]).status.code(), Some(1));
    assert_eq!(run(&["falsify", "--f", s(&f.sum2), "--m", "2", "--families", "nope"]).status.code(), Some(1));
}

#[test]
fn reports_are_byte_identical_and_replayable() {
    let f = fixtures();
    let a = f.dir.path().join("a.json");
    for _ in 0..2 {
        let out = run(&["falsify", "--f", s(&f.sum2), "--m", "2", "--trials", "50", "--seed", "3", "--out", s(&a)]);
        assert_eq!(out.status.code(), Some(2));
    }
    let first = std::fs::read(&a).unwrap();
    let out = run(&["falsify", "--f", s(&f.sum2), "--m", "2", "--trials", "50", "--seed", "3", "--out", s(&a)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(std::fs::read(&a).unwrap(), first);

    let text = String::from_utf8(first).unwrap();
    let replayed = specpreserve::cli::replay(&text).unwrap();
    assert_eq!(replayed.json, text);

    let c1 = run(&["certify", "--f", s(&f.bilinear), "--seed", "9"]);
    let c2 = run(&["certify", "--f", s(&f.bilinear), "--seed", "9"]);
    assert_eq!(c1.stdout, c2.stdout);
    assert_eq!(json(&c1)["config"]["seed"], 9);
}

#[test]
fn thread_cap_does_not_change_results() {
    let f = fixtures();
    let args = ["falsify", "--f", s(&f.diag), "--m", "2", "--trials", "80", "--seed", "1"];
    let one = bin().args(args).env("SPECPRESERVE_THREADS", "1").output().unwrap();
    let many = bin().args(args).env("SPECPRESERVE_THREADS", "4").output().unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn demo_transcripts() {
    let out = run(&["demo", "lemma3", "--p", "0", "--m", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[1, 1]") && text.contains("rank = 1 of 1"), "{text}");

    let text = String::from_utf8(run(&["demo", "lemma3", "--p", "1", "--m", "2"]).stdout).unwrap();
    assert!(text.contains("n = (p+2)^m = 9") && text.contains("rank = 3 of 3"), "{text}");

    let out = run(&["demo", "thm6", "--m", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines().skip(2) {
        let cols: Vec<f64> = line.split_whitespace().map(|c| c.parse().unwrap()).collect();
        assert!(cols[1] < 0.0 && cols[2] == 0.0, "{line}");
    }
}

#[test]
fn construct_eval_gen() {
    let f = fixtures();
    let out = run(&["construct", "--p", "1", "--m", "2", "--q", "0,1", "--vectors"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["n"], 9);
    assert_eq!(report["moment_vectors"][2]["entries"][1], "8");
    assert!(report["functional"]["residuals"].as_array().unwrap().iter().all(|r| r.as_f64() == Some(0.0)));
    assert_eq!(run(&["construct", "--p", "0", "--m", "1", "--nodes", "1,1"]).status.code(), Some(1));

    let out = run(&["eval", "--f", s(&f.sum2), "--point", "0.5,1.5"]);
    assert_eq!(json(&out)["value"].as_f64(), Some(2.0));

    let mat = write(&f.dir, "m.json", r#"{"dim": 2, "re": [[2.0, 1.0], [1.0, 2.0]]}"#);
    let out = run(&["eval", "--f", s(&f.prod2), "--matrix", s(&mat)]);
    assert!((json(&out)["value"].as_f64().unwrap() - 3.0).abs() < 1e-12);

    let blocks = f.dir.path().join("blocks.json");
    let out = run(&["gen", "psd-blocks", "--n", "3", "--m", "2", "--seed", "2", "--out", s(&blocks)]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["eval", "--f", s(&f.prod2), "--matrix", s(&blocks)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["is_psd"], true);

    let out = run(&["gen", "thm6", "--m", "2"]);
    let pair = json(&out);
    assert_eq!(pair["a"]["n"], 2);

    let out = run(&["gen", "gram", "--n", "2", "--m", "2", "--rank", "2", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(run(&["gen", "gram", "--rank", "0"]).status.code(), Some(1));
}

#[test]
fn usage_errors() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
