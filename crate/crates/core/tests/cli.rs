//! End-to-end runs of the `ssregime` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use ssregime::data::write_csv;
use ssregime::simulation::{generate_replication, Baseline, Model, SimConfig};
use tempfile::TempDir;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssregime"))
        .args(args)
        .env_remove("SSREGIME_THREADS")
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

struct Files {
    dir: TempDir,
    labeled: PathBuf,
    unlabeled: PathBuf,
}

impl Files {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn model1_files(n: usize, big_n: usize) -> Files {
    let mut cfg = SimConfig::new(Model::Linear, Baseline::B1);
    cfg.n = n;
    cfg.big_n = big_n;
    let ds = generate_replication(&cfg, 0).unwrap();
    let dir = TempDir::new().unwrap();
    let labeled = dir.path().join("labeled.csv");
    let unlabeled = dir.path().join("unlabeled.csv");
    write_csv(&ds, &labeled, Some(&unlabeled)).unwrap();
    Files { dir, labeled, unlabeled }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fit(files: &Files, method: &str, seed: &str, out: &str) -> Output {
    bin(&[
        "fit",
        "--labeled",
        s(&files.labeled),
        "--unlabeled",
        s(&files.unlabeled),
        "--method",
        method,
        "--seed",
        seed,
        "--output",
        s(&files.path(out)),
    ])
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn tr_report_has_no_bandwidth() {
    let f = model1_files(200, 400);
    let out = fit(&f, "tr", "0", "tr.json");
    assert!(out.status.success(), "{}", stderr(&out));
    let report = json(&f.path("tr.json"));
    assert_eq!(report["method"], "tr");
    assert!(report.get("bandwidth").is_none());
    assert_eq!(report["beta"].as_array().unwrap().len(), 3);
    assert_eq!(report["ci95"].as_array().unwrap().len(), 3);
}

#[test]
fn ss_without_unlabeled_is_an_input_error() {
    let f = model1_files(100, 100);
    let out = bin(&["fit", "--labeled", s(&f.labeled), "--method", "ss"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("ss requires unlabeled data"), "{}", stderr(&out));
}

#[test]
fn fit_reports_are_byte_reproducible() {
    let f = model1_files(150, 300);
    for name in ["a.json", "b.json"] {
        assert!(fit(&f, "ss", "7", name).status.success());
    }
    assert_eq!(fs::read(f.path("a.json")).unwrap(), fs::read(f.path("b.json")).unwrap());
    let report = json(&f.path("a.json"));
    assert_eq!(report["seed"], 7);
    assert_eq!(report["kfolds"], 5);
    assert!(report["bandwidth"].as_f64().unwrap() > 0.0);
}

#[test]
fn decide_applies_the_linear_rule() {
    let f = model1_files(200, 400);
    assert!(fit(&f, "tr", "0", "tr.json").status.success());
    let report = json(&f.path("tr.json"));
    let beta: Vec<f64> = report["beta_raw"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let rows = [[1.0, 1.0], [-1.0, -1.0], [0.3, -2.0], [2.0, 0.1]];
    let cov = f.path("cov.csv");
    let mut text = String::from("x1,x2\n");
    for r in &rows {
        text += &format!("{},{}\n", r[0], r[1]);
    }
    fs::write(&cov, text).unwrap();
    let out = bin(&["decide", "--fit", s(&f.path("tr.json")), "--covariates", s(&cov)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x1,x2,decision"));
    for (r, line) in rows.iter().zip(lines) {
        let score = beta[0] + beta[1] * r[0] + beta[2] * r[1];
        let expected = u8::from(score > 0.0);
        assert!(line.ends_with(&format!(",{expected}")), "{line} vs score {score}");
    }
}

fn crosstab(text: &str) -> [[usize; 2]; 2] {
    // Last two lines hold the table rows; the final two fields are counts.
    let nums: Vec<Vec<usize>> = text
        .lines()
        .filter_map(|l| {
            let v: Vec<usize> = l.split_whitespace().filter_map(|t| t.parse().ok()).collect();
            (v.len() >= 2).then(|| v[v.len() - 2..].to_vec())
        })
        .collect();
    let n = nums.len();
    [[nums[n - 2][0], nums[n - 2][1]], [nums[n - 1][0], nums[n - 1][1]]]
}

#[test]
fn decide_cross_tabulates_two_fits() {
    let f = model1_files(500, 1000);
    assert!(fit(&f, "tr", "0", "tr.json").status.success());
    assert!(fit(&f, "ss", "0", "ss.json").status.success());
    let cov = f.path("cov.csv");
    fs::write(&cov, fs::read_to_string(&f.unlabeled).unwrap()).unwrap();
    let dec = f.path("dec.csv");

    let same = bin(&[
        "decide", "--fit", s(&f.path("ss.json")), "--fit", s(&f.path("ss.json")), "--covariates", s(&cov), "-o", s(&dec),
    ]);
    assert!(same.status.success(), "{}", stderr(&same));
    let t = crosstab(&String::from_utf8(same.stdout).unwrap());
    assert_eq!(t[0][1] + t[1][0], 0);
    assert_eq!(t[0][0] + t[1][1], 1000);

    let both = bin(&[
        "decide", "--fit", s(&f.path("tr.json")), "--fit", s(&f.path("ss.json")), "--covariates", s(&cov), "-o", s(&dec),
    ]);
    assert!(both.status.success());
    let t = crosstab(&String::from_utf8(both.stdout).unwrap());
    let agree = (t[0][0] + t[1][1]) as f64 / 1000.0;
    assert!(agree > 0.85, "agreement {agree}");
    let header = fs::read_to_string(&dec).unwrap();
    assert!(header.starts_with("x1,x2,decision,decision_2\n"));
}

#[test]
fn decide_rejects_mismatched_dimension() {
    let f = model1_files(150, 300);
    assert!(fit(&f, "tr", "0", "tr.json").status.success());
    let cov = f.path("cov3.csv");
    fs::write(&cov, "x1,x2,x3\n0.1,0.2,0.3\n").unwrap();
    let out = bin(&["decide", "--fit", s(&f.path("tr.json")), "--covariates", s(&cov)]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn collinear_covariates_are_a_numerical_error() {
    let dir = TempDir::new().unwrap();
    let lab = dir.path().join("lab.csv");
    let mut text = String::from("x1,x2,a,y\n");
    for i in 0..40 {
        let x = (i as f64 * 0.37).sin();
        text += &format!("{x},{},{},{}\n", 2.0 * x, i % 2, (i as f64 * 0.11).cos());
    }
    fs::write(&lab, text).unwrap();
    let out = bin(&["fit", "--labeled", s(&lab), "--method", "tr"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("x2"), "{}", stderr(&out));
}

fn simulate(extra: &[&str]) -> Output {
    let mut args = vec![
        "simulate", "--model", "linear", "--baseline", "b1", "--n", "100", "--big-n", "300", "--mc-size", "2000",
    ];
    args.extend_from_slice(extra);
    bin(&args)
}

#[test]
fn simulate_writes_one_row_per_replication() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("sim.json");
    let out = simulate(&["--reps", "2", "-o", s(&path)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = json(&path);
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
    assert_eq!(report["replications_used"], 2);
    assert!(!String::from_utf8(out.stdout).unwrap().is_empty());
}

#[test]
fn simulate_is_byte_reproducible() {
    let a = simulate(&["--reps", "3", "--seed", "5", "--format", "json"]);
    let b = simulate(&["--reps", "3", "--seed", "5", "--format", "json", "--threads", "1"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn unknown_model_is_a_usage_error() {
    let out = bin(&["simulate", "--model", "quartic", "--baseline", "b1"]);
    assert_eq!(out.status.code(), Some(2));
}
