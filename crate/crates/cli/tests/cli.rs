use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn pgmult(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgmult")).current_dir(dir).args(args).env("PGMULT_THREADS", "2").output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn exit_code(dir: &Path, config: &str) -> (i32, String) {
    let out = pgmult(dir, &["run", config]);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

const GP_GEN: &str = r#"{"model":"multgp","seed":2,"output_dir":"gp","train_inputs":[0,1,2],"test_inputs":[3],"categories":3,"total":5,
    "kernel":{"kind":"squared_exponential","variance":1.0,"lengthscales":[1.0]}}"#;

#[test]
fn config_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "broken.json", "{ not json");
    write(d, "unknown.json", r#"{"model":"nope","seed":1,"output_dir":"o"}"#);
    write(d, "schedule.json", r#"{"model":"lda","seed":1,"output_dir":"o","train":"a","test":"b","topics":2,"sweeps":5,"burn_in":5}"#);
    for cfg in ["broken.json", "unknown.json", "schedule.json", "missing.json"] {
        let (code, err) = exit_code(d, cfg);
        assert_eq!(code, 1, "{cfg}: {err}");
        assert!(err.starts_with("pgmult: config error"), "{err}");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_pgmult")).current_dir(d).arg("selfcheck").env("PGMULT_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "train.txt", "0 1 2\n1 7 2\n");
    write(d, "garbled.txt", "0 one 2\n");
    write(d, "test.txt", "0 1\n");
    write(d, "vocab.txt", "a\nb\nc\n");
    let lda = |train: &str| format!(r#"{{"model":"lda","seed":1,"output_dir":"o","train":"{train}","test":"test.txt","topics":2,"vocab":"vocab.txt","sweeps":5,"burn_in":1}}"#);
    write(d, "garbled.json", &lda("garbled.txt"));
    write(d, "range.json", &lda("train.txt"));
    for cfg in ["garbled.json", "range.json"] {
        let (code, err) = exit_code(d, cfg);
        assert_eq!(code, 2, "{cfg}: {err}");
        assert!(err.starts_with("pgmult: data error"), "{err}");
    }
    // a path that does not exist is a mistake in the config itself
    write(d, "absent.json", &lda("nowhere.txt"));
    assert_eq!(exit_code(d, "absent.json").0, 1);
}

#[test]
fn numerical_failures_exit_with_3_and_name_the_operation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "gen.json", GP_GEN);
    assert!(pgmult(d, &["gen", "gen.json"]).status.success());
    // the kernel underflows to the identity off its diagonal and overflows on it
    write(
        d,
        "run.json",
        r#"{"model":"multgp","seed":5,"output_dir":"r","train":"gp/train.csv","test":"gp/test.csv","input_dim":1,
            "kernel":{"kind":"squared_exponential","variance":1.0,"lengthscales":[1e-300]},"sweeps":3,"burn_in":1,"thin":1}"#,
    );
    let (code, err) = exit_code(d, "run.json");
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("numerical failure in mult_gp::multgp_gibbs_sweep"), "{err}");
}

#[test]
fn run_writes_manifest_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "gen.json", r#"{"model":"ctm","seed":4,"output_dir":"data","topics":2,"vocab_size":10,"docs":10,"test_docs":4,"doc_len":12}"#);
    assert!(pgmult(d, &["gen", "gen.json"]).status.success());
    let body = r#"{"model":"ctm","seed":9,"output_dir":"out","train":"data/train.txt","test":"data/test.txt","topics":2,"sweeps":6,"burn_in":2,"thin":2}"#;
    write(d, "run.json", body);
    let out = pgmult(d, &["run", "run.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let manifest = read_json(&d.join("out/manifest.json"));
    assert_eq!(manifest["command"], "run");
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["model"], "ctm");
    assert_eq!(manifest["threads"], 2);
    assert_eq!(manifest["config_sha256"], format!("{:x}", Sha256::digest(body.as_bytes())));

    let csv = std::fs::read_to_string(d.join("out/diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("sweep,elapsed_s,metric_name,metric_value"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(!rows.is_empty());
    for r in &rows {
        assert_eq!(r.len(), 4);
        r[0].parse::<u64>().unwrap();
        assert!(r[1].parse::<f64>().unwrap() >= 0.0);
        assert!(r[3].parse::<f64>().unwrap().is_finite());
    }

    let results = read_json(&d.join("out/results.json"));
    assert!(results["heldout_ll_per_token"].as_f64().unwrap() < 0.0);
}

#[test]
fn gen_single_topic_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "gen.json", r#"{"model":"ctm","seed":1,"output_dir":"one","topics":1,"vocab_size":8,"docs":5,"test_docs":2,"doc_len":7}"#);
    let out = pgmult(d, &["gen", "gen.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let train = std::fs::read_to_string(d.join("one/train.txt")).unwrap();
    assert_eq!(train.lines().count(), 5);
    assert!(train.lines().all(|l| l.split_whitespace().count() == 7));
    let truth = read_json(&d.join("one/truth.json"));
    let topic: Vec<f64> = truth["topics"][0].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(truth["topics"].as_array().unwrap().len(), 1);
    assert!((topic.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn gen_without_state_noise_holds_probabilities_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        d,
        "gen.json",
        r#"{"model":"sbmlds","seed":3,"output_dir":"lds","steps":40,"state_dim":2,"categories":4,"total":200000,
            "angle":0.0,"decay":1.0,"state_noise":1e-14}"#,
    );
    let out = pgmult(d, &["gen", "gen.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let truth = read_json(&d.join("lds/truth.json"));
    let states = truth["states"].as_array().unwrap();
    for row in states {
        for (a, b) in row.as_array().unwrap().iter().zip(states[0].as_array().unwrap()) {
            assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() < 1e-5);
        }
    }
    let csv = std::fs::read_to_string(d.join("lds/sequence.csv")).unwrap();
    let freqs: Vec<Vec<f64>> = csv
        .lines()
        .map(|l| {
            let c: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
            let n: f64 = c.iter().sum();
            c.iter().map(|v| v / n).collect()
        })
        .collect();
    for f in &freqs {
        for (a, b) in f.iter().zip(&freqs[0]) {
            assert!((a - b).abs() < 0.01, "{f:?} vs {:?}", freqs[0]);
        }
    }
}

#[test]
fn selfcheck_reports_every_check() {
    let out = Command::new(env!("CARGO_BIN_EXE_pgmult")).arg("selfcheck").output().unwrap();
    assert!(out.status.success());
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.lines().count() > 3, "{report}");
}
