mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use antimodel::cli::{EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use antimodel::pipeline::{Manifest, RunStatus};

fn antimodel(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_antimodel"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = antimodel(dir, args);
    assert_eq!(
        out.status.code(),
        Some(EXIT_OK),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn stepwise_subcommands_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    common::write_toy_data(d, 60);

    ok(
        d,
        &["fit-ngram", "--input", "train.txt", "--out", "anti.ngram"],
    );
    assert!(d.join("anti.ngram.vocab").is_file());

    ok(
        d,
        &[
            "gen-negative",
            "--model",
            "anti.ngram",
            "--input",
            "dev.txt",
            "--out",
            "neg.txt",
        ],
    );
    assert_eq!(
        fs::read_to_string(d.join("neg.txt"))
            .unwrap()
            .lines()
            .count(),
        20
    );

    ok(
        d,
        &[
            "train",
            "--input",
            "train.txt",
            "--out",
            "lm.ckpt",
            "--anti-model",
            "anti.ngram",
            "--alpha",
            "2",
            "--epochs",
            "2",
            "--hidden-units",
            "8",
            "--embedding-dim",
            "8",
            "--metrics",
            "metrics.csv",
            "--dev",
            "dev.txt",
            "--negative-dev",
            "neg.txt",
        ],
    );
    let metrics = fs::read_to_string(d.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);
    assert!(metrics.lines().nth(2).unwrap().starts_with("alpha_2,2,2,"));

    let ppl = ok(
        d,
        &[
            "eval-ppl",
            "--model",
            "lm.ckpt",
            "--data",
            "dev.txt",
            "--negative",
            "neg.txt",
        ],
    );
    let v: serde_json::Value = serde_json::from_str(&ppl).unwrap();
    assert!(v["gap"].as_f64().unwrap().is_finite());

    let csv = ok(
        d,
        &[
            "eval-agreement",
            "--model",
            "lm.ckpt",
            "--data",
            "agreement.tsv",
        ],
    );
    assert_eq!(
        csv.lines().next().unwrap(),
        "n_attractors,count,errors,error_rate"
    );
    assert_eq!(csv.lines().count(), 8);
    let json = ok(
        d,
        &[
            "eval-agreement",
            "--model",
            "lm.ckpt",
            "--data",
            "agreement.tsv",
            "--json",
        ],
    );
    serde_json::from_str::<serde_json::Value>(&json).unwrap();
}

#[test]
fn run_all_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    common::write_toy_data(d, 30);
    common::write_config(d, "epochs = 2\n");
    ok(d, &["run-all", "--config", "toy.cfg"]);
    let manifest = Manifest::load(&d.join("out")).unwrap();
    assert_eq!(manifest.status, RunStatus::Complete);
    assert!(d.join("out/report/scatter.svg").is_file());

    ok(
        d,
        &[
            "report",
            "--dir",
            "out",
            "--delta-from",
            "alpha_8",
            "--delta-to",
            "alpha_0",
        ],
    );
    let table = fs::read_to_string(d.join("out/report/agreement_table.csv")).unwrap();
    assert!(
        table
            .lines()
            .last()
            .unwrap()
            .starts_with("delta(alpha_0-alpha_8),"),
        "{table}"
    );
}

#[test]
fn gen_synthetic_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen-synthetic", "--out", "a", "--seed", "3"]);
    ok(d, &["gen-synthetic", "--out", "b", "--seed", "3"]);
    for f in ["train.txt", "dev.txt", "test.txt", "agreement.tsv"] {
        assert_eq!(
            fs::read(d.join("a").join(f)).unwrap(),
            fs::read(d.join("b").join(f)).unwrap()
        );
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(antimodel(d, &["--help"]).status.code(), Some(EXIT_OK));
    assert_eq!(antimodel(d, &["--version"]).status.code(), Some(EXIT_OK));
    assert_eq!(
        antimodel(d, &["frobnicate"]).status.code(),
        Some(EXIT_USAGE)
    );
    assert_eq!(antimodel(d, &["train"]).status.code(), Some(EXIT_USAGE));
    let missing = antimodel(d, &["fit-ngram", "--input", "nope.txt", "--out", "x.ngram"]);
    assert_eq!(missing.status.code(), Some(EXIT_FAILURE));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.txt"));
}

#[test]
fn positive_alpha_requires_an_anti_model() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    common::write_toy_data(d, 10);
    let out = antimodel(
        d,
        &[
            "train",
            "--input",
            "train.txt",
            "--out",
            "lm.ckpt",
            "--alpha",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(EXIT_FAILURE));
    assert!(!d.join("lm.ckpt").exists());
}
