use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mmcode::synthetic::templated_corpus;
use tempfile::TempDir;

fn mmcode(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmcode"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = mmcode(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_corpus(dir: &Path, n: usize) -> PathBuf {
    let path = dir.join("corpus.jsonl");
    let mut text = String::new();
    for rec in templated_corpus().iter().step_by(64 / n) {
        text += &serde_json::to_string(rec).unwrap();
        text.push('\n');
    }
    text += r#"{"id":"broken","code":"int f( {","description":"nothing"}"#;
    text.push('\n');
    fs::write(&path, text).unwrap();
    path
}

const SMALL: [&str; 8] = [
    "--set",
    "embed_dim=8",
    "--set",
    "hidden_dim=8",
    "--set",
    "common_dim=8",
    "--set",
    "ggnn_rounds=2",
];

/// extract, split, train, index, eval; returns the run directory.
fn pipeline(root: &Path, seed: &str) -> PathBuf {
    let dir = root.join(format!("run-{seed}"));
    fs::create_dir_all(&dir).unwrap();
    write_corpus(&dir, 16);
    let s = ok(
        &dir,
        &[
            "extract",
            "--input",
            "corpus.jsonl",
            "--output",
            "data.jsonl",
        ],
    );
    assert_eq!(s.trim(), "extracted 16 skipped 1");
    ok(
        &dir,
        &[
            "--seed",
            seed,
            "split",
            "--input",
            "data.jsonl",
            "--train",
            "train.jsonl",
            "--test",
            "test.jsonl",
            "--test-ratio",
            "0.25",
        ],
    );
    let mut train = vec![
        "--seed",
        seed,
        "train",
        "--dataset",
        "train.jsonl",
        "--out-dir",
        "model",
        "--epochs",
        "3",
    ];
    train.extend(SMALL);
    ok(&dir, &train);
    ok(
        &dir,
        &[
            "index",
            "--checkpoint",
            "model/final.mman",
            "--dataset",
            "data.jsonl",
            "--output",
            "index.bin",
        ],
    );
    ok(
        &dir,
        &[
            "eval",
            "--checkpoint",
            "model/final.mman",
            "--index",
            "index.bin",
            "--dataset",
            "test.jsonl",
            "--report",
            "report.json",
        ],
    );
    dir
}

#[test]
fn pipeline_is_bitwise_reproducible() {
    let tmp = TempDir::new().unwrap();
    let a = pipeline(tmp.path(), "7");
    let b = {
        let dir = tmp.path().join("again");
        fs::create_dir_all(&dir).unwrap();
        pipeline(&dir, "7")
    };
    for file in [
        "data.jsonl",
        "train.jsonl",
        "test.jsonl",
        "model/checkpoint-0001.mman",
        "model/checkpoint-0002.mman",
        "model/checkpoint-0003.mman",
        "model/final.mman",
        "index.bin",
        "report.json",
    ] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let c = pipeline(tmp.path(), "8");
    assert_ne!(
        fs::read(a.join("model/final.mman")).unwrap(),
        fs::read(c.join("model/final.mman")).unwrap()
    );
}

#[test]
fn train_writes_stats_and_vocabularies() {
    let tmp = TempDir::new().unwrap();
    let dir = pipeline(tmp.path(), "42");
    let stats = fs::read_to_string(dir.join("model/stats.jsonl")).unwrap();
    assert_eq!(stats.lines().count(), 3);
    for name in ["code", "ast", "desc"] {
        let vocab = fs::read_to_string(dir.join(format!("model/vocab.{name}.tsv"))).unwrap();
        assert!(vocab.starts_with("0\t<PAD>\n1\t<UNK>\n"));
    }
    let config = fs::read_to_string(dir.join("model/config.txt")).unwrap();
    assert!(config.lines().any(|l| l == "hidden_dim=8"), "{config}");
}

#[test]
fn search_prints_k_hits_with_excerpts() {
    let tmp = TempDir::new().unwrap();
    let dir = pipeline(tmp.path(), "42");
    let out = ok(
        &dir,
        &[
            "search",
            "--checkpoint",
            "model/final.mman",
            "--index",
            "index.bin",
            "--query",
            "compute the sum of all scores",
            "-k",
            "4",
        ],
    );
    let hits: Vec<&str> = out.lines().filter(|l| !l.starts_with("        ")).collect();
    assert_eq!(hits.len(), 4);
    assert!(hits[0].trim_start().starts_with("1 "));
    let with_src = ok(
        &dir,
        &[
            "search",
            "--checkpoint",
            "model/final.mman",
            "--index",
            "index.bin",
            "--query",
            "sum",
            "-k",
            "2",
            "--corpus",
            "corpus.jsonl",
        ],
    );
    assert!(with_src.lines().any(|l| l.starts_with("        int ")));
}

#[test]
fn inspect_attention_reports_every_element() {
    let tmp = TempDir::new().unwrap();
    let dir = pipeline(tmp.path(), "42");
    let data = fs::read_to_string(dir.join("data.jsonl")).unwrap();
    let rec: mmcode::ExtractedRecord = serde_json::from_str(data.lines().next().unwrap()).unwrap();
    let out = ok(
        &dir,
        &[
            "inspect-attention",
            "--checkpoint",
            "model/final.mman",
            "--dataset",
            "data.jsonl",
            "--id",
            &rec.id,
        ],
    );
    let lines: Vec<serde_json::Value> = out
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let count = |m: &str| lines.iter().filter(|v| v["modality"] == m).count();
    assert_eq!(count("tok"), rec.code_tokens().len());
    assert_eq!(count("ast"), rec.ast.len());
    assert_eq!(count("cfg"), rec.cfg.len());
    let weights = |m: &str| -> Vec<f64> {
        lines
            .iter()
            .filter(|v| v["modality"] == m)
            .map(|v| v["weight"].as_f64().unwrap())
            .collect()
    };
    for m in ["tok", "ast"] {
        let total: f64 = weights(m).iter().sum();
        assert!((total - 1.0).abs() < 1e-5, "{m}: {total}");
    }
    assert!(weights("cfg").iter().all(|w| (0.0..=1.0).contains(w)));
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    assert_eq!(mmcode(dir, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(mmcode(dir, &["train"]).status.code(), Some(1));
    assert_eq!(mmcode(dir, &["--help"]).status.code(), Some(0));
    assert_eq!(
        mmcode(
            dir,
            &["extract", "--input", "missing.jsonl", "--output", "x"]
        )
        .status
        .code(),
        Some(2)
    );
    fs::write(dir.join("junk.jsonl"), "{not json\n").unwrap();
    assert_eq!(
        mmcode(dir, &["extract", "--input", "junk.jsonl", "--output", "x"])
            .status
            .code(),
        Some(2)
    );
    fs::write(dir.join("junk.mman"), b"not a checkpoint").unwrap();
    assert_eq!(
        mmcode(
            dir,
            &[
                "index",
                "--checkpoint",
                "junk.mman",
                "--dataset",
                "x",
                "--output",
                "y"
            ]
        )
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn index_from_other_checkpoint_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let dir = pipeline(tmp.path(), "42");
    let out = mmcode(
        &dir,
        &[
            "eval",
            "--checkpoint",
            "model/checkpoint-0001.mman",
            "--index",
            "index.bin",
            "--dataset",
            "test.jsonl",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("different checkpoint"));
}

#[test]
fn unknown_id_and_bad_config_are_data_errors() {
    let tmp = TempDir::new().unwrap();
    let dir = pipeline(tmp.path(), "42");
    let out = mmcode(
        &dir,
        &[
            "inspect-attention",
            "--checkpoint",
            "model/final.mman",
            "--dataset",
            "data.jsonl",
            "--id",
            "nope",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = mmcode(
        &dir,
        &[
            "train",
            "--dataset",
            "train.jsonl",
            "--out-dir",
            "m2",
            "--set",
            "hidden_dim=zero",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn f64_checkpoints_are_dispatched() {
    let tmp = TempDir::new().unwrap();
    let dir = pipeline(tmp.path(), "42");
    let mut train = vec![
        "train",
        "--dataset",
        "train.jsonl",
        "--out-dir",
        "m64",
        "--epochs",
        "1",
        "--set",
        "precision=64",
    ];
    train.extend(SMALL);
    ok(&dir, &train);
    ok(
        &dir,
        &[
            "index",
            "--checkpoint",
            "m64/final.mman",
            "--dataset",
            "data.jsonl",
            "--output",
            "ix64.bin",
        ],
    );
    let out = ok(
        &dir,
        &[
            "eval",
            "--checkpoint",
            "m64/final.mman",
            "--index",
            "ix64.bin",
            "--dataset",
            "data.jsonl",
        ],
    );
    assert!(out.contains("MRR"));
}
