use std::path::Path;
use std::process::Command;

use codemodal::cli::{self, RunConfig};
use codemodal::corpus::{write_records, CorpusRecord};
use codemodal::encoder::{Checkpoint, Encoder};
use codemodal::evaluation::synthetic::{clone_corpus, synthetic_corpus};
use codemodal::evaluation::MetricReport;
use codemodal::syntax::AstNode;
use codemodal::tokenizer::Vocab;

fn run(args: &[&str]) -> anyhow::Result<String> {
    let mut out = Vec::new();
    cli::run(std::iter::once("codemodal").chain(args.iter().copied()), &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_codemodal"))
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn toy() -> String {
    s(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/toy.toml"))
}

#[test]
fn parse_prints_identifier_and_string_leaves() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("f.mini");
    std::fs::write(&src, "x = len(\"x\")").unwrap();
    let out = run(&["parse", "--in", &s(&src), "--out-dir", &s(dir.path())]).unwrap();
    let tree = AstNode::from_json_str(&out).unwrap();
    let leaves: Vec<(String, String)> =
        tree.leaves().iter().map(|l| (l.kind.clone(), l.text.clone().unwrap())).collect();
    assert!(leaves.contains(&("identifier".into(), "x".into())));
    assert!(leaves.contains(&("identifier".into(), "len".into())));
    assert!(leaves.contains(&("string".into(), "\"x\"".into())));
    assert!(dir.path().join("parse.manifest.json").exists());

    let file = dir.path().join("tree.json");
    run(&["parse", "--in", &s(&src), "--out", &s(&file), "--out-dir", &s(dir.path())]).unwrap();
    assert_eq!(AstNode::from_json_str(&std::fs::read_to_string(&file).unwrap()).unwrap(), tree);
}

#[test]
fn unknown_subcommands_and_flags_exit_nonzero_with_usage() {
    for args in [&["frobnicate"][..], &["parse", "--bogus"], &[]] {
        let out = bin().args(args).output().unwrap();
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("Usage"), "{err}");
    }
    let help = bin().args(["pretrain", "--help"]).output().unwrap();
    assert!(help.status.success());
    let text = String::from_utf8_lossy(&help.stdout);
    for flag in ["--config", "--steps", "--seed", "--disable", "--resume", "--out-dir"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}

fn corpus(dir: &Path, records: &[CorpusRecord], size: usize) -> (String, String) {
    let path = dir.join("corpus.jsonl");
    write_records(&path, records).unwrap();
    let vocab = dir.join("vocab.txt");
    run(&["train-bpe", "--corpus", &s(&path), "--size", &size.to_string(), "--out", &s(&vocab), "--out-dir", &s(dir)])
        .unwrap();
    (s(&path), s(&vocab))
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let (c, v) = corpus(dir.path(), &synthetic_corpus(8, 8, 1), 120);
    let cases = [
        ("[encoder]\nheads = 5\n", "encoder.heads"),
        ("[train]\nlearning_rat = 1e-3\n", "train.learning_rat"),
        ("[train]\nbatch_size = \"eight\"\n", "train.batch_size"),
        ("[train.objectives]\ntep = 3\n", "train.objectives.tep"),
    ];
    for (text, field) in cases {
        let cfg = dir.path().join("bad.toml");
        std::fs::write(&cfg, text).unwrap();
        let out = bin()
            .args(["pretrain", "--corpus", &c, "--vocab", &v, "--config", &s(&cfg), "--steps", "1"])
            .env("CODEMODAL_OUT_DIR", s(&dir.path().join("run")))
            .output()
            .unwrap();
        assert!(!out.status.success());
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(field), "expected `{field}` in: {err}");
    }
}

#[test]
fn zero_steps_checkpoint_equals_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let (c, v) = corpus(dir.path(), &synthetic_corpus(8, 8, 1), 120);
    let out = dir.path().join("run");
    run(&[
        "pretrain",
        "--corpus",
        &c,
        "--vocab",
        &v,
        "--config",
        &toy(),
        "--steps",
        "0",
        "--seed",
        "5",
        "--out-dir",
        &s(&out),
    ])
    .unwrap();
    let ck = Checkpoint::load(&out.join("checkpoint.ckpt")).unwrap();
    assert_eq!(ck.step, 0);
    let mut enc = RunConfig::load(Path::new(&toy())).unwrap().encoder;
    enc.vocab_size = Vocab::load(Path::new(&v)).unwrap().len();
    assert_eq!(ck.encoder, enc);
    assert_eq!(ck.params, Encoder::init(enc, 5).unwrap().params);
    assert_eq!(std::fs::read_to_string(out.join("losses.jsonl")).unwrap(), "");
}

#[test]
fn separable_corpus_retrieves_perfectly() {
    let pairs = [
        ("add two numbers", "def add(a, b):\n    return a + b\n"),
        ("print a greeting", "def greet(name):\n    print(\"hello\")\n"),
        ("count list items", "def count(items):\n    return len(items)\n"),
        ("check if value is positive", "def positive(v):\n    if v > 0:\n        return 1\n    return 0\n"),
    ];
    let records: Vec<CorpusRecord> = pairs
        .iter()
        .map(|(c, code)| CorpusRecord {
            comment: Some(c.to_string()),
            code: Some(code.to_string()),
            ast_file: None,
            cluster_id: None,
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let (c, v) = corpus(dir.path(), &records, 100);
    let out = s(&dir.path().join("run"));
    run(&[
        "pretrain",
        "--corpus",
        &c,
        "--vocab",
        &v,
        "--config",
        &toy(),
        "--steps",
        "150",
        "--batch-size",
        "4",
        "--out-dir",
        &out,
    ])
    .unwrap();
    let ckpt = s(&dir.path().join("run/checkpoint.ckpt"));
    let printed =
        run(&["eval-search", "--corpus", &c, "--vocab", &v, "--checkpoint", &ckpt, "--out-dir", &out]).unwrap();
    let report: MetricReport = serde_json::from_str(&printed).unwrap();
    assert_eq!(report.metric, "MRR");
    assert_eq!(report.value, 1.0);
    let saved: MetricReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/eval-search.json")).unwrap()).unwrap();
    assert_eq!(saved, report);
}

#[test]
fn failed_runs_leave_no_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (c, v) = corpus(dir.path(), &synthetic_corpus(16, 16, 1), 150);
    let out = dir.path().join("run");
    let err = run(&[
        "pretrain",
        "--corpus",
        &c,
        "--vocab",
        &v,
        "--config",
        &toy(),
        "--steps",
        "30",
        "--lr",
        "1e300",
        "--checkpoint-every",
        "1",
        "--out-dir",
        &s(&out),
    ])
    .unwrap_err();
    assert!(err.to_string().contains("non-finite"), "{err:#}");
    let left: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(left.is_empty(), "left behind: {left:?}");

    let exit = bin()
        .args(["eval-search", "--corpus", &c, "--vocab", &v, "--checkpoint", "missing.ckpt"])
        .env("CODEMODAL_OUT_DIR", s(&out))
        .output()
        .unwrap();
    assert!(!exit.status.success());
    assert!(!out.join("eval-search.json").exists());
}

#[test]
fn inspect_batch_and_clone_eval_write_json() {
    let dir = tempfile::tempdir().unwrap();
    let (c, v) = corpus(dir.path(), &synthetic_corpus(16, 16, 1), 150);
    let out = s(&dir.path().join("run"));
    let dump =
        run(&["inspect-batch", "--corpus", &c, "--vocab", &v, "--config", &toy(), "--step", "1", "--out-dir", &out])
            .unwrap();
    let batch: serde_json::Value = serde_json::from_str(&dump).unwrap();
    let ex = &batch["examples"][0];
    for key in ["packed", "mask", "input", "tep", "tokens", "input_tokens"] {
        assert!(!ex[key].is_null(), "missing {key}");
    }
    assert_eq!(batch["step"], 1);
    assert!(batch["contrastive"]["pairs"].as_array().unwrap().len() >= 2);
    assert_eq!(
        run(&["inspect-batch", "--corpus", &c, "--vocab", &v, "--config", &toy(), "--step", "1", "--out-dir", &out])
            .unwrap(),
        dump
    );

    run(&["pretrain", "--corpus", &c, "--vocab", &v, "--config", &toy(), "--steps", "2", "--out-dir", &out]).unwrap();
    let clones = dir.path().join("clones.jsonl");
    write_records(&clones, &clone_corpus(4, 3, 2)).unwrap();
    let printed = run(&[
        "eval-clone",
        "--corpus",
        &s(&clones),
        "--vocab",
        &v,
        "--checkpoint",
        &format!("{out}/checkpoint.ckpt"),
        "--similarity",
        "cosine",
        "--out-dir",
        &out,
    ])
    .unwrap();
    let report: MetricReport = serde_json::from_str(&printed).unwrap();
    assert_eq!((report.metric.as_str(), report.queries), ("MAP@R", 12));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/eval-clone.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "eval-clone");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (c, v) = corpus(dir.path(), &synthetic_corpus(16, 16, 1), 150);
    let out = dir.path().join("run");
    run(&[
        "pretrain",
        "--corpus",
        &c,
        "--vocab",
        &v,
        "--config",
        &toy(),
        "--steps",
        "3",
        "--seed",
        "9",
        "--lambda",
        "0",
        "--disable",
        "tep,ip",
        "--paper-literal",
        "--out-dir",
        &s(&out),
    ])
    .unwrap();
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("pretrain.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["train"]["steps"], 3);
    assert_eq!(m["config"]["train"]["l2_lambda"], 0.0);
    assert_eq!(m["config"]["train"]["reduction"], "sum");
    assert_eq!(m["config"]["encoder"]["hidden_size"], 64);
    assert_eq!(m["config"]["active_objectives"], serde_json::json!(["mmlm", "mcl"]));
    let outputs: Vec<String> = serde_json::from_value(m["outputs"].clone()).unwrap();
    assert!(outputs.iter().any(|o| o.ends_with("checkpoint.ckpt")));
    assert!(outputs.iter().any(|o| o.ends_with("losses.jsonl")));
}
