use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn nmgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nmgen")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn toy() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/toy50.txt")
}

fn train_small(dir: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.join("m.ckpt");
    let corpus = toy();
    let mut args = vec!["train", "--corpus", s(&corpus), "--epochs", "2", "--d-hidden", "16", "--d-emb", "8"];
    args.extend_from_slice(&["--out", s(&out)]);
    args.extend_from_slice(extra);
    let o = nmgen(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(nmgen(&["--help"]).status.code(), Some(0));
    assert_eq!(nmgen(&["--version"]).status.code(), Some(0));
    assert_eq!(nmgen(&["train", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(nmgen(&[]).status.code(), Some(1));
    assert_eq!(nmgen(&["train"]).status.code(), Some(1));
    assert_eq!(nmgen(&["train", "--corpus", "x", "--out", "y", "--oracle", "nope"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let o = nmgen(&["train", "--corpus", s(&toy()), "--out", s(&dir.path().join("m")), "--lr", "-1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    let o = nmgen(&["train", "--corpus", s(&empty), "--out", s(&dir.path().join("m"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no sentences"));
    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, "not a model").unwrap();
    assert_eq!(nmgen(&["sample", "--ckpt", s(&junk)]).status.code(), Some(2));
    assert_eq!(nmgen(&["sample", "--ckpt", s(&dir.path().join("missing"))]).status.code(), Some(2));
}

#[test]
fn train_writes_a_log_and_a_usable_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("train.log");
    let ckpt = train_small(dir.path(), &["--log", s(&log), "--aux-end", "--tree-enc", "--oracle", "annealed"]);
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("epoch=0 loss="));
    assert!(lines[0].contains(" beta=1 lr=0.001"));

    let o = nmgen(&["sample", "--ckpt", s(&ckpt), "-n", "5", "--seed", "3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 5);
    let again = nmgen(&["sample", "--ckpt", s(&ckpt), "-n", "5", "--seed", "3"]);
    assert_eq!(stdout(&o), stdout(&again));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"epochs": 3, "lr": 0.01, "oracle": "uniform", "d_hidden": 8}"#).unwrap();
    let log = dir.path().join("log");
    train_small(dir.path(), &["--config", s(&cfg), "--log", s(&log)]);
    let text = std::fs::read_to_string(&log).unwrap();
    // --epochs 2 on the command line wins over the file's 3
    assert_eq!(text.lines().count(), 2);
    assert!(text.contains("lr=0.01"));
}

#[test]
fn sample_options_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_small(dir.path(), &[]);
    let trees = dir.path().join("trees");
    let csv = dir.path().join("entropy.csv");
    let o = nmgen(&[
        "sample", "--ckpt", s(&ckpt), "-n", "3", "--emit-order", "--top-k", "5", "--temperature", "0.7",
        "--emit-trees", s(&trees), "--entropy-csv", s(&csv), "--stats-against", s(&toy()), s(&toy()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for line in stdout(&o).lines() {
        assert!(line.split(' ').filter(|w| !w.is_empty()).all(|w| w.contains('@')), "{line}");
    }
    assert_eq!(std::fs::read_dir(&trees).unwrap().count(), 3);
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("depth,entropy,count\n"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pct_novel="));

    let bad = nmgen(&["sample", "--ckpt", s(&ckpt), "--temperature", "0"]);
    assert_eq!(bad.status.code(), Some(1));
    let bad = nmgen(&["sample", "--ckpt", s(&ckpt), "-n", "0"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn completion_keeps_the_template() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_small(dir.path(), &[]);
    let o = nmgen(&["complete", "--ckpt", s(&ckpt), "--template", "(sees (dog () ()) (park () ()))", "-n", "20"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for line in stdout(&o).lines() {
        // generated words may repeat template words, so check for an
        // ordered subsequence
        let mut words = line.split(' ');
        assert!(["dog", "sees", "park"].iter().all(|t| words.any(|w| w == *t)), "{line}");
    }
    let bad = nmgen(&["complete", "--ckpt", s(&ckpt), "--template", "(sees ("]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn reorder_train_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("pairs.txt");
    std::fs::write(&data, "the cat sat\na dog ran\nthe dog sat\n").unwrap();
    let ckpt = dir.path().join("r.ckpt");
    let o = nmgen(&[
        "reorder-train", "--corpus", s(&data), "--valid", s(&data), "--epochs", "3", "--d-hidden", "8",
        "--d-emb", "8", "--out", s(&ckpt),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("val_bleu="));
    let hyp = dir.path().join("hyp.txt");
    let o = nmgen(&["reorder-eval", "--ckpt", s(&ckpt), "--data", s(&data), "--strict-permutation", "--out", s(&hyp)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("f1=") && out.contains("em=") && out.contains("bleu="));
    assert_eq!(std::fs::read_to_string(&hyp).unwrap().lines().count(), 3);

    // unconditional checkpoints are refused
    let plain = train_small(dir.path(), &[]);
    assert_eq!(nmgen(&["reorder-eval", "--ckpt", s(&plain), "--data", s(&data)]).status.code(), Some(1));
}

#[test]
fn eval_scores_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    std::fs::write(&a, "the cat sat on the mat\nhello world again and again\n").unwrap();
    let o = nmgen(&["eval", "--hyp", s(&a), "--ref", s(&a)]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("bleu=100.000000"), "{out}");
    assert!(out.contains("f1=1.000000") && out.contains("em=1.000000"));
    let b = dir.path().join("b.txt");
    std::fs::write(&b, "one line\n").unwrap();
    assert_eq!(nmgen(&["eval", "--hyp", s(&a), "--ref", s(&b)]).status.code(), Some(1));
}

#[test]
fn inspect_tree_prints_trace_and_dot() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_small(dir.path(), &[]);
    let o = nmgen(&["inspect-tree", "--ckpt", s(&ckpt), "--input", "the cat sat", "--oracle", "leftright"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("step=")).count(), 7);
    assert!(out.contains("sentence: the cat sat"));
    assert!(out.contains("average_span: 1.000"));
    assert!(out.contains("digraph"));
}

#[test]
fn tokenize_splits_punctuation() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("raw.txt");
    std::fs::write(&f, "Hi, there!\n").unwrap();
    let o = nmgen(&["tokenize", "--input", s(&f)]);
    assert_eq!(stdout(&o), "Hi , there !\n");
}
