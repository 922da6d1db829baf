use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use finefact::evaluation::{MetricReport, Prediction, ALL_CATEGORY};
use finefact::synthetic::alignment_task;
use finefact::types::write_jsonl;

fn finefact(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finefact"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn lines(path: PathBuf) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_jsonl(&dir.path().join("corpus.jsonl"), &alignment_task(n, 3, 21)).unwrap();
        Self { dir }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn run(&self, args: &[&str]) -> Output {
        finefact(self.path(), args)
    }
}

#[test]
fn extract_writes_a_document_and_a_summary_record_per_sample() {
    let ws = Workspace::new(3);
    ok(&ws.run(&[
        "extract",
        "--corpus",
        "corpus.jsonl",
        "--out",
        "frames.jsonl",
    ]));
    let recs = lines(ws.path().join("frames.jsonl"));
    assert_eq!(recs.len(), 6);
    assert_eq!(recs[0]["source"], "document");
    assert_eq!(recs[1]["source"], "summary");
    assert!(ws.path().join("extract.config.toml").exists());
}

#[test]
fn extract_rerun_is_byte_identical() {
    let ws = Workspace::new(10);
    ok(&ws.run(&["extract", "--corpus", "corpus.jsonl", "--out", "a.jsonl"]));
    ok(&ws.run(&["extract", "--corpus", "corpus.jsonl", "--out", "b.jsonl"]));
    assert_eq!(
        std::fs::read(ws.path().join("a.jsonl")).unwrap(),
        std::fs::read(ws.path().join("b.jsonl")).unwrap()
    );
}

#[test]
fn missing_corpus_exits_1_and_names_the_path() {
    let ws = Workspace::new(1);
    let out = ws.run(&["extract", "--corpus", "nowhere.jsonl", "--out", "f.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.jsonl"));
}

#[test]
fn failing_backend_exits_2() {
    let ws = Workspace::new(2);
    let out = ws.run(&[
        "extract",
        "--corpus",
        "corpus.jsonl",
        "--backend",
        "subprocess",
        "--srl-command",
        "false",
        "--out",
        "f.jsonl",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_64() {
    let ws = Workspace::new(1);
    assert_eq!(ws.run(&["train", "--no-such-flag"]).status.code(), Some(64));
    assert_eq!(ws.run(&["--help"]).status.code(), Some(0));
}

const PYTHON_SRL: &str = r#"
import json, sys
VERBS = {"sold", "bought", "painted", "found", "lost", "carried", "cleaned", "repaired", "watched", "moved"}
for line in sys.stdin:
    toks = json.loads(line)["tokens"]
    frames = []
    for i, t in enumerate(toks):
        if t.lower() in VERBS:
            args = []
            if i > 0:
                args.append({"role": "ARG0", "span": [0, i]})
            end = len(toks) - 1 if toks[-1] == "." else len(toks)
            if i + 1 < end:
                args.append({"role": "ARG1", "span": [i + 1, end]})
            frames.append({"predicate": [i, i + 1], "args": args})
    print(json.dumps({"frames": frames}), flush=True)
"#;

#[test]
fn subprocess_backend_matches_the_fixture_on_simple_sentences() {
    if Command::new("python3").arg("--version").output().is_err() {
        eprintln!("python3 not available, skipping");
        return;
    }
    let ws = Workspace::new(4);
    std::fs::write(ws.path().join("srl.py"), PYTHON_SRL).unwrap();
    ok(&ws.run(&[
        "extract",
        "--corpus",
        "corpus.jsonl",
        "--out",
        "fixture.jsonl",
    ]));
    ok(&ws.run(&[
        "extract",
        "--corpus",
        "corpus.jsonl",
        "--backend",
        "subprocess",
        "--srl-command",
        "python3 srl.py",
        "--out",
        "python.jsonl",
    ]));
    let a = lines(ws.path().join("fixture.jsonl"));
    let b = lines(ws.path().join("python.jsonl"));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(
            x["frames"].as_array().unwrap().len(),
            y["frames"].as_array().unwrap().len()
        );
        for (fx, fy) in x["frames"]
            .as_array()
            .unwrap()
            .iter()
            .zip(y["frames"].as_array().unwrap())
        {
            assert_eq!(fx["predicate"], fy["predicate"]);
        }
    }
}

#[test]
fn end_to_end_workflow() {
    let ws = Workspace::new(60);
    ok(&ws.run(&[
        "extract",
        "--corpus",
        "corpus.jsonl",
        "--out",
        "frames.jsonl",
    ]));
    ok(&ws.run(&[
        "split",
        "--corpus",
        "corpus.jsonl",
        "--mode",
        "random",
        "--sizes",
        "40,10,10",
        "--seed",
        "1",
        "--out-dir",
        "split",
    ]));
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(ws.path().join("split/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["test"].as_array().unwrap().len(), 10);
    ok(&ws.run(&["stats", "--corpus", "corpus.jsonl", "--out", "stats.json"]));

    ok(&ws.run(&[
        "train",
        "--train",
        "split/train.jsonl",
        "--validation",
        "split/validation.jsonl",
        "--frames",
        "frames.jsonl",
        "--out-dir",
        "run",
        "--hidden",
        "16",
        "--heads",
        "2",
        "--epochs",
        "2",
        "--lr",
        "0.001",
        "--batch-size",
        "4",
    ]));
    for f in ["model.ckpt", "train_log.jsonl", "train.config.toml"] {
        assert!(ws.path().join("run").join(f).exists(), "{f}");
    }
    let snapshot = std::fs::read_to_string(ws.path().join("run/train.config.toml")).unwrap();
    assert!(
        snapshot.contains("seed = 0") && snapshot.contains("heads = 2"),
        "{snapshot}"
    );
    assert_eq!(lines(ws.path().join("run/train_log.jsonl")).len(), 2);

    ok(&ws.run(&[
        "predict",
        "--checkpoint",
        "run/model.ckpt",
        "--corpus",
        "split/test.jsonl",
        "--frames",
        "frames.jsonl",
        "--out",
        "preds.jsonl",
    ]));
    let preds = lines(ws.path().join("preds.jsonl"));
    assert_eq!(preds.len(), 10);
    assert_eq!(preds[0]["probs"].as_array().unwrap().len(), 4);
    assert!(preds[0]["labels"]["intrinsic_pred"].is_number());

    ok(&ws.run(&[
        "highlight",
        "--checkpoint",
        "run/model.ckpt",
        "--corpus",
        "split/test.jsonl",
        "--frames",
        "frames.jsonl",
        "--top-k",
        "1",
        "--out",
        "hl.jsonl",
    ]));
    let hl = lines(ws.path().join("hl.jsonl"));
    assert_eq!(hl.len(), 10);
    assert!(hl
        .iter()
        .all(|r| r["highlights"].as_array().unwrap().len() == 1));

    ok(&ws.run(&[
        "evaluate",
        "--corpus",
        "split/test.jsonl",
        "--predictions",
        "preds.jsonl",
        "--out",
        "report.json",
    ]));
    let report: MetricReport =
        serde_json::from_str(&std::fs::read_to_string(ws.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report.categories[ALL_CATEGORY].samples, 10);

    let predict_again = ws.run(&[
        "predict",
        "--checkpoint",
        "run/model.ckpt",
        "--corpus",
        "split/test.jsonl",
        "--frames",
        "frames.jsonl",
        "--out",
        "preds2.jsonl",
    ]);
    ok(&predict_again);
    assert_eq!(
        std::fs::read(ws.path().join("preds.jsonl")).unwrap(),
        std::fs::read(ws.path().join("preds2.jsonl")).unwrap()
    );
}

#[test]
fn evaluating_gold_as_predictions_scores_perfectly() {
    let ws = Workspace::new(40);
    let samples = alignment_task(40, 3, 21);
    let preds: Vec<Prediction> = samples
        .iter()
        .map(|s| Prediction {
            id: s.id.clone(),
            probs: s.labels.as_f64(),
            labels: s.labels,
        })
        .collect();
    write_jsonl(&ws.path().join("gold.jsonl"), &preds).unwrap();
    ok(&ws.run(&[
        "evaluate",
        "--corpus",
        "corpus.jsonl",
        "--predictions",
        "gold.jsonl",
        "--out",
        "r.json",
    ]));
    let report: MetricReport =
        serde_json::from_str(&std::fs::read_to_string(ws.path().join("r.json")).unwrap()).unwrap();
    let all = &report.categories[ALL_CATEGORY];
    assert_eq!((all.macro_f1, all.macro_bacc), (1.0, 1.0));
}

#[test]
fn diverging_training_exits_3() {
    let ws = Workspace::new(12);
    ok(&ws.run(&[
        "extract",
        "--corpus",
        "corpus.jsonl",
        "--out",
        "frames.jsonl",
    ]));
    let out = ws.run(&[
        "train",
        "--train",
        "corpus.jsonl",
        "--validation",
        "corpus.jsonl",
        "--frames",
        "frames.jsonl",
        "--out-dir",
        "run",
        "--hidden",
        "8",
        "--heads",
        "2",
        "--epochs",
        "5",
        "--lr",
        "1e200",
        "--batch-size",
        "2",
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
