use std::path::Path;
use std::process::{Command, Output};

use spanprobe::checkpoint::{save_probe, ProbeCheckpoint};
use spanprobe_core::probe::ProbeHead;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spanprobe"))
        .current_dir(dir)
        .env_remove("SPANPROBE_JUDGE_URL")
        .env_remove("SPANPROBE_JUDGE_TOKEN")
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn help_and_bad_flags() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(d.path(), &["--help"])), 0);
    assert_eq!(code(&run(d.path(), &["--version"])), 0);
    assert_eq!(code(&run(d.path(), &["frobnicate"])), 1);
    assert_eq!(code(&run(d.path(), &["eval"])), 1);
}

#[test]
fn regularizer_on_linear_probe_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(d.path(), &["synth", "--out", "c.jsonl", "--n", "20"])), 0);
    assert_eq!(code(&run(d.path(), &["init-model", "--out", "m.spck", "--d-model", "16", "--n-heads", "2", "--d-ff", "32"])), 0);
    assert_eq!(code(&run(d.path(), &["trace", "--data", "c.jsonl", "--model", "m.spck", "--out-dir", "tr"])), 0);
    let o = run(
        d.path(),
        &["train", "--data", "c.jsonl", "--traces", "tr", "--out", "p", "--lambda-reg", "0.5", "--regularizer", "kl"],
    );
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!d.path().join("p").exists());
}

#[test]
fn malformed_records_exit_with_data_error_and_keep_the_report() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(
        d.path().join("in.jsonl"),
        "{\"id\":\"a\",\"prompt\":\"q\",\"completion\":\"Ann met Bo.\",\"spans\":[{\"text\":\"Bo\",\"label\":\"supported\"}]}\nnot json\n",
    )
    .unwrap();
    let o = run(d.path(), &["align", "--in", "in.jsonl", "--out", "out.jsonl"]);
    assert_eq!(code(&o), 2);
    assert!(d.path().join("out.jsonl.rejections.json").exists());
    assert_eq!(std::fs::read_to_string(d.path().join("out.jsonl")).unwrap().lines().count(), 1);
}

#[test]
fn annotate_without_a_judge_endpoint() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(d.path(), &["synth", "--out", "c.jsonl", "--n", "3"])), 0);
    assert_eq!(code(&run(d.path(), &["annotate", "--in", "c.jsonl", "--out", "o.jsonl"])), 1);
    // nothing listens on port 9: the judge is unreachable
    let o = run(d.path(), &["annotate", "--in", "c.jsonl", "--out", "o.jsonl", "--judge-url", "http://127.0.0.1:9/v1"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn eval_on_a_hand_scored_table() {
    let d = tempfile::tempdir().unwrap();
    // positives 0.9, 0.4; negatives 0.4, 0.1. Pairs: (0.9>0.4) (0.9>0.1)
    // (0.4=0.4 counts half) (0.4>0.1) -> 3.5 / 4.
    std::fs::write(
        d.path().join("s.csv"),
        "sample_id,span_id,method,score,label\na,0,m,0.9,1\na,1,m,0.4,0\nb,0,m,0.4,1\nb,completion,m,0.1,0\n",
    )
    .unwrap();
    assert_eq!(code(&run(d.path(), &["eval", "--scores", "s.csv", "--out", "r.json"])), 0);
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(d.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(r["methods"]["m"]["auc"].as_f64(), Some(0.875));
    // at fpr <= 0.1 only the 0.9 threshold qualifies
    assert_eq!(r["methods"]["m"]["recall_at_fpr_0_1"].as_f64(), Some(0.5));
    assert_eq!(r["inputs"][0]["file"], "s.csv");
    assert!(d.path().join("r.json.manifest.json").exists());
}

fn constant_probe(path: &Path, p: f64) {
    let head = ProbeHead { w: vec![0.0; 16], b: (p / (1.0 - p)).ln(), layer: 1 };
    save_probe(&ProbeCheckpoint { head, adapters: None, model_sha256: None }, path).unwrap();
}

#[test]
fn render_floor_defaults_to_0_4() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(d.path(), &["synth", "--out", "c.jsonl", "--n", "4"])), 0);
    assert_eq!(code(&run(d.path(), &["init-model", "--out", "m.spck", "--d-model", "16", "--n-heads", "2", "--d-ff", "32"])), 0);
    assert_eq!(code(&run(d.path(), &["trace", "--data", "c.jsonl", "--model", "m.spck", "--out-dir", "tr"])), 0);
    constant_probe(&d.path().join("low"), 0.3);
    constant_probe(&d.path().join("high"), 0.5);
    let first = std::fs::read_to_string(d.path().join("c.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    let id = first["id"].as_str().unwrap();
    let completion = first["completion"].as_str().unwrap();
    let show = |probe: &str, extra: &[&str]| {
        let mut args = vec!["render", "--data", "c.jsonl", "--sample-id", id, "--probe", probe, "--traces", "tr"];
        args.extend_from_slice(extra);
        let o = run(d.path(), &args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    assert_eq!(show("low", &[]), format!("{completion}\n"));
    assert_eq!(show("low", &["--floor", "0.3"]), format!("\x1b[48;5;217m{completion}\x1b[0m\n"));
    assert_eq!(show("high", &[]), format!("\x1b[48;5;210m{completion}\x1b[0m\n"));
    let html = show("high", &["--format", "html"]);
    assert!(html.contains("title=\"0.500\""), "{html}");
}
