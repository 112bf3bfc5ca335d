use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn boardsight(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boardsight")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

const QUICK: &str = "[train]\noccupancy_epochs = 0\npiece_epochs = 0\n\
[finetune]\noccupancy_head_epochs = 0\noccupancy_all_epochs = 0\npiece_head_epochs = 0\npiece_all_epochs = 0\n";

/// Synthesises two boards and zero-epoch models in `dir`.
fn setup(dir: &Path) {
    fs::write(dir.join("quick.toml"), QUICK).unwrap();
    ok(&boardsight(&["synth", "--count", "2", "--seed", "4", "--out", "data"], dir));
    ok(&boardsight(&["--config", "quick.toml", "train", "data/labels.jsonl", "--out", "models"], dir));
}

#[test]
fn synth_is_bitwise_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&boardsight(&["synth", "--count", "2", "--seed", "8", "--out", "a"], d));
    ok(&boardsight(&["--sequential", "synth", "--count", "2", "--seed", "8", "--out", "b"], d));
    for name in ["labels.jsonl", "board_0000.png", "board_0001.png"] {
        assert_eq!(fs::read(d.join("a").join(name)).unwrap(), fs::read(d.join("b").join(name)).unwrap(), "{name}");
    }
    let labels = fs::read_to_string(d.join("a/labels.jsonl")).unwrap();
    assert_eq!(labels.lines().count(), 2);
    let first: serde_json::Value = serde_json::from_str(labels.lines().next().unwrap()).unwrap();
    assert_eq!(first["image"], "board_0000.png");
    assert_eq!(first["corners"].as_array().unwrap().len(), 4);
}

#[test]
fn train_recognize_evaluate_finetune() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    assert!(d.join("models/occupancy.cvnn").exists() && d.join("models/piece.cvnn").exists());

    let fen = ok(&boardsight(&["recognize", "data/board_0000.png", "--models", "models"], d));
    assert_eq!(fen.trim().split('/').count(), 8);

    let json = ok(&boardsight(&["recognize", "data/board_0000.png", "--models", "models", "--json", "--perspective", "black"], d));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["perspective"], "black");
    assert_eq!(v["confidence"].as_array().unwrap().len(), 64);
    assert_eq!(v["corners"].as_array().unwrap().len(), 4);

    let strict = boardsight(&["recognize", "data/board_0000.png", "--models", "models", "--perspective", "black", "--strict"], d);
    if v["legality"]["legal"] == true {
        assert!(strict.status.success());
    } else {
        assert_eq!(strict.status.code(), Some(3));
        assert!(String::from_utf8_lossy(&strict.stderr).contains("warning"));
    }

    let table = ok(&boardsight(&["evaluate", "data/labels.jsonl", "--models", "models"], d));
    assert!(table.contains("per-square error rate"));
    let report: serde_json::Value =
        serde_json::from_str(&ok(&boardsight(&["evaluate", "data/labels.jsonl", "--models", "models", "--json"], d))).unwrap();
    assert_eq!(report["boards"], 2);

    let start = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR";
    let black = boardsight::synth::SynthConfig { perspective: boardsight::chessio::Perspective::Black, ..Default::default() };
    boardsight::synth::render(start, &Default::default()).unwrap().0.save(d.join("w.png")).unwrap();
    boardsight::synth::render(start, &black).unwrap().0.save(d.join("b.png")).unwrap();
    ok(&boardsight(&["--config", "quick.toml", "finetune", "w.png", "b.png", "--models", "models", "--out", "tuned"], d));
    // Zero fine-tuning epochs leave the models untouched.
    assert_eq!(fs::read(d.join("models/piece.cvnn")).unwrap(), fs::read(d.join("tuned/piece.cvnn")).unwrap());
}

#[test]
fn commands_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    setup(a.path());
    setup(b.path());
    for name in ["models/occupancy.cvnn", "models/piece.cvnn"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let run = |d: &Path| ok(&boardsight(&["recognize", "data/board_0001.png", "--models", "models", "--json"], d));
    assert_eq!(run(a.path()), run(b.path()));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.toml"), "no_such_key = 1\n").unwrap();
    let out = boardsight(&["--config", "bad.toml", "synth", "--count", "1", "--out", "x"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));

    let out = boardsight(&["recognize", "missing.png", "--models", "nowhere"], d);
    assert!(!out.status.success());
    let out = boardsight(&["frobnicate"], d);
    assert!(!out.status.success());
}

#[test]
fn out_of_image_corners_warn_but_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    let labels = fs::read_to_string(d.join("data/labels.jsonl")).unwrap();
    let mut first: serde_json::Value = serde_json::from_str(labels.lines().next().unwrap()).unwrap();
    first["corners"][0] = serde_json::json!([-5000.0, -5000.0]);
    fs::write(d.join("data/shifted.jsonl"), format!("{first}\n")).unwrap();
    let out = boardsight(&["evaluate", "data/shifted.jsonl", "--models", "models"], d);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("labels line 1"));
}
