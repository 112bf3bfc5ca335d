use std::sync::Mutex;

use boardsight::chessio::{emit_fen, parse_fen, save_labels, Perspective, Position, STARTING_FEN};
use boardsight::image::Image;
use boardsight::pipeline::*;
use boardsight::synth::{render, SynthConfig};

/// Oracle that records every board square it was asked to classify.
struct Spy {
    oracle: OracleClassifier,
    piece_calls: Mutex<Vec<usize>>,
}

impl SquareClassifier for Spy {
    fn occupancy(&self, crops: &[SquareCrop]) -> Result<Vec<Vec<f64>>, PipelineError> {
        self.oracle.occupancy(crops)
    }

    fn pieces(&self, crops: &[SquareCrop]) -> Result<Vec<Vec<f64>>, PipelineError> {
        self.piece_calls.lock().unwrap().extend(crops.iter().map(|c| c.board.index()));
        self.oracle.pieces(crops)
    }
}

fn oracle(fen: &str) -> OracleClassifier {
    OracleClassifier { position: parse_fen(fen).unwrap() }
}

#[test]
fn oracle_round_trip_in_both_perspectives() {
    let fen = "r3k2r/ppp2ppp/2n5/3qp3/8/2N2N2/PPP2PPP/R2QK2R";
    for perspective in [Perspective::White, Perspective::Black] {
        let cfg = SynthConfig { perspective, seed: 5, ..SynthConfig::default() };
        let (img, _) = render(fen, &cfg).unwrap();
        let r = recognize(&img, &oracle(fen), perspective, &PipelineConfig::default()).unwrap();
        assert_eq!(r.fen, fen);
        assert_eq!(emit_fen(&parse_fen(&r.fen).unwrap()), r.fen);
        assert_eq!(r.perspective, perspective);
        assert!(r.confidence.iter().all(|c| (0.0..=1.0).contains(c)));
    }
}

#[test]
fn piece_stage_only_sees_occupied_squares() {
    let fen = "8/8/3k4/8/8/4K3/8/8";
    let (img, rec) = render(fen, &SynthConfig { seed: 9, ..SynthConfig::default() }).unwrap();
    let spy = Spy { oracle: oracle(fen), piece_calls: Mutex::new(Vec::new()) };
    let r = recognize(&img, &spy, rec.perspective, &PipelineConfig::default()).unwrap();
    assert_eq!(r.fen, fen);
    let mut calls = spy.piece_calls.into_inner().unwrap();
    calls.sort();
    let occupied: Vec<usize> = parse_fen(fen).unwrap().pieces().map(|(s, _)| s.index()).collect();
    assert_eq!(calls, occupied);
}

#[test]
fn illegal_positions_are_reported_not_fixed() {
    let fen = "P3k3/8/8/8/8/8/8/4K3";
    let (img, rec) = render(fen, &SynthConfig::default()).unwrap();
    let r = recognize(&img, &oracle(fen), rec.perspective, &PipelineConfig::default()).unwrap();
    assert_eq!(r.fen, fen);
    assert!(!r.legality.legal);
    assert!(!r.legality.violations.is_empty());
}

#[test]
fn blank_image_fails_localisation() {
    let img = Image::filled(320, 240, 3, 0.5);
    let err = recognize(&img, &oracle(STARTING_FEN), Perspective::White, &PipelineConfig::default()).unwrap_err();
    assert!(matches!(err, PipelineError::Locate(_)), "{err}");
}

#[test]
fn recognition_json_mirrors_fields() {
    let (img, rec) = render(STARTING_FEN, &SynthConfig::default()).unwrap();
    let r = recognize(&img, &oracle(STARTING_FEN), rec.perspective, &PipelineConfig::default()).unwrap();
    let v: serde_json::Value = serde_json::to_value(&r).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(keys, ["confidence", "corners", "fen", "legality", "perspective", "position"]);
    assert_eq!(v["position"]["e1"], "K");
    assert_eq!(v["position"].as_object().unwrap().len(), 32);
    assert_eq!(v["confidence"].as_array().unwrap().len(), 64);
    assert_eq!(v["legality"]["legal"], true);
}

#[test]
fn evaluation_self_test_and_single_corruption() {
    let fen = "4k3/pppppppp/8/8/8/8/PPPPPPPP/4K3";
    let n = 4;
    let mut images = Vec::new();
    let mut records = Vec::new();
    for seed in 0..n {
        let (img, rec) = render(fen, &SynthConfig { seed, ..SynthConfig::default() }).unwrap();
        images.push(img);
        records.push(rec);
    }
    let cfg = PipelineConfig::default();
    let (clean, outcomes) = evaluate_records(&records, &images, &oracle(fen), &cfg).unwrap();
    assert_eq!(clean.mean_incorrect_squares, 0.0);
    assert_eq!(clean.pct_boards_no_mistakes, 100.0);
    assert!(outcomes.iter().all(|o| o.error.is_none()));

    let mut p: Position = parse_fen(fen).unwrap();
    let e4 = boardsight::chessio::Square::new(4, 3).unwrap();
    p.set(e4, boardsight::chessio::Piece::from_char('Q'));
    records[2].fen = emit_fen(&p);
    let (dirty, _) = evaluate_records(&records, &images, &oracle(fen), &cfg).unwrap();
    assert!((dirty.mean_incorrect_squares - 1.0 / n as f64).abs() < 1e-12);
}

#[test]
fn empty_label_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.jsonl");
    std::fs::write(&path, "").unwrap();
    assert!(evaluate_labels(&path, &oracle(STARTING_FEN), &PipelineConfig::default()).is_err());
}

#[test]
fn evaluate_from_disk_matches_in_memory() {
    let dir = tempfile::tempdir().unwrap();
    let mut records = Vec::new();
    let mut images = Vec::new();
    for seed in 0..2u64 {
        let (img, mut rec) = render(STARTING_FEN, &SynthConfig { seed, ..SynthConfig::default() }).unwrap();
        rec.image = format!("b{seed}.png");
        img.save(dir.path().join(&rec.image)).unwrap();
        images.push(Image::load(dir.path().join(&rec.image)).unwrap());
        records.push(rec);
    }
    let labels = dir.path().join("labels.jsonl");
    save_labels(&records, &labels).unwrap();
    let cfg = PipelineConfig::default();
    let (from_disk, _) = evaluate_labels(&labels, &oracle(STARTING_FEN), &cfg).unwrap();
    let (in_memory, _) = evaluate_records(&records, &images, &oracle(STARTING_FEN), &cfg).unwrap();
    assert_eq!(from_disk, in_memory);
    assert_eq!(from_disk.mean_incorrect_squares, 0.0);
}

#[test]
fn synth_dataset_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.synth.width = 320;
    cfg.synth.height = 240;
    let la = synth_dataset(3, 42, a.path(), &cfg).unwrap();
    let lb = synth_dataset(3, 42, b.path(), &cfg).unwrap();
    assert_eq!(la, lb);
    for name in ["labels.jsonl", "board_0000.png", "board_0002.png"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn config_toml_round_trip() {
    let mut cfg = PipelineConfig::default();
    cfg.seed = 17;
    cfg.crop.square_px = 40;
    cfg.finetune.augment_pieces = false;
    cfg.synth.perspective = Some(Perspective::Black);
    let text = toml::to_string(&cfg).unwrap();
    assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
}

#[test]
fn models_round_trip_through_directory() {
    let dir = tempfile::tempdir().unwrap();
    let exec = boardsight::parallel::Execution::Sequential;
    let c = NetClassifier::untrained(3, exec);
    c.save(dir.path()).unwrap();
    let back = NetClassifier::load(dir.path(), exec).unwrap();
    assert_eq!(back.occupancy.params, c.occupancy.params);
    assert_eq!(back.piece.params, c.piece.params);
    // Swapped files are rejected by shape.
    std::fs::rename(dir.path().join(OCCUPANCY_MODEL), dir.path().join("tmp")).unwrap();
    std::fs::rename(dir.path().join(PIECE_MODEL), dir.path().join(OCCUPANCY_MODEL)).unwrap();
    std::fs::rename(dir.path().join("tmp"), dir.path().join(PIECE_MODEL)).unwrap();
    assert!(NetClassifier::load(dir.path(), exec).is_err());
    assert!(NetClassifier::load(dir.path().join("missing"), exec).is_err());
}

#[test]
fn readme_config_block_is_the_default() {
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
    let start = readme.find("```toml\n").unwrap() + 8;
    let len = readme[start..].find("```").unwrap();
    assert_eq!(PipelineConfig::from_toml(&readme[start..start + len]).unwrap(), PipelineConfig::default());
}
