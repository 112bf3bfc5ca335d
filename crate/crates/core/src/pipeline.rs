//! The full recognition pipeline and the operations behind the command-line
//! tool: recognise, train, fine-tune, evaluate and synthesise.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapt::{finetune, AdaptError, AugmentSpec, FewShotSet, FinetuneConfig};
use crate::boardloc::{locate_corners, LocateConfig, LocateError};
use crate::chessio::{
    emit_fen, evaluate, legality_check, load_labels, save_labels, EvalError, EvalReport, LabelError, LabelRecord,
    Legality, Perspective, Piece, Position, Square,
};
use crate::cropper::{occupancy_crops, piece_crops, warp_image, CropConfig, CropError};
use crate::dataset::{record_samples, DatasetError, Samples, OCCUPIED};
use crate::geometry::CornerSet;
use crate::image::{Image, ImageError};
use crate::nnet::{
    argmax, build_occupancy_net, build_piece_net, load_network, predict, save_network, train, Network, NnError,
    TrainRegimen, OCCUPANCY_INPUT, PIECE_INPUT,
};
use crate::parallel::Execution;
use crate::synth::{render, sample_positions, Palette, SynthConfig, SynthError};

pub const OCCUPANCY_MODEL: &str = "occupancy.cvnn";
pub const PIECE_MODEL: &str = "piece.cvnn";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Locate(#[from] LocateError),
    #[error(transparent)]
    Crop(#[from] CropError),
    #[error("{path}: {source}")]
    Model { path: String, source: NnError },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("{path}: {source}")]
    Image { path: String, source: ImageError },
    #[error(transparent)]
    Labels(#[from] LabelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Adapt(#[from] AdaptError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("config: {0}")]
    Config(String),
    #[error("classifier: {0}")]
    Classifier(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub occupancy_epochs: usize,
    pub piece_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self { occupancy_epochs: 3, piece_epochs: 3, batch_size: 128, learning_rate: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneSettings {
    pub occupancy_head_epochs: usize,
    pub occupancy_all_epochs: usize,
    pub piece_head_epochs: usize,
    pub piece_all_epochs: usize,
    pub head_learning_rate: f64,
    pub all_learning_rate: f64,
    pub batch_size: usize,
    pub augment_pieces: bool,
}

impl Default for FinetuneSettings {
    fn default() -> Self {
        Self {
            occupancy_head_epochs: 100,
            occupancy_all_epochs: 100,
            piece_head_epochs: 100,
            piece_all_epochs: 150,
            head_learning_rate: 1e-3,
            all_learning_rate: 1e-4,
            batch_size: 16,
            augment_pieces: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub width: usize,
    pub height: usize,
    pub noise: f64,
    pub line_jitter: f64,
    /// Render with the alternative palette and glyphs.
    pub restyled: bool,
    /// Perspective of every board; random per board when absent.
    pub perspective: Option<Perspective>,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self { width: 640, height: 480, noise: 0.0, line_jitter: 0.0, restyled: false, perspective: None }
    }
}

/// Everything the commands read from the optional TOML config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub perspective: Perspective,
    pub models: PathBuf,
    pub seed: u64,
    /// Fan work out over threads; results are identical either way.
    pub parallel: bool,
    pub locate: LocateConfig,
    pub crop: CropConfig,
    pub augment: AugmentSpec,
    pub train: TrainSettings,
    pub finetune: FinetuneSettings,
    pub synth: SynthSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            perspective: Perspective::White,
            models: PathBuf::from("models"),
            seed: 0,
            parallel: true,
            locate: LocateConfig::default(),
            crop: CropConfig::default(),
            augment: AugmentSpec::default(),
            train: TrainSettings::default(),
            finetune: FinetuneSettings::default(),
            synth: SynthSettings::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn execution(&self) -> Execution {
        if self.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    pub fn finetune_config(&self) -> FinetuneConfig {
        let f = &self.finetune;
        let regimen = |head, all, seed| {
            let mut r = FinetuneConfig::regimen(head, all, f.batch_size, seed);
            r.stages[0].learning_rate = f.head_learning_rate;
            r.stages[1].learning_rate = f.all_learning_rate;
            r
        };
        FinetuneConfig {
            augment: self.augment,
            augment_pieces: f.augment_pieces,
            occupancy: regimen(f.occupancy_head_epochs, f.occupancy_all_epochs, self.seed),
            piece: regimen(f.piece_head_epochs, f.piece_all_epochs, self.seed.wrapping_add(1)),
            locate: self.locate.clone(),
            crop: self.crop,
        }
    }
}

/// A crop handed to a classifier, with the square it shows.
#[derive(Clone, Copy, Debug)]
pub struct SquareCrop<'a> {
    /// Camera frame: file 0 on the left, rank 0 nearest the camera.
    pub camera: Square,
    pub board: Square,
    pub image: &'a Image,
}

/// The two classification stages. Each returns one probability row per crop:
/// `[empty, occupied]` for occupancy, the twelve classes of
/// [`Piece::index`] for pieces.
pub trait SquareClassifier: Sync {
    fn occupancy(&self, crops: &[SquareCrop]) -> Result<Vec<Vec<f64>>, PipelineError>;
    fn pieces(&self, crops: &[SquareCrop]) -> Result<Vec<Vec<f64>>, PipelineError>;
}

/// The trained networks.
#[derive(Clone, Debug)]
pub struct NetClassifier {
    pub occupancy: Network,
    pub piece: Network,
    pub exec: Execution,
}

impl NetClassifier {
    pub fn new(occupancy: Network, piece: Network, exec: Execution) -> Result<Self, PipelineError> {
        let bad = |what: &str| Err(PipelineError::Classifier(format!("{what} network has the wrong shape")));
        if occupancy.class_count != 2 || occupancy.input_shape != OCCUPANCY_INPUT {
            return bad("occupancy");
        }
        if piece.class_count != Piece::COUNT || piece.input_shape != PIECE_INPUT {
            return bad("piece");
        }
        Ok(Self { occupancy, piece, exec })
    }

    /// Loads `occupancy.cvnn` and `piece.cvnn` from `dir`.
    pub fn load(dir: impl AsRef<Path>, exec: Execution) -> Result<Self, PipelineError> {
        let load = |name: &str| {
            let path = dir.as_ref().join(name);
            load_network(&path).map_err(|source| PipelineError::Model { path: path.display().to_string(), source })
        };
        Self::new(load(OCCUPANCY_MODEL)?, load(PIECE_MODEL)?, exec)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), PipelineError> {
        fs::create_dir_all(dir.as_ref())?;
        for (net, name) in [(&self.occupancy, OCCUPANCY_MODEL), (&self.piece, PIECE_MODEL)] {
            let path = dir.as_ref().join(name);
            save_network(net, &path).map_err(|source| PipelineError::Model { path: path.display().to_string(), source })?;
        }
        Ok(())
    }

    /// Freshly initialised networks.
    pub fn untrained(seed: u64, exec: Execution) -> Self {
        Self { occupancy: build_occupancy_net(seed), piece: build_piece_net(seed.wrapping_add(1)), exec }
    }
}

impl SquareClassifier for NetClassifier {
    fn occupancy(&self, crops: &[SquareCrop]) -> Result<Vec<Vec<f64>>, PipelineError> {
        let imgs: Vec<&Image> = crops.iter().map(|c| c.image).collect();
        Ok(predict(&self.occupancy, &imgs, self.exec)?)
    }

    fn pieces(&self, crops: &[SquareCrop]) -> Result<Vec<Vec<f64>>, PipelineError> {
        let imgs: Vec<&Image> = crops.iter().map(|c| c.image).collect();
        Ok(predict(&self.piece, &imgs, self.exec)?)
    }
}

/// Answers from a known position, ignoring the pixels.
#[derive(Clone, Debug)]
pub struct OracleClassifier {
    pub position: Position,
}

impl SquareClassifier for OracleClassifier {
    fn occupancy(&self, crops: &[SquareCrop]) -> Result<Vec<Vec<f64>>, PipelineError> {
        Ok(crops
            .iter()
            .map(|c| if self.position.get(c.board).is_some() { vec![0.0, 1.0] } else { vec![1.0, 0.0] })
            .collect())
    }

    fn pieces(&self, crops: &[SquareCrop]) -> Result<Vec<Vec<f64>>, PipelineError> {
        crops
            .iter()
            .map(|c| {
                let piece = self.position.get(c.board).ok_or_else(|| {
                    PipelineError::Classifier(format!("piece requested for empty square {}", c.board))
                })?;
                let mut p = vec![0.0; Piece::COUNT];
                p[piece.index()] = 1.0;
                Ok(p)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Recognition {
    pub position: Position,
    pub fen: String,
    /// Board corners in image pixels, clockwise from the top-left.
    pub corners: [[f64; 2]; 4],
    pub legality: Legality,
    /// Probability of the chosen label per board square (index
    /// `rank·8 + file`): the occupancy maximum, times the piece maximum on
    /// occupied squares.
    pub confidence: Vec<f64>,
    pub perspective: Perspective,
}

/// Locates the board, classifies every square's occupancy, then classifies
/// the occupied squares' pieces.
pub fn recognize(
    img: &Image,
    classifier: &dyn SquareClassifier,
    perspective: Perspective,
    cfg: &PipelineConfig,
) -> Result<Recognition, PipelineError> {
    let loc = locate_corners(img, &cfg.locate)?;
    recognize_located(img, &loc.corners, classifier, perspective, cfg)
}

/// The classification stages for a board with known corners.
pub fn recognize_located(
    img: &Image,
    corners: &CornerSet,
    classifier: &dyn SquareClassifier,
    perspective: Perspective,
    cfg: &PipelineConfig,
) -> Result<Recognition, PipelineError> {
    let exec = cfg.execution();
    let h = corners.board_homography().map_err(CropError::from)?;
    let warped = warp_image(img, &h, &cfg.crop)?;
    let squares: Vec<Square> = Square::all().collect();
    let occ_imgs = occupancy_crops(&warped, &squares, &cfg.crop, exec);
    let occ_crops: Vec<SquareCrop> = squares
        .iter()
        .zip(&occ_imgs)
        .map(|(&camera, image)| SquareCrop { camera, board: perspective.to_board(camera), image })
        .collect();
    let occ = classifier.occupancy(&occ_crops)?;
    check_rows(&occ, squares.len(), 2, "occupancy")?;

    let mut confidence = vec![0.0; 64];
    let mut occupied = Vec::new();
    for (c, p) in occ_crops.iter().zip(&occ) {
        confidence[c.board.index()] = p[argmax(p)];
        if argmax(p) == OCCUPIED {
            occupied.push(c.camera);
        }
    }
    let piece_imgs = piece_crops(&warped, &occupied, &cfg.crop, exec);
    let piece_crops: Vec<SquareCrop> = occupied
        .iter()
        .zip(&piece_imgs)
        .map(|(&camera, image)| SquareCrop { camera, board: perspective.to_board(camera), image })
        .collect();
    let pieces = if piece_crops.is_empty() { Vec::new() } else { classifier.pieces(&piece_crops)? };
    check_rows(&pieces, piece_crops.len(), Piece::COUNT, "piece")?;

    let mut position = Position::empty();
    for (c, p) in piece_crops.iter().zip(&pieces) {
        let k = argmax(p);
        position.set(c.board, Piece::from_index(k));
        confidence[c.board.index()] *= p[k];
    }
    Ok(Recognition {
        fen: emit_fen(&position),
        legality: legality_check(&position),
        position,
        corners: corners.as_arrays(),
        confidence,
        perspective,
    })
}

fn check_rows(rows: &[Vec<f64>], n: usize, classes: usize, stage: &str) -> Result<(), PipelineError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != classes) {
        return Err(PipelineError::Classifier(format!("{stage} stage returned malformed probabilities")));
    }
    Ok(())
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image, PipelineError> {
    let path = path.as_ref();
    Image::load(path).map_err(|source| PipelineError::Image { path: path.display().to_string(), source })
}

/// Per-board outcome of [`evaluate_labels`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoardOutcome {
    pub image: String,
    pub recognition: Option<Recognition>,
    pub error: Option<String>,
}

/// Recognises every labelled image (in its labelled perspective) and scores
/// the results. Localisation failures count as fully wrong boards.
pub fn evaluate_labels(
    labels_path: impl AsRef<Path>,
    classifier: &dyn SquareClassifier,
    cfg: &PipelineConfig,
) -> Result<(EvalReport, Vec<BoardOutcome>), PipelineError> {
    let labels_path = labels_path.as_ref();
    let records = load_labels(labels_path)?;
    let mut images = Vec::with_capacity(records.len());
    for r in &records {
        images.push(load_image(r.image_path(labels_path))?);
    }
    evaluate_records(&records, &images, classifier, cfg)
}

pub fn evaluate_records(
    records: &[LabelRecord],
    images: &[Image],
    classifier: &dyn SquareClassifier,
    cfg: &PipelineConfig,
) -> Result<(EvalReport, Vec<BoardOutcome>), PipelineError> {
    let mut preds = Vec::with_capacity(records.len());
    let mut corners = Vec::with_capacity(records.len());
    let mut widths = Vec::with_capacity(records.len());
    let mut outcomes = Vec::with_capacity(records.len());
    for (r, img) in records.iter().zip(images) {
        widths.push(img.width() as f64);
        match recognize(img, classifier, r.perspective, cfg) {
            Ok(rec) => {
                preds.push(Some(rec.position.clone()));
                corners.push(Some(CornerSet::new(rec.corners.map(|[x, y]| crate::geometry::Point::new(x, y)))));
                outcomes.push(BoardOutcome { image: r.image.clone(), recognition: Some(rec), error: None });
            }
            Err(PipelineError::Locate(e)) => {
                preds.push(None);
                corners.push(None);
                outcomes.push(BoardOutcome { image: r.image.clone(), recognition: None, error: Some(e.to_string()) });
            }
            Err(e) => return Err(e),
        }
    }
    let report = evaluate(&preds, records, &corners, &widths)?;
    Ok((report, outcomes))
}

/// Classifier samples from every labelled image, using the labelled corners.
pub fn label_samples(labels_path: impl AsRef<Path>, cfg: &PipelineConfig) -> Result<Samples, PipelineError> {
    let labels_path = labels_path.as_ref();
    let records = load_labels(labels_path)?;
    let mut all = Samples::default();
    for r in &records {
        all.extend(record_samples(r, labels_path, &cfg.crop, cfg.execution())?);
    }
    Ok(all)
}

/// Summary of a training run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainReport {
    pub occupancy_samples: usize,
    pub piece_samples: usize,
    pub occupancy_final_loss: Option<f64>,
    pub piece_final_loss: Option<f64>,
}

/// Trains both networks from scratch on `samples`.
pub fn train_classifiers(samples: &Samples, cfg: &PipelineConfig) -> Result<(NetClassifier, TrainReport), PipelineError> {
    let exec = cfg.execution();
    let t = &cfg.train;
    let regimen = |epochs, seed| {
        let mut r = TrainRegimen::standard(epochs, seed);
        r.batch_size = t.batch_size;
        r.stages[0].learning_rate = t.learning_rate;
        r
    };
    let base = NetClassifier::untrained(cfg.seed, exec);
    let (occupancy, occ_trace) = train(&base.occupancy, &samples.occupancy, &regimen(t.occupancy_epochs, cfg.seed), exec)?;
    let (piece, piece_trace) =
        train(&base.piece, &samples.pieces, &regimen(t.piece_epochs, cfg.seed.wrapping_add(1)), exec)?;
    let report = TrainReport {
        occupancy_samples: samples.occupancy.len(),
        piece_samples: samples.pieces.len(),
        occupancy_final_loss: occ_trace.last().copied(),
        piece_final_loss: piece_trace.last().copied(),
    };
    Ok((NetClassifier::new(occupancy, piece, exec)?, report))
}

/// Fine-tunes `base` on two starting-position photos.
pub fn finetune_classifiers(
    base: &NetClassifier,
    white_view: Image,
    black_view: Image,
    cfg: &PipelineConfig,
) -> Result<NetClassifier, PipelineError> {
    let shots = FewShotSet { white_view, black_view };
    let (occupancy, piece) = finetune(&base.occupancy, &base.piece, &shots, &cfg.finetune_config(), cfg.execution())?;
    NetClassifier::new(occupancy, piece, base.exec)
}

/// Renders `count` random positions with random cameras into `out`, writing
/// `board_NNNN.png` images and `labels.jsonl`.
pub fn synth_dataset(count: usize, seed: u64, out: impl AsRef<Path>, cfg: &PipelineConfig) -> Result<Vec<LabelRecord>, PipelineError> {
    let out = out.as_ref();
    fs::create_dir_all(out)?;
    let records = synth_records(count, seed, &cfg.synth)?;
    let mut labels = Vec::with_capacity(count);
    for (img, rec) in records {
        img.save(out.join(&rec.image)).map_err(|source| PipelineError::Image { path: rec.image.clone(), source })?;
        labels.push(rec);
    }
    save_labels(&labels, out.join("labels.jsonl"))?;
    Ok(labels)
}

/// In-memory version of [`synth_dataset`].
pub fn synth_records(count: usize, seed: u64, s: &SynthSettings) -> Result<Vec<(Image, LabelRecord)>, PipelineError> {
    let fens = sample_positions(count, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut out = Vec::with_capacity(count);
    for (i, fen) in fens.iter().enumerate() {
        let perspective = s.perspective.unwrap_or(if rng.random::<bool>() { Perspective::White } else { Perspective::Black });
        let base = if s.restyled { SynthConfig::restyled() } else { SynthConfig::default() };
        let cfg = SynthConfig {
            width: s.width,
            height: s.height,
            noise: s.noise,
            line_jitter: s.line_jitter,
            perspective,
            seed: rng.random(),
            palette: if s.restyled { Palette::restyled() } else { Palette::classic() },
            ..base
        };
        let (img, mut rec) = render(fen, &cfg)?;
        rec.image = format!("board_{i:04}.png");
        out.push((img, rec));
    }
    Ok(out)
}
