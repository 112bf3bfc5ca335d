//! Fine-tuning the classifiers to a new chess set from two photos of the
//! starting position, one from each side.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boardloc::{locate_corners, LocateConfig, LocateError};
use crate::chessio::{Perspective, Piece, Position, Square};
use crate::cropper::CropConfig;
use crate::dataset::{board_samples, DatasetError, Samples, EMPTY, OCCUPIED};
use crate::image::Image;
use crate::nnet::{train, train_augmented, Network, NnError, Scope, TrainRegimen, TrainStage};
use crate::parallel::Execution;

#[derive(Debug, Error)]
pub enum AdaptError {
    #[error("{view} view: {source}")]
    Locate { view: Perspective, source: LocateError },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Train(#[from] NnError),
    #[error("invalid augmentation: {0}")]
    Augment(String),
}

/// Ranges of the random augmentations. Each draw is uniform in
/// `[-range, range]` (factors: `[1 - range, 1 + range]`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSpec {
    /// Radians.
    pub shear: f64,
    /// Added to every channel.
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    /// Fraction of the hue circle, at most 0.5.
    pub hue: f64,
    pub scale: f64,
    /// Fraction of the crop size.
    pub translate: f64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self { shear: 0.35, brightness: 0.2, contrast: 0.2, saturation: 0.2, hue: 0.05, scale: 0.1, translate: 0.05 }
    }
}

impl AugmentSpec {
    pub fn none() -> Self {
        Self { shear: 0.0, brightness: 0.0, contrast: 0.0, saturation: 0.0, hue: 0.0, scale: 0.0, translate: 0.0 }
    }

    pub fn validate(&self) -> Result<(), AdaptError> {
        let ranges = [self.shear, self.brightness, self.contrast, self.saturation, self.hue, self.scale, self.translate];
        if ranges.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(AdaptError::Augment("ranges must be finite and non-negative".into()));
        }
        if self.hue > 0.5 {
            return Err(AdaptError::Augment("hue range exceeds 0.5".into()));
        }
        if self.contrast > 1.0 || self.saturation > 1.0 || self.scale >= 1.0 {
            return Err(AdaptError::Augment("factor ranges must keep factors positive".into()));
        }
        Ok(())
    }
}

/// Resamples `crop` through `src(x, y)`, the source position of each output
/// pixel; sources outside the crop are black.
fn remap(crop: &Image, src: impl Fn(f64, f64) -> (f64, f64)) -> Image {
    let (w, h, c) = (crop.width(), crop.height(), crop.channels());
    let mut out = vec![0.0; w * h * c];
    let mut px = [0.0; 3];
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = src(x as f64, y as f64);
            if crop.sample_bilinear(sx, sy, &mut px[..c]) {
                out[(y * w + x) * c..][..c].copy_from_slice(&px[..c]);
            }
        }
    }
    Image::from_clamped(w, h, c, out).expect("same size as input")
}

/// Horizontal shear about the bottom row: a pixel `h` rows above the bottom
/// moves right by `h·tan(amount)`.
pub fn shear_anchored(crop: &Image, amount: f64) -> Image {
    if amount == 0.0 {
        return crop.clone();
    }
    let t = amount.tan();
    let bottom = (crop.height() - 1) as f64;
    let mut data = remap(crop, |x, y| (x - (bottom - y) * t, y)).into_data();
    // Bilinear weights at integer positions are exact, but copy to be sure.
    let row = (crop.height() - 1) * crop.width() * crop.channels();
    data[row..].copy_from_slice(&crop.data()[row..]);
    Image::new(crop.width(), crop.height(), crop.channels(), data).expect("copied from a valid image")
}

/// Scales about the bottom-left corner, then shifts by `(dx, dy)` pixels.
pub fn scale_translate(crop: &Image, scale: f64, dx: f64, dy: f64) -> Image {
    let bottom = (crop.height() - 1) as f64;
    remap(crop, |x, y| ((x - dx) / scale, bottom - (bottom - (y - dy)) / scale))
}

/// One draw of the colour perturbations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColourDraw {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
}

impl ColourDraw {
    pub const IDENTITY: ColourDraw = ColourDraw { brightness: 0.0, contrast: 1.0, saturation: 1.0, hue: 0.0 };
}

fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / d).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / d + 2.0) / 6.0
    } else {
        ((r - g) / d + 4.0) / 6.0
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    [h, s, max]
}

fn hsv_to_rgb([h, s, v]: [f64; 3]) -> [f64; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let c = v * s;
    let x = c * (1.0 - (h6 % 2.0 - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match h6 as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [r + m, g + m, b + m]
}

/// Applies brightness (additive), contrast (scaling about the mean
/// intensity), then saturation and hue in HSV; clamps to `[0, 1]`.
pub fn apply_colour(crop: &Image, d: &ColourDraw) -> Image {
    let rgb = crop.to_rgb();
    let mean = rgb.data().iter().sum::<f64>() / rgb.data().len() as f64 + d.brightness;
    let mut out = Vec::with_capacity(rgb.data().len());
    for px in rgb.data().chunks(3) {
        let mut p = [0.0; 3];
        for c in 0..3 {
            p[c] = ((px[c] + d.brightness - mean) * d.contrast + mean).clamp(0.0, 1.0);
        }
        if d.saturation != 1.0 || d.hue != 0.0 {
            let [h, s, v] = rgb_to_hsv(p);
            p = hsv_to_rgb([h + d.hue, (s * d.saturation).clamp(0.0, 1.0), v]);
        }
        out.extend(p.iter().map(|v| v.clamp(0.0, 1.0)));
    }
    Image::from_clamped(rgb.width(), rgb.height(), 3, out).expect("same size as input")
}

fn symmetric(rng: &mut ChaCha8Rng, range: f64) -> f64 {
    if range > 0.0 {
        rng.random_range(-range..=range)
    } else {
        0.0
    }
}

pub fn color_jitter(crop: &Image, spec: &AugmentSpec, rng: &mut ChaCha8Rng) -> Image {
    let draw = ColourDraw {
        brightness: symmetric(rng, spec.brightness),
        contrast: 1.0 + symmetric(rng, spec.contrast),
        saturation: 1.0 + symmetric(rng, spec.saturation),
        hue: symmetric(rng, spec.hue),
    };
    apply_colour(crop, &draw)
}

/// Shear, scale and translation, then colour jitter, each drawn from `rng`.
pub fn augment_piece(crop: &Image, spec: &AugmentSpec, rng: &mut ChaCha8Rng) -> Image {
    let shear = symmetric(rng, spec.shear);
    let scale = 1.0 + symmetric(rng, spec.scale);
    let dx = symmetric(rng, spec.translate) * crop.width() as f64;
    let dy = symmetric(rng, spec.translate) * crop.height() as f64;
    let geo = scale_translate(&shear_anchored(crop, shear), scale, dx, dy);
    color_jitter(&geo, spec, rng)
}

/// The label of one camera-frame square in a starting-position photo.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StartLabel {
    pub view: Perspective,
    pub square: Square,
    pub piece: Option<Piece>,
}

/// All 64 squares of the starting position as seen from each side.
pub fn starting_position_labels() -> Vec<StartLabel> {
    let start = Position::starting();
    let mut out = Vec::with_capacity(128);
    for view in [Perspective::White, Perspective::Black] {
        out.extend(Square::all().map(|square| StartLabel { view, square, piece: start.get(view.to_board(square)) }));
    }
    out
}

/// Two photos of the starting position of an unseen set.
#[derive(Clone, Debug)]
pub struct FewShotSet {
    pub white_view: Image,
    pub black_view: Image,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinetuneConfig {
    pub augment: AugmentSpec,
    /// Augment piece crops during fine-tuning.
    pub augment_pieces: bool,
    pub occupancy: TrainRegimen,
    pub piece: TrainRegimen,
    pub locate: LocateConfig,
    pub crop: CropConfig,
}

impl FinetuneConfig {
    /// Head-only at 1e-3, then all layers at 1e-4.
    pub fn regimen(head_epochs: usize, all_epochs: usize, batch_size: usize, seed: u64) -> TrainRegimen {
        TrainRegimen {
            stages: vec![
                TrainStage { scope: Scope::HeadOnly, learning_rate: 1e-3, epochs: head_epochs },
                TrainStage { scope: Scope::AllLayers, learning_rate: 1e-4, epochs: all_epochs },
            ],
            batch_size,
            seed,
        }
    }
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            augment: AugmentSpec::default(),
            augment_pieces: true,
            occupancy: Self::regimen(100, 100, 16, 0),
            piece: Self::regimen(100, 150, 16, 1),
            locate: LocateConfig::default(),
            crop: CropConfig::default(),
        }
    }
}

/// Localises both photos and crops the 128 occupancy and 64 piece samples.
pub fn few_shot_samples(shots: &FewShotSet, cfg: &FinetuneConfig, exec: Execution) -> Result<Samples, AdaptError> {
    let start = Position::starting();
    let mut all = Samples::default();
    for (view, img) in [(Perspective::White, &shots.white_view), (Perspective::Black, &shots.black_view)] {
        let loc = locate_corners(img, &cfg.locate).map_err(|source| AdaptError::Locate { view, source })?;
        all.extend(board_samples(img, &loc.homography, &start, view, &cfg.crop, exec)?);
    }
    debug_assert_eq!(all.occupancy.len(), 128);
    debug_assert_eq!(all.occupancy.iter().filter(|o| o.1 == OCCUPIED).count(), 64);
    debug_assert!(all.occupancy.iter().all(|o| o.1 == OCCUPIED || o.1 == EMPTY));
    Ok(all)
}

/// Fine-tunes copies of the two networks; the inputs are left untouched.
pub fn finetune(
    occupancy: &Network,
    piece: &Network,
    shots: &FewShotSet,
    cfg: &FinetuneConfig,
    exec: Execution,
) -> Result<(Network, Network), AdaptError> {
    cfg.augment.validate()?;
    let samples = few_shot_samples(shots, cfg, exec)?;
    finetune_on(occupancy, piece, &samples, cfg, exec)
}

/// Fine-tuning on precomputed few-shot samples.
pub fn finetune_on(
    occupancy: &Network,
    piece: &Network,
    samples: &Samples,
    cfg: &FinetuneConfig,
    exec: Execution,
) -> Result<(Network, Network), AdaptError> {
    let (occ, _) = train(occupancy, &samples.occupancy, &cfg.occupancy, exec)?;
    let spec = cfg.augment;
    let aug = move |img: &Image, rng: &mut ChaCha8Rng| augment_piece(img, &spec, rng);
    let (pc, _) = if cfg.augment_pieces {
        train_augmented(piece, &samples.pieces, &cfg.piece, Some(&aug), exec)?
    } else {
        train(piece, &samples.pieces, &cfg.piece, exec)?
    };
    Ok((occ, pc))
}
