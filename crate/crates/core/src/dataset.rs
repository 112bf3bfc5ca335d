//! Labelled classifier crops from board images with known positions.

use std::path::Path;

use thiserror::Error;

use crate::chessio::{parse_fen, FenError, LabelRecord, Perspective, Position, Square};
use crate::cropper::{occupancy_crops, piece_crops, warp_image, CropConfig, CropError};
use crate::geometry::{CornerSet, GeometryError, Homography, Point};
use crate::image::{Image, ImageError};
use crate::parallel::Execution;

pub const EMPTY: usize = 0;
pub const OCCUPIED: usize = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Fen(#[from] FenError),
    #[error(transparent)]
    Crop(#[from] CropError),
    #[error("label corners: {0}")]
    Corners(#[from] GeometryError),
    #[error("{path}: {source}")]
    Image { path: String, source: ImageError },
}

/// Occupancy samples (class [`EMPTY`] or [`OCCUPIED`]) for all 64 squares
/// and piece samples (class [`crate::chessio::Piece::index`]) for the
/// occupied ones, in camera-frame square order.
#[derive(Clone, Debug, Default)]
pub struct Samples {
    pub occupancy: Vec<(Image, usize)>,
    pub pieces: Vec<(Image, usize)>,
}

impl Samples {
    pub fn extend(&mut self, other: Samples) {
        self.occupancy.extend(other.occupancy);
        self.pieces.extend(other.pieces);
    }
}

/// Camera-frame squares in index order.
pub fn camera_squares() -> Vec<Square> {
    Square::all().collect()
}

/// Image → board-unit homography for labelled corners.
pub fn corners_homography(corners: &[[f64; 2]; 4]) -> Result<Homography, GeometryError> {
    CornerSet::new(corners.map(|[x, y]| Point::new(x, y))).board_homography()
}

/// Crops every square of `img`, whose board is placed by `homography`
/// (image pixels → board units), and labels them from `position`.
pub fn board_samples(
    img: &Image,
    homography: &Homography,
    position: &Position,
    perspective: Perspective,
    cfg: &CropConfig,
    exec: Execution,
) -> Result<Samples, DatasetError> {
    let warped = warp_image(img, homography, cfg)?;
    let squares = camera_squares();
    let occ = occupancy_crops(&warped, &squares, cfg, exec);
    let mut samples = Samples::default();
    let mut occupied = Vec::new();
    for (sq, crop) in squares.iter().zip(occ) {
        match position.get(perspective.to_board(*sq)) {
            Some(piece) => {
                samples.occupancy.push((crop, OCCUPIED));
                occupied.push((*sq, piece.index()));
            }
            None => samples.occupancy.push((crop, EMPTY)),
        }
    }
    let sqs: Vec<Square> = occupied.iter().map(|o| o.0).collect();
    let crops = piece_crops(&warped, &sqs, cfg, exec);
    samples.pieces = crops.into_iter().zip(occupied).map(|(c, (_, class))| (c, class)).collect();
    Ok(samples)
}

/// Samples for one label record, using its ground-truth corners.
pub fn record_samples(
    record: &LabelRecord,
    labels_path: &Path,
    cfg: &CropConfig,
    exec: Execution,
) -> Result<Samples, DatasetError> {
    let path = record.image_path(labels_path);
    let img = Image::load(&path).map_err(|source| DatasetError::Image { path: path.display().to_string(), source })?;
    labelled_samples(&img, record, cfg, exec)
}

/// Samples for an in-memory image described by `record`.
pub fn labelled_samples(
    img: &Image,
    record: &LabelRecord,
    cfg: &CropConfig,
    exec: Execution,
) -> Result<Samples, DatasetError> {
    let position = parse_fen(&record.fen)?;
    let h = corners_homography(&record.corners)?;
    board_samples(img, &h, &position, record.perspective, cfg, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chessio::STARTING_FEN;
    use crate::synth::{render, SynthConfig};

    #[test]
    fn starting_position_sample_counts() {
        let cfg = SynthConfig::default();
        let (img, rec) = render(STARTING_FEN, &cfg).unwrap();
        let s = labelled_samples(&img, &rec, &CropConfig::default(), Execution::Parallel).unwrap();
        assert_eq!(s.occupancy.len(), 64);
        assert_eq!(s.occupancy.iter().filter(|o| o.1 == OCCUPIED).count(), 32);
        assert_eq!(s.pieces.len(), 32);
        // Camera rank 0 of a white view holds the white back rank: a1 is a white rook.
        assert_eq!(s.pieces[0].1, crate::chessio::Piece::from_char('R').unwrap().index());
    }
}
