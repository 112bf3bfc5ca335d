//! Rectified board rendering and the per-square classifier crops.
//!
//! Squares are addressed in the camera frame: rank 0 is the row nearest the
//! camera and file 0 is on the left as seen in the photo.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chessio::Square;
use crate::geometry::{GeometryError, Homography, Point};
use crate::image::Image;
use crate::parallel::{self, Execution};

pub type SquareRef = Square;

#[derive(Debug, Error, PartialEq)]
pub enum CropError {
    #[error("homography is not invertible: {0}")]
    Homography(#[from] GeometryError),
    #[error("square size must be at least 4 px")]
    SquareSize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropConfig {
    /// Pixels per board square in the warped image.
    pub square_px: usize,
    /// Border around the board, in squares.
    pub margin: usize,
    /// Extra piece-box width at the outermost files, in squares.
    pub width_growth: f64,
    /// Extra piece-box height at the far rank, in squares.
    pub height_growth: f64,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self { square_px: 50, margin: 2, width_growth: 1.0, height_growth: 1.0 }
    }
}

impl CropConfig {
    pub fn warped_side(&self) -> usize {
        (8 + 2 * self.margin) * self.square_px
    }

    /// Occupancy crop side: two squares.
    pub fn occupancy_size(&self) -> (usize, usize) {
        (2 * self.square_px, 2 * self.square_px)
    }

    /// Piece crop `(width, height)`: two squares by three.
    pub fn piece_size(&self) -> (usize, usize) {
        (2 * self.square_px, 3 * self.square_px)
    }
}

/// Box in warped pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CropBox {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl CropBox {
    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn height(&self) -> f64 {
        self.bottom - self.top
    }
}

/// Warped-pixel coordinate of a board-unit position (pixel centres at `i + 0.5`).
fn to_warped(cfg: &CropConfig, u: f64) -> f64 {
    (u + cfg.margin as f64) * cfg.square_px as f64
}

/// Renders the board region into a square image with `square_px` pixels
/// per square and a `margin`-square border. `h` maps input pixels to board
/// units (board corners at (0,0), (8,0), (8,8), (0,8)). Samples falling
/// outside the input are black.
pub fn warp_image(img: &Image, h: &Homography, cfg: &CropConfig) -> Result<Image, CropError> {
    if cfg.square_px < 4 {
        return Err(CropError::SquareSize);
    }
    let inv = h.inverse()?;
    let side = cfg.warped_side();
    let s = cfg.square_px as f64;
    let m = cfg.margin as f64;
    let rgb = img.to_rgb();
    let mut out = vec![0.0; side * side * 3];
    let mut px = [0.0; 3];
    for y in 0..side {
        let v = (y as f64 + 0.5) / s - m;
        for x in 0..side {
            let u = (x as f64 + 0.5) / s - m;
            if let Some(p) = inv.apply(Point::new(u, v)) {
                if rgb.sample_bilinear(p.x, p.y, &mut px) {
                    out[(y * side + x) * 3..][..3].copy_from_slice(&px);
                }
            }
        }
    }
    Ok(Image::from_clamped(side, side, 3, out).expect("sized above"))
}

/// Board-unit extent of a square: `(u0, v0)` is its top-left corner.
fn square_origin(sq: SquareRef) -> (f64, f64) {
    (sq.file() as f64, 7.0 - sq.rank() as f64)
}

pub fn occupancy_box(cfg: &CropConfig, sq: SquareRef) -> CropBox {
    let (u0, v0) = square_origin(sq);
    CropBox {
        left: to_warped(cfg, u0 - 0.5),
        top: to_warped(cfg, v0 - 0.5),
        right: to_warped(cfg, u0 + 1.5),
        bottom: to_warped(cfg, v0 + 1.5),
    }
}

/// Copies a pixel-aligned window; pixels outside `warped` are black.
fn copy_window(warped: &Image, left: i64, top: i64, w: usize, h: usize, mirror: bool, mask: impl Fn(usize, usize) -> bool) -> Image {
    let ch = warped.channels();
    let mut out = vec![0.0; w * h * ch];
    for y in 0..h {
        let sy = top + y as i64;
        if sy < 0 || sy >= warped.height() as i64 {
            continue;
        }
        for x in 0..w {
            if !mask(x, y) {
                continue;
            }
            let sx = if mirror { left + (w - 1 - x) as i64 } else { left + x as i64 };
            if sx < 0 || sx >= warped.width() as i64 {
                continue;
            }
            out[(y * w + x) * ch..][..ch].copy_from_slice(warped.pixel(sx as usize, sy as usize));
        }
    }
    Image::new(w, h, ch, out).expect("sized above")
}

/// The square plus half a square of context on every side.
pub fn occupancy_crop(warped: &Image, sq: SquareRef, cfg: &CropConfig) -> Image {
    let b = occupancy_box(cfg, sq);
    let (w, h) = cfg.occupancy_size();
    copy_window(warped, b.left as i64, b.top as i64, w, h, false, |_, _| true)
}

/// Piece box in warped pixels: the square at its bottom corner, extended
/// upward more for squares further from the camera and sideways (away from
/// the board centre) more for outer files.
pub fn piece_box(cfg: &CropConfig, sq: SquareRef) -> CropBox {
    let (u0, v0) = square_origin(sq);
    let width = 1.0 + cfg.width_growth * (sq.file() as f64 - 3.5).abs() / 3.5;
    let height = 2.0 + cfg.height_growth * sq.rank() as f64 / 7.0;
    let (left, right) = if sq.file() <= 3 { (u0 + 1.0 - width, u0 + 1.0) } else { (u0, u0 + width) };
    CropBox {
        left: to_warped(cfg, left),
        top: to_warped(cfg, v0 + 1.0 - height),
        right: to_warped(cfg, right),
        bottom: to_warped(cfg, v0 + 1.0),
    }
}

/// Piece crop on a fixed `2S × 3S` canvas at warped scale. The subject
/// square always fills the bottom-left `S × S`; squares on the left half of
/// the board are mirrored so that the extension runs to the right. Canvas
/// pixels outside the piece box are black.
pub fn piece_crop(warped: &Image, sq: SquareRef, cfg: &CropConfig) -> Image {
    let b = piece_box(cfg, sq);
    let (w, h) = cfg.piece_size();
    let (u0, v0) = square_origin(sq);
    let mirror = sq.file() <= 3;
    // Canvas column 0 sits on the square's outer edge (its right edge when mirrored).
    let left = if mirror { to_warped(cfg, u0 + 1.0) as i64 - w as i64 } else { to_warped(cfg, u0) as i64 };
    let top = to_warped(cfg, v0 + 1.0) as i64 - h as i64;
    let box_w = b.width().round() as usize;
    let box_h = b.height().round() as usize;
    copy_window(warped, left, top, w, h, mirror, |x, y| x < box_w && y + box_h >= h)
}

/// Occupancy crops for many squares.
pub fn occupancy_crops(warped: &Image, squares: &[SquareRef], cfg: &CropConfig, exec: Execution) -> Vec<Image> {
    parallel::map(exec, squares, |sq| occupancy_crop(warped, *sq, cfg))
}

pub fn piece_crops(warped: &Image, squares: &[SquareRef], cfg: &CropConfig, exec: Execution) -> Vec<Image> {
    parallel::map(exec, squares, |sq| piece_crop(warped, *sq, cfg))
}
