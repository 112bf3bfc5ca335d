//! Completion of a partially detected lattice to the full 9×9 board grid.

use super::LocateError;
use crate::geometry::{Homography, Point};
use crate::image::Image;
use crate::rasterops::{canny, sobel_x, sobel_y, to_grayscale, EdgeMap, RasterError};

/// Integer extents of the board in warped lattice units.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WarpedGrid {
    pub x_min: i64,
    pub x_max: i64,
    pub y_min: i64,
    pub y_max: i64,
}

impl WarpedGrid {
    pub fn from_targets(targets: &[(i64, i64)]) -> Option<WarpedGrid> {
        let first = targets.first()?;
        let mut g = WarpedGrid { x_min: first.0, x_max: first.0, y_min: first.1, y_max: first.1 };
        for &(x, y) in targets {
            g.x_min = g.x_min.min(x);
            g.x_max = g.x_max.max(x);
            g.y_min = g.y_min.min(y);
            g.y_max = g.y_max.max(y);
        }
        Some(g)
    }

    pub fn extent(&self) -> (i64, i64) {
        (self.x_max - self.x_min, self.y_max - self.y_min)
    }

    /// Lattice corners ordered (x_min, y_min), (x_max, y_min), (x_max, y_max), (x_min, y_max).
    pub fn corners(&self) -> [Point; 4] {
        let (a, b, c, d) = (self.x_min as f64, self.x_max as f64, self.y_min as f64, self.y_max as f64);
        [Point::new(a, c), Point::new(b, c), Point::new(b, d), Point::new(a, d)]
    }
}

/// Pixel raster of a region of the lattice plane: pixel `i` sits at
/// lattice coordinate `origin + i / px_per_unit`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarpFrame {
    pub px_per_unit: f64,
    pub origin: Point,
}

impl WarpFrame {
    pub fn to_pixel(&self, u: Point) -> Point {
        Point::new((u.x - self.origin.x) * self.px_per_unit, (u.y - self.origin.y) * self.px_per_unit)
    }

    pub fn to_lattice(&self, px: Point) -> Point {
        Point::new(self.origin.x + px.x / self.px_per_unit, self.origin.y + px.y / self.px_per_unit)
    }
}

/// Renders the lattice region `[u0, u1] × [v0, v1]` of `img` through
/// `to_lattice` (image → lattice) as a grayscale raster. Points beyond the
/// image take the nearest border value so that the frame edge itself adds
/// no gradient.
pub fn render_lattice_region(
    img: &Image,
    to_lattice: &Homography,
    u0: f64,
    u1: f64,
    v0: f64,
    v1: f64,
    px_per_unit: f64,
) -> Result<(Image, WarpFrame), LocateError> {
    let inv = to_lattice.inverse().map_err(|e| LocateError::completion(e.to_string()))?;
    let frame = WarpFrame { px_per_unit, origin: Point::new(u0, v0) };
    let w = ((u1 - u0) * px_per_unit).round() as usize + 1;
    let h = ((v1 - v0) * px_per_unit).round() as usize + 1;
    let gray = to_grayscale(img);
    let mut px = [0.0];
    let out = Image::from_fn_gray(w, h, |x, y| {
        let u = frame.to_lattice(Point::new(x as f64, y as f64));
        match inv.apply(u) {
            Some(p) => {
                let x = p.x.clamp(0.0, (gray.width() - 1) as f64);
                let y = p.y.clamp(0.0, (gray.height() - 1) as f64);
                gray.sample_bilinear(x, y, &mut px);
                px[0]
            }
            None => 0.0,
        }
    });
    Ok((out, frame))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompletionConfig {
    pub canny_low: f64,
    pub canny_high: f64,
    /// Half-width of the band summed around a candidate line, in lattice units.
    pub tolerance: f64,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self { canny_low: 0.02, canny_high: 0.06, tolerance: 0.1 }
    }
}

/// Number of edge pixels within `tol` lattice units of the vertical line
/// `x = u` (or the horizontal line `y = u` when `horizontal`), restricted to
/// the span `[s0, s1]` along the line.
fn line_support(edges: &EdgeMap, frame: &WarpFrame, u: f64, s0: f64, s1: f64, tol: f64, horizontal: bool) -> usize {
    let (ou, os) = if horizontal { (frame.origin.y, frame.origin.x) } else { (frame.origin.x, frame.origin.y) };
    let (nu, ns) = if horizontal { (edges.height, edges.width) } else { (edges.width, edges.height) };
    let ppu = frame.px_per_unit;
    let lo = ((u - tol - ou) * ppu).ceil().max(0.0) as usize;
    let hi = ((u + tol - ou) * ppu).floor();
    let a = ((s0 - os) * ppu).ceil().max(0.0) as usize;
    let b = ((s1 - os) * ppu).floor();
    if hi < 0.0 || b < 0.0 {
        return 0;
    }
    let hi = (hi as usize).min(nu.saturating_sub(1));
    let b = (b as usize).min(ns.saturating_sub(1));
    let mut n = 0;
    for i in lo..=hi {
        for j in a..=b {
            let on = if horizontal { edges.get(j, i) } else { edges.get(i, j) };
            n += usize::from(on);
        }
    }
    n
}

fn raster<T>(r: Result<T, RasterError>) -> Result<T, LocateError> {
    r.map_err(|e| LocateError::completion(e.to_string()))
}

/// Grows the inlier extents to the full board. In each axis, while the
/// extent is short of 8, the side whose next line has more Canny edge pixels
/// in the directional Sobel image is extended (ties extend the maximum).
///
/// `warped_gray` covers the lattice region described by `frame`, which must
/// include one unit beyond every side the grid could grow to.
pub fn complete_grid(
    warped_gray: &Image,
    frame: &WarpFrame,
    warped_inliers: &[(i64, i64)],
    cfg: &CompletionConfig,
) -> Result<WarpedGrid, LocateError> {
    let mut g = WarpedGrid::from_targets(warped_inliers)
        .ok_or_else(|| LocateError::completion("no inliers".into()))?;
    let (ex, ey) = g.extent();
    if ex > 8 || ey > 8 {
        return Err(LocateError::completion(format!("lattice extent {ex}×{ey} exceeds 8")));
    }
    if ex == 8 && ey == 8 {
        return Ok(g);
    }
    let gray = to_grayscale(warped_gray);
    if ex < 8 {
        let edges = raster(canny(&raster(sobel_x(&gray))?, cfg.canny_low, cfg.canny_high))?;
        while g.x_max - g.x_min < 8 {
            let (s0, s1) = (g.y_min as f64, g.y_max as f64);
            let left = line_support(&edges, frame, (g.x_min - 1) as f64, s0, s1, cfg.tolerance, false);
            let right = line_support(&edges, frame, (g.x_max + 1) as f64, s0, s1, cfg.tolerance, false);
            if left > right {
                g.x_min -= 1;
            } else {
                g.x_max += 1;
            }
        }
    }
    if ey < 8 {
        let edges = raster(canny(&raster(sobel_y(&gray))?, cfg.canny_low, cfg.canny_high))?;
        while g.y_max - g.y_min < 8 {
            let (s0, s1) = (g.x_min as f64, g.x_max as f64);
            let top = line_support(&edges, frame, (g.y_min - 1) as f64, s0, s1, cfg.tolerance, true);
            let bottom = line_support(&edges, frame, (g.y_max + 1) as f64, s0, s1, cfg.tolerance, true);
            if top > bottom {
                g.y_min -= 1;
            } else {
                g.y_max += 1;
            }
        }
    }
    Ok(g)
}
