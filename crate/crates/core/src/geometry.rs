//! Planar projective geometry: points, homographies and their direct linear
//! transform estimate.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("homography is singular (|det| = {0:e})")]
    Singular(f64),
    #[error("need at least 4 correspondences, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate point configuration (three or more collinear)")]
    Degenerate,
    #[error("source and destination lengths differ")]
    LengthMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        ((self.x - o.x).powi(2) + (self.y - o.y).powi(2)).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// 3×3 projective map, stored with unit Frobenius norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

pub const MIN_DET: f64 = 1e-12;

impl Homography {
    pub fn identity() -> Self {
        Self::from_matrix(Matrix3::identity()).unwrap()
    }

    /// Normalises to unit Frobenius norm and rejects singular matrices.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let norm = m.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(GeometryError::Singular(0.0));
        }
        let m = m / norm;
        let det = m.determinant();
        if !(det.abs() > MIN_DET) {
            return Err(GeometryError::Singular(det.abs()));
        }
        Ok(Self { m })
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        Self::from_matrix(Matrix3::from_row_slice(&rows.concat()))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.m;
        [[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [m[(2, 0)], m[(2, 1)], m[(2, 2)]]]
    }

    pub fn det(&self) -> f64 {
        self.m.determinant()
    }

    /// Maps a point; `None` when it goes to infinity.
    #[inline]
    pub fn apply(&self, p: Point) -> Option<Point> {
        let m = &self.m;
        let w = m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)];
        if w.abs() < 1e-12 {
            return None;
        }
        let x = (m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)]) / w;
        let y = (m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)]) / w;
        let q = Point::new(x, y);
        q.is_finite().then_some(q)
    }

    pub fn inverse(&self) -> Result<Homography, GeometryError> {
        let inv = self.m.try_inverse().ok_or(GeometryError::Singular(self.det().abs()))?;
        Homography::from_matrix(inv)
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn after(&self, first: &Homography) -> Result<Homography, GeometryError> {
        Homography::from_matrix(self.m * first.m)
    }

    /// Largest absolute entry difference after sign alignment; both are
    /// unit-norm so this compares maps up to scale.
    pub fn deviation(&self, other: &Homography) -> f64 {
        let a = (self.m - other.m).abs().max();
        let b = (self.m + other.m).abs().max();
        a.min(b)
    }

    pub fn scale_translate(sx: f64, sy: f64, tx: f64, ty: f64) -> Homography {
        Homography::from_rows([[sx, 0.0, tx], [0.0, sy, ty], [0.0, 0.0, 1.0]]).expect("non-zero scales")
    }
}

fn normalising_transform(pts: &[Point]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_d = pts.iter().map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt()).sum::<f64>() / n;
    let s = if mean_d > 0.0 { std::f64::consts::SQRT_2 / mean_d } else { 1.0 };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn transform(t: &Matrix3<f64>, p: Point) -> Point {
    let v = t * Vector3::new(p.x, p.y, 1.0);
    Point::new(v.x / v.z, v.y / v.z)
}

/// Normalised direct linear transform: the algebraic least-squares
/// homography mapping `src[i]` onto `dst[i]`.
pub fn fit_homography(src: &[Point], dst: &[Point]) -> Result<Homography, GeometryError> {
    if src.len() != dst.len() {
        return Err(GeometryError::LengthMismatch);
    }
    if src.len() < 4 {
        return Err(GeometryError::TooFewPoints(src.len()));
    }
    let ts = normalising_transform(src);
    let td = normalising_transform(dst);
    let rows = (2 * src.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src.iter().zip(dst).enumerate() {
        let s = transform(&ts, *s);
        let d = transform(&td, *d);
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[-s.x, -s.y, -1.0, 0.0, 0.0, 0.0, d.x * s.x, d.x * s.y, d.x]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, -s.x, -s.y, -1.0, d.y * s.x, d.y * s.y, d.y]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(GeometryError::Degenerate)?;
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, s)| if *s < best.1 { (i, *s) } else { best });
    let h = v_t.row(imin);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td.try_inverse().ok_or(GeometryError::Degenerate)?;
    Homography::from_matrix(td_inv * hn * ts).map_err(|_| GeometryError::Degenerate)
}

/// The four board corners in image pixels, ordered top-left, top-right,
/// bottom-right, bottom-left as seen in the image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerSet {
    points: [Point; 4],
}

impl CornerSet {
    /// Orders four points of a convex quadrilateral clockwise (y down)
    /// starting from the one with the smallest `x + y`.
    pub fn new(points: [Point; 4]) -> Self {
        let cx = points.iter().map(|p| p.x).sum::<f64>() / 4.0;
        let cy = points.iter().map(|p| p.y).sum::<f64>() / 4.0;
        let mut pts = points;
        pts.sort_by(|a, b| {
            let ta = (a.y - cy).atan2(a.x - cx);
            let tb = (b.y - cy).atan2(b.x - cx);
            ta.total_cmp(&tb)
        });
        let start = (0..4).min_by(|&i, &j| (pts[i].x + pts[i].y).total_cmp(&(pts[j].x + pts[j].y))).unwrap();
        pts.rotate_left(start);
        Self { points: pts }
    }

    pub fn points(&self) -> [Point; 4] {
        self.points
    }

    pub fn top_left(&self) -> Point {
        self.points[0]
    }

    pub fn as_arrays(&self) -> [[f64; 2]; 4] {
        self.points.map(|p| [p.x, p.y])
    }

    pub fn is_convex(&self) -> bool {
        crate::chessio::is_convex(&self.as_arrays())
    }

    pub fn scaled(&self, factor: f64) -> CornerSet {
        CornerSet { points: self.points.map(|p| Point::new(p.x * factor, p.y * factor)) }
    }

    /// Homography from image pixels to board units, with these corners at
    /// (0,0), (8,0), (8,8), (0,8).
    pub fn board_homography(&self) -> Result<Homography, GeometryError> {
        let dst = [Point::new(0.0, 0.0), Point::new(8.0, 0.0), Point::new(8.0, 8.0), Point::new(0.0, 8.0)];
        fit_homography(&self.points, &dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_ordering() {
        let c = CornerSet::new([Point::new(90.0, 95.0), Point::new(5.0, 10.0), Point::new(12.0, 88.0), Point::new(95.0, 3.0)]);
        assert_eq!(
            c.points(),
            [Point::new(5.0, 10.0), Point::new(95.0, 3.0), Point::new(90.0, 95.0), Point::new(12.0, 88.0)]
        );
        assert!(c.is_convex());
    }

    #[test]
    fn fit_recovers_map() {
        let h = Homography::from_rows([[1.2, 0.1, 5.0], [-0.05, 0.9, 3.0], [1e-3, 2e-3, 1.0]]).unwrap();
        let src: Vec<Point> = (0..12).map(|i| Point::new((i % 4) as f64 * 10.0, (i / 4) as f64 * 7.0 + 1.0)).collect();
        let dst: Vec<Point> = src.iter().map(|p| h.apply(*p).unwrap()).collect();
        let fit = fit_homography(&src, &dst).unwrap();
        assert!(fit.deviation(&h) < 1e-9);
    }

    #[test]
    fn singular_is_rejected() {
        assert!(Homography::from_rows([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]]).is_err());
    }
}
