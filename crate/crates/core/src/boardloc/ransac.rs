//! RANSAC search for the homography that maps intersection points onto an
//! integer lattice.

use nalgebra::{Matrix3, SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lines::intersect;
use super::LocateError;
use crate::geometry::{fit_homography, GeometryError, Homography, Point};
use crate::rasterops::PolarLine;

/// Largest board extent (in squares) a lattice hypothesis may span.
pub const MAX_EXTENT: i64 = 8;
pub const MAX_SCALE: u32 = 8;

/// Homography mapping `src` (ordered like the destination corners
/// (0,0), (sx,0), (sx,sy), (0,sy)) onto that rectangle.
pub fn homography_from_points(src: &[Point; 4], sx: u32, sy: u32) -> Result<Homography, GeometryError> {
    let scale = src.iter().flat_map(|p| [p.x.abs(), p.y.abs()]).fold(1.0f64, f64::max);
    for i in 0..4 {
        for j in (i + 1)..4 {
            for k in (j + 1)..4 {
                let (a, b, c) = (src[i], src[j], src[k]);
                let cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
                if cross.abs() <= 1e-9 * scale * scale {
                    return Err(GeometryError::Degenerate);
                }
            }
        }
    }
    let (sx, sy) = (sx as f64, sy as f64);
    let dst = [Point::new(0.0, 0.0), Point::new(sx, 0.0), Point::new(sx, sy), Point::new(0.0, sy)];
    fit_homography(src, &dst)
}

/// Warped position and distance to the nearest lattice point, or `None` for
/// points sent to infinity.
#[inline]
pub fn lattice_offset(h: &Homography, p: Point) -> Option<(Point, f64)> {
    let q = h.apply(p)?;
    let d = ((q.x - q.x.round()).powi(2) + (q.y - q.y.round()).powi(2)).sqrt();
    Some((q, d))
}

/// Indices of points whose warped image lies strictly within `gamma` of an
/// integer lattice point.
pub fn inlier_indices(h: &Homography, pts: &[Point], gamma: f64) -> Vec<usize> {
    pts.iter()
        .enumerate()
        .filter_map(|(i, p)| match lattice_offset(h, *p) {
            Some((_, d)) if d < gamma => Some(i),
            _ => None,
        })
        .collect()
}

pub fn count_inliers(h: &Homography, pts: &[Point], gamma: f64) -> (usize, Vec<Point>) {
    let idx = inlier_indices(h, pts, gamma);
    (idx.len(), idx.iter().map(|&i| pts[i]).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridFit {
    pub h: Homography,
    pub inliers: Vec<Point>,
    /// Rounded lattice coordinates of each inlier under `h`.
    pub targets: Vec<(i64, i64)>,
    pub tolerance_gamma: f64,
    /// The 4-point hypothesis before refinement.
    pub sample_h: Homography,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RansacConfig {
    pub gamma: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self { gamma: 0.15, max_iterations: 10_000, seed: 0 }
    }
}

/// Restricts `idx` to the 9×9 lattice window holding the most of them, so
/// stray points that happen to land near a far lattice point cannot inflate
/// the hypothesis beyond a board.
fn board_window(h: &Homography, pts: &[Point], idx: Vec<usize>) -> Vec<usize> {
    let coords: Vec<(usize, i64, i64)> = idx
        .iter()
        .filter_map(|&i| h.apply(pts[i]).map(|q| (i, q.x.round() as i64, q.y.round() as i64)))
        .collect();
    let (Some(xmin), Some(xmax)) = (coords.iter().map(|c| c.1).min(), coords.iter().map(|c| c.1).max()) else {
        return idx;
    };
    let ymin = coords.iter().map(|c| c.2).min().unwrap_or(0);
    let ymax = coords.iter().map(|c| c.2).max().unwrap_or(0);
    if xmax - xmin <= MAX_EXTENT && ymax - ymin <= MAX_EXTENT && coords.len() == idx.len() {
        return idx;
    }
    // Some inlier sits on the window's left and bottom edges.
    let mut xs: Vec<i64> = coords.iter().map(|c| c.1).collect();
    let mut ys: Vec<i64> = coords.iter().map(|c| c.2).collect();
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();
    let mut best = (0, xmin, ymin);
    for &x0 in &xs {
        for &y0 in &ys {
            let n = coords
                .iter()
                .filter(|c| (x0..=x0 + MAX_EXTENT).contains(&c.1) && (y0..=y0 + MAX_EXTENT).contains(&c.2))
                .count();
            if n > best.0 {
                best = (n, x0, y0);
            }
        }
    }
    let (_, x0, y0) = best;
    coords
        .into_iter()
        .filter(|c| (x0..=x0 + MAX_EXTENT).contains(&c.1) && (y0..=y0 + MAX_EXTENT).contains(&c.2))
        .map(|c| c.0)
        .collect()
}

/// Samples two horizontal and two vertical lines, fits the rectangle they
/// bound to every scale `(sx, sy) ∈ {1..8}²`, and keeps the hypothesis with
/// the most lattice inliers, until at least half of `pts` are explained. The
/// winner is refined by least squares over all its inliers.
///
/// `horizontal` and `vertical` must each be ordered by position across the
/// board (as returned by [`super::dedup_lines`]).
pub fn ransac_grid(
    pts: &[Point],
    horizontal: &[PolarLine],
    vertical: &[PolarLine],
    cfg: &RansacConfig,
) -> Result<GridFit, LocateError> {
    if pts.len() < 4 {
        return Err(LocateError::ransac(format!("need at least 4 intersection points, got {}", pts.len())));
    }
    if horizontal.len() < 2 || vertical.len() < 2 {
        return Err(LocateError::ransac(format!(
            "need two lines per direction, got {} horizontal and {} vertical",
            horizontal.len(),
            vertical.len()
        )));
    }
    let gamma = cfg.gamma;
    let needed = pts.len().div_ceil(2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(usize, Homography, Vec<usize>)> = None;

    for _ in 0..cfg.max_iterations {
        let mut pick = |n: usize| {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            (a.min(b), a.max(b))
        };
        let (h1, h2) = pick(horizontal.len());
        let (v1, v2) = pick(vertical.len());
        let corners = [
            intersect(&horizontal[h1], &vertical[v1]),
            intersect(&horizontal[h1], &vertical[v2]),
            intersect(&horizontal[h2], &vertical[v2]),
            intersect(&horizontal[h2], &vertical[v1]),
        ];
        let Ok(src) = corners.into_iter().collect::<Result<Vec<_>, _>>() else { continue };
        let src = [src[0], src[1], src[2], src[3]];
        for sx in 1..=MAX_SCALE {
            for sy in 1..=MAX_SCALE {
                let Ok(h) = homography_from_points(&src, sx, sy) else { continue };
                let beats = |n: usize| best.as_ref().is_none_or(|(b, _, _)| n > *b);
                let raw = inlier_indices(&h, pts, gamma);
                // The window only removes points, so it cannot rescue a loser.
                if !beats(raw.len()) {
                    continue;
                }
                let idx = board_window(&h, pts, raw);
                if beats(idx.len()) {
                    best = Some((idx.len(), h, idx));
                }
            }
        }
        if best.as_ref().is_some_and(|(n, _, _)| *n >= needed) {
            break;
        }
    }

    let (count, sample_h, idx) = best.ok_or_else(|| LocateError::ransac("no valid hypothesis".into()))?;
    if count < needed {
        return Err(LocateError::ransac(format!(
            "best hypothesis explains {count} of {} points after {} samples",
            pts.len(),
            cfg.max_iterations
        )));
    }

    let mut h = sample_h;
    let mut idx = idx;
    // Refit, then re-collect inliers under the refined map while that grows the set.
    for _ in 0..3 {
        let inliers: Vec<Point> = idx.iter().map(|&i| pts[i]).collect();
        let targets = rounded_targets(&h, &inliers);
        h = refine_homography(&h, &inliers, &targets);
        let next = board_window(&h, pts, inlier_indices(&h, pts, gamma));
        if next.len() <= idx.len() {
            break;
        }
        idx = next;
    }
    let inliers: Vec<Point> = idx.iter().map(|&i| pts[i]).collect();
    let targets = rounded_targets(&h, &inliers).iter().map(|p| (p.x as i64, p.y as i64)).collect();
    Ok(GridFit { h, inliers, targets, tolerance_gamma: gamma, sample_h })
}

fn rounded_targets(h: &Homography, pts: &[Point]) -> Vec<Point> {
    pts.iter()
        .map(|p| {
            let q = h.apply(*p).unwrap_or(Point::new(f64::NAN, f64::NAN));
            Point::new(q.x.round(), q.y.round())
        })
        .collect()
}

/// Sum of squared distances between warped points and their targets.
pub fn residual(h: &Homography, src: &[Point], targets: &[Point]) -> f64 {
    src.iter()
        .zip(targets)
        .map(|(p, t)| match h.apply(*p) {
            Some(q) => (q.x - t.x).powi(2) + (q.y - t.y).powi(2),
            None => f64::INFINITY,
        })
        .sum()
}

/// Least-squares homography over all correspondences, minimising the
/// geometric residual in warped units. Starts from the better of `initial`
/// and the algebraic estimate, and only accepts Levenberg–Marquardt steps
/// that reduce the residual, so the result never does worse than `initial`.
pub fn refine_homography(initial: &Homography, src: &[Point], targets: &[Point]) -> Homography {
    let mut current = *initial;
    let mut cost = residual(initial, src, targets);
    if src.len() >= 4 {
        if let Ok(alg) = fit_homography(src, targets) {
            let c = residual(&alg, src, targets);
            if c < cost {
                current = alg;
                cost = c;
            }
        }
    }
    if src.len() < 5 || cost == 0.0 {
        return current;
    }

    // Condition the source coordinates.
    let n = src.len() as f64;
    let cx = src.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = src.iter().map(|p| p.y).sum::<f64>() / n;
    let spread = src.iter().map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt()).sum::<f64>() / n;
    let s = if spread > 0.0 { 1.0 / spread } else { 1.0 };
    let t = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    let t_inv = Matrix3::new(1.0 / s, 0.0, cx, 0.0, 1.0 / s, cy, 0.0, 0.0, 1.0);
    let norm_src: Vec<Point> = src.iter().map(|p| Point::new(s * (p.x - cx), s * (p.y - cy))).collect();

    let to_vec = |m: &Matrix3<f64>| SVector::<f64, 9>::from_row_slice(&[
        m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)],
    ]);
    let to_mat = |v: &SVector<f64, 9>| Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]);

    let mut hv = to_vec(&(current.matrix() * t_inv));
    hv /= hv.norm();
    let eval = |hv: &SVector<f64, 9>| -> f64 {
        let m = to_mat(hv);
        let mut c = 0.0;
        for (p, tgt) in norm_src.iter().zip(targets) {
            let w = m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)];
            if w.abs() < 1e-15 {
                return f64::INFINITY;
            }
            let u = (m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)]) / w;
            let v = (m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)]) / w;
            c += (u - tgt.x).powi(2) + (v - tgt.y).powi(2);
        }
        c
    };
    let mut cur_cost = eval(&hv);
    let mut lambda = 1e-3;
    for _ in 0..50 {
        let m = to_mat(&hv);
        let mut jtj = SMatrix::<f64, 9, 9>::zeros();
        let mut jtr = SVector::<f64, 9>::zeros();
        for (p, tgt) in norm_src.iter().zip(targets) {
            let w = m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)];
            let u = (m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)]) / w;
            let v = (m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)]) / w;
            let ju = SVector::<f64, 9>::from_row_slice(&[p.x / w, p.y / w, 1.0 / w, 0.0, 0.0, 0.0, -u * p.x / w, -u * p.y / w, -u / w]);
            let jv = SVector::<f64, 9>::from_row_slice(&[0.0, 0.0, 0.0, p.x / w, p.y / w, 1.0 / w, -v * p.x / w, -v * p.y / w, -v / w]);
            jtj += ju * ju.transpose() + jv * jv.transpose();
            jtr += ju * (u - tgt.x) + jv * (v - tgt.y);
        }
        let mut improved = false;
        for _ in 0..10 {
            let mut a = jtj;
            for i in 0..9 {
                a[(i, i)] += lambda * (jtj[(i, i)] + 1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-jtr))) else {
                lambda *= 10.0;
                continue;
            };
            let mut cand = hv + step;
            cand /= cand.norm();
            let c = eval(&cand);
            if c < cur_cost {
                let rel = (cur_cost - c) / cur_cost.max(1e-300);
                hv = cand;
                cur_cost = c;
                lambda = (lambda * 0.3).max(1e-12);
                improved = rel > 1e-12;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    match Homography::from_matrix(to_mat(&hv) * t) {
        Ok(refined) if residual(&refined, src, targets) <= cost => refined,
        _ => current,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn rectangle_scalings() {
        let unit = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)];
        let h = homography_from_points(&unit, 1, 1).unwrap();
        assert!(h.deviation(&Homography::identity()) < 1e-12);
        let twice = unit.map(|p| Point::new(2.0 * p.x, 2.0 * p.y));
        let h = homography_from_points(&twice, 1, 1).unwrap();
        let expect = Homography::from_rows([[0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert!(h.deviation(&expect) < 1e-12);
        let collinear = [Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0), Point::new(0.0, 1.0)];
        assert_eq!(homography_from_points(&collinear, 1, 1), Err(GeometryError::Degenerate));
    }

    #[test]
    fn inlier_criterion() {
        let h = Homography::identity();
        let lattice: Vec<Point> = (0..9).map(|i| Point::new(i as f64, (i * 2 % 9) as f64)).collect();
        assert_eq!(count_inliers(&h, &lattice, 0.1).0, 9);
        assert_eq!(count_inliers(&h, &lattice, 1e-9).0, 9);
        assert_eq!(count_inliers(&h, &[Point::new(3.3, 5.0)], 0.25).0, 0);
        assert_eq!(count_inliers(&h, &[Point::new(3.2, 5.0)], 0.25).0, 1);
        // A point on the line at infinity is an outlier.
        let proj = Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        assert_eq!(count_inliers(&proj, &[Point::new(-1.0, 0.0)], 0.25).0, 0);
    }

    #[test]
    fn refinement_never_increases_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let truth = Homography::from_rows([
                [1.0 + rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-2.0..2.0)],
                [rng.random_range(-0.1..0.1), 1.0 + rng.random_range(-0.1..0.1), rng.random_range(-2.0..2.0)],
                [rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01), 1.0],
            ])
            .unwrap();
            let targets: Vec<Point> = (0..30).map(|i| Point::new((i % 6) as f64, (i / 6) as f64)).collect();
            let inv = truth.inverse().unwrap();
            let src: Vec<Point> = targets
                .iter()
                .map(|t| {
                    let p = inv.apply(*t).unwrap();
                    Point::new(p.x + rng.random_range(-0.01..0.01), p.y + rng.random_range(-0.01..0.01))
                })
                .collect();
            let four = homography_from_points(&[src[0], src[5], src[29], src[24]], 5, 4).unwrap();
            let refined = refine_homography(&four, &src, &targets);
            assert!(residual(&refined, &src, &targets) <= residual(&four, &src, &targets));
        }
    }
}
