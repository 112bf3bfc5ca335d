//! Board localisation: from a photo to the four board corners and the
//! homography into board units.

mod grid;
mod lines;
mod ransac;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grid::{complete_grid, render_lattice_region, CompletionConfig, WarpFrame, WarpedGrid};
pub use lines::{
    angular_distance, cluster_by_orientation, dedup_lines, dedup_lines_strongest, intersect, mean_line, mean_orientation,
    MIN_CLUSTER_SEPARATION,
};
pub use ransac::{
    count_inliers, homography_from_points, inlier_indices, lattice_offset, ransac_grid, refine_homography, residual,
    GridFit, RansacConfig, MAX_EXTENT, MAX_SCALE,
};

use crate::geometry::{CornerSet, Homography, Point};
use crate::image::Image;
use crate::rasterops::{canny, hough_accumulate, to_grayscale, PolarLine};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Edges,
    Lines,
    Clustering,
    Intersections,
    Ransac,
    Completion,
    Corners,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Edges => "edge detection",
            Stage::Lines => "line detection",
            Stage::Clustering => "line clustering",
            Stage::Intersections => "intersection",
            Stage::Ransac => "grid fit",
            Stage::Completion => "grid completion",
            Stage::Corners => "corner extraction",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("board localisation failed during {stage}: {message}")]
pub struct LocateError {
    pub stage: Stage,
    pub message: String,
}

impl LocateError {
    pub fn new(stage: Stage, message: impl Into<String>) -> Self {
        Self { stage, message: message.into() }
    }

    pub(crate) fn clustering(message: String) -> Self {
        Self::new(Stage::Clustering, message)
    }

    pub(crate) fn parallel() -> Self {
        Self::new(Stage::Intersections, "lines are parallel")
    }

    pub(crate) fn ransac(message: String) -> Self {
        Self::new(Stage::Ransac, message)
    }

    pub(crate) fn completion(message: String) -> Self {
        Self::new(Stage::Completion, message)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocateConfig {
    /// Longer image side after downscaling.
    pub working_resolution: usize,
    pub canny_low: f64,
    pub canny_high: f64,
    pub hough_rho_res: f64,
    pub hough_theta_res: f64,
    /// Minimum Hough votes as a fraction of the working image diagonal.
    pub hough_votes_fraction: f64,
    /// Peaks weaker than this fraction of the strongest are dropped.
    pub hough_relative_votes: f64,
    pub hough_peak_radius: usize,
    pub hough_max_lines: usize,
    /// Line-merging radius in pixels at a working resolution of 1200.
    pub eps: f64,
    /// Represent each merged group by its strongest line rather than the mean.
    pub merge_strongest: bool,
    pub gamma: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub completion_px_per_unit: f64,
    pub completion_canny_low: f64,
    pub completion_canny_high: f64,
    pub completion_tolerance: f64,
}

impl Default for LocateConfig {
    fn default() -> Self {
        let c = CompletionConfig::default();
        Self {
            working_resolution: 1200,
            canny_low: 0.04,
            canny_high: 0.1,
            hough_rho_res: 1.0,
            hough_theta_res: PI / 360.0,
            hough_votes_fraction: 0.1,
            hough_relative_votes: 0.3,
            hough_peak_radius: 3,
            hough_max_lines: 200,
            eps: 12.0,
            merge_strongest: true,
            gamma: 0.15,
            max_iterations: 10_000,
            seed: 0,
            completion_px_per_unit: 50.0,
            completion_canny_low: c.canny_low,
            completion_canny_high: c.canny_high,
            completion_tolerance: c.tolerance,
        }
    }
}

/// Output of [`locate_corners`].
#[derive(Clone, Debug, PartialEq)]
pub struct Localisation {
    pub corners: CornerSet,
    /// Image pixels → board units, with the corners at (0,0), (8,0), (8,8), (0,8).
    pub homography: Homography,
    pub grid: WarpedGrid,
    pub fit: GridFit,
}

/// Board lines found in the working-resolution image.
#[derive(Clone, Debug, PartialEq)]
pub struct BoardLines {
    /// Working image size.
    pub width: usize,
    pub height: usize,
    /// Original pixels per working pixel.
    pub factor: f64,
    /// Deduplicated, ordered across the board.
    pub horizontal: Vec<PolarLine>,
    pub vertical: Vec<PolarLine>,
}

/// Edge detection, Hough peaks, orientation clustering and line merging.
pub fn detect_lines(img: &Image, cfg: &LocateConfig) -> Result<BoardLines, LocateError> {
    let (small, factor) = img.downscale_to(cfg.working_resolution.max(16));
    let gray = to_grayscale(&small);
    let edges = canny(&gray, cfg.canny_low, cfg.canny_high).map_err(|e| LocateError::new(Stage::Edges, e.to_string()))?;
    if edges.count() == 0 {
        return Err(LocateError::new(Stage::Edges, "no edges found"));
    }
    let acc = hough_accumulate(&edges, cfg.hough_rho_res, cfg.hough_theta_res)
        .map_err(|e| LocateError::new(Stage::Lines, e.to_string()))?;
    let diag = ((small.width().pow(2) + small.height().pow(2)) as f64).sqrt();
    let votes_min = (cfg.hough_votes_fraction * diag).round().max(2.0) as u32;
    let peaks = acc.peaks(votes_min, cfg.hough_peak_radius, cfg.hough_max_lines);
    let strongest = peaks.first().map_or(0, |p| p.1) as f64;
    let detected: Vec<(PolarLine, u32)> =
        peaks.into_iter().filter(|p| p.1 as f64 >= cfg.hough_relative_votes * strongest).collect();
    if detected.len() < 4 {
        return Err(LocateError::new(Stage::Lines, format!("only {} lines detected", detected.len())));
    }

    let lines: Vec<PolarLine> = detected.iter().map(|d| d.0).collect();
    let (horizontal, vertical) = cluster_by_orientation(&lines)?;
    let votes = |group: &[PolarLine]| -> Vec<(PolarLine, u32)> {
        group.iter().map(|l| *detected.iter().find(|d| d.0 == *l).expect("clustered line was detected")).collect()
    };
    let eps = cfg.eps * small.width().max(small.height()) as f64 / 1200.0;
    let (h_ref, v_ref) = (mean_line(&horizontal), mean_line(&vertical));
    let merge = |group: &[PolarLine], reference: &PolarLine| {
        if cfg.merge_strongest {
            dedup_lines_strongest(&votes(group), reference, eps)
        } else {
            dedup_lines(group, reference, eps)
        }
    };
    let horizontal = merge(&horizontal, &v_ref)?;
    let vertical = merge(&vertical, &h_ref)?;
    Ok(BoardLines { width: small.width(), height: small.height(), factor, horizontal, vertical })
}

/// Detects lines, fits the board lattice and returns the board corners in
/// the coordinates of `img`.
pub fn locate_corners(img: &Image, cfg: &LocateConfig) -> Result<Localisation, LocateError> {
    let BoardLines { width, height, factor, horizontal, vertical } = detect_lines(img, cfg)?;
    let (w, h) = (width as f64, height as f64);
    let mut pts = Vec::with_capacity(horizontal.len() * vertical.len());
    for a in &horizontal {
        for b in &vertical {
            if let Ok(p) = intersect(a, b) {
                if p.x >= -0.5 && p.x <= w - 0.5 && p.y >= -0.5 && p.y <= h - 0.5 {
                    pts.push(p);
                }
            }
        }
    }
    let rcfg = RansacConfig { gamma: cfg.gamma, max_iterations: cfg.max_iterations, seed: cfg.seed };
    let fit = ransac_grid(&pts, &horizontal, &vertical, &rcfg)?;

    let partial = WarpedGrid::from_targets(&fit.targets).ok_or_else(|| LocateError::completion("no inliers".into()))?;
    let (ex, ey) = partial.extent();
    if ex < 1 || ey < 1 {
        return Err(LocateError::completion(format!("inliers span {ex}×{ey} squares")));
    }
    let grid = if ex == 8 && ey == 8 {
        partial
    } else {
        let (u0, u1) = ((partial.x_max - 9) as f64, (partial.x_min + 9) as f64);
        let (v0, v1) = ((partial.y_max - 9) as f64, (partial.y_min + 9) as f64);
        let to_lattice = fit
            .h
            .after(&Homography::scale_translate(1.0 / factor, 1.0 / factor, 0.0, 0.0))
            .map_err(|e| LocateError::completion(e.to_string()))?;
        let (warped, frame) = render_lattice_region(img, &to_lattice, u0, u1, v0, v1, cfg.completion_px_per_unit)?;
        let ccfg = CompletionConfig {
            canny_low: cfg.completion_canny_low,
            canny_high: cfg.completion_canny_high,
            tolerance: cfg.completion_tolerance,
        };
        complete_grid(&warped, &frame, &fit.targets, &ccfg)?
    };

    let inv = fit.h.inverse().map_err(|e| LocateError::new(Stage::Corners, e.to_string()))?;
    let mut corners = [Point::new(0.0, 0.0); 4];
    for (c, u) in corners.iter_mut().zip(grid.corners()) {
        let p = inv.apply(u).ok_or_else(|| LocateError::new(Stage::Corners, "corner maps to infinity"))?;
        *c = Point::new(p.x * factor, p.y * factor);
    }
    let corners = CornerSet::new(corners);
    if !corners.is_convex() {
        return Err(LocateError::new(Stage::Corners, "corners do not form a convex quadrilateral"));
    }
    let homography = corners.board_homography().map_err(|e| LocateError::new(Stage::Corners, e.to_string()))?;
    Ok(Localisation { corners, homography, grid, fit })
}
