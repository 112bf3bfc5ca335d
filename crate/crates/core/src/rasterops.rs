//! Low-level raster primitives used by board localisation: grayscale
//! conversion, 2D filtering, Sobel gradients, Canny edges and the Hough line
//! transform.

use std::collections::VecDeque;
use std::f64::consts::PI;

use thiserror::Error;

use crate::image::{Image, Plane};

#[derive(Debug, Error, PartialEq)]
pub enum RasterError {
    #[error("kernel side {side} exceeds image dimensions {width}x{height}")]
    KernelTooLarge { side: usize, width: usize, height: usize },
    #[error("kernel side must be odd, got {0}")]
    EvenKernel(usize),
    #[error("kernel weights have length {got}, expected {expected}")]
    KernelWeights { expected: usize, got: usize },
    #[error("expected a single-channel image, got {0} channels")]
    NotGrayscale(usize),
    #[error("invalid Canny thresholds low={low} high={high} (need 0 <= low <= high <= 1)")]
    Thresholds { low: f64, high: f64 },
    #[error("Hough resolutions must be positive")]
    Resolution,
}

/// Square, odd-sided filter kernel, applied as a correlation (not flipped).
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    size: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(size: usize, weights: Vec<f64>) -> Result<Self, RasterError> {
        if size % 2 == 0 {
            return Err(RasterError::EvenKernel(size));
        }
        if weights.len() != size * size {
            return Err(RasterError::KernelWeights { expected: size * size, got: weights.len() });
        }
        Ok(Self { size, weights })
    }

    pub fn identity(size: usize) -> Result<Self, RasterError> {
        let mut w = vec![0.0; size * size];
        if size % 2 == 1 {
            w[size * size / 2] = 1.0;
        }
        Self::new(size, w)
    }

    pub fn sobel_x() -> Self {
        Self { size: 3, weights: vec![-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0] }
    }

    pub fn sobel_y() -> Self {
        Self { size: 3, weights: vec![-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0] }
    }

    /// Normalised Gaussian.
    pub fn gaussian(size: usize, sigma: f64) -> Result<Self, RasterError> {
        if size % 2 == 0 {
            return Err(RasterError::EvenKernel(size));
        }
        let r = (size / 2) as f64;
        let mut w = Vec::with_capacity(size * size);
        for y in 0..size {
            for x in 0..size {
                let dx = x as f64 - r;
                let dy = y as f64 - r;
                w.push((-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp());
            }
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        Self::new(size, w)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Rec. 601 luma. Single-channel input is returned unchanged.
pub fn to_grayscale(img: &Image) -> Image {
    if img.channels() == 1 {
        return img.clone();
    }
    let data = img
        .data()
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0))
        .collect();
    Image::new(img.width(), img.height(), 1, data).expect("luma of valid pixels is valid")
}

/// Same-size correlation with clamp-to-edge border replication.
pub fn convolve(src: &Plane, k: &Kernel) -> Result<Plane, RasterError> {
    let (w, h) = (src.width, src.height);
    if k.size > w || k.size > h {
        return Err(RasterError::KernelTooLarge { side: k.size, width: w, height: h });
    }
    let r = (k.size / 2) as isize;
    let mut out = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..k.size {
                let sy = (y as isize + ky as isize - r).clamp(0, h as isize - 1) as usize;
                let row = &src.data[sy * w..(sy + 1) * w];
                let krow = &k.weights[ky * k.size..(ky + 1) * k.size];
                for (kx, kw) in krow.iter().enumerate() {
                    let sx = (x as isize + kx as isize - r).clamp(0, w as isize - 1) as usize;
                    acc += kw * row[sx];
                }
            }
            out.data[y * w + x] = acc;
        }
    }
    Ok(out)
}

fn require_gray(img: &Image) -> Result<(), RasterError> {
    if img.channels() != 1 {
        return Err(RasterError::NotGrayscale(img.channels()));
    }
    Ok(())
}

/// Absolute horizontal Sobel response scaled by 1/4, so a unit step maps to 1.
pub fn sobel_x(img: &Image) -> Result<Image, RasterError> {
    sobel_abs(img, &Kernel::sobel_x())
}

/// Absolute vertical Sobel response scaled by 1/4.
pub fn sobel_y(img: &Image) -> Result<Image, RasterError> {
    sobel_abs(img, &Kernel::sobel_y())
}

fn sobel_abs(img: &Image, k: &Kernel) -> Result<Image, RasterError> {
    require_gray(img)?;
    let g = convolve(&Plane::from(img), k)?;
    let data = g.data.iter().map(|v| (v.abs() / 4.0).min(1.0)).collect();
    Ok(Image::new(img.width(), img.height(), 1, data).expect("scaled magnitudes are in range"))
}

/// Binary edge indicator map.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl EdgeMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn iter_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }

    pub fn to_image(&self) -> Image {
        Image::from_fn_gray(self.width, self.height, |x, y| if self.get(x, y) { 1.0 } else { 0.0 })
    }
}

pub const CANNY_SIGMA: f64 = 1.4;
pub const CANNY_KERNEL: usize = 5;

/// Gradient of the Gaussian-smoothed image: `(gx, gy, magnitude)`, with the
/// magnitude scaled by 1/4 so thresholds live in `[0, 1]`.
pub fn smoothed_gradient(img: &Image) -> Result<(Plane, Plane, Plane), RasterError> {
    require_gray(img)?;
    let plane = Plane::from(img);
    let smooth = if img.width() >= CANNY_KERNEL && img.height() >= CANNY_KERNEL {
        convolve(&plane, &Kernel::gaussian(CANNY_KERNEL, CANNY_SIGMA)?)?
    } else {
        plane
    };
    let gx = convolve(&smooth, &Kernel::sobel_x())?;
    let gy = convolve(&smooth, &Kernel::sobel_y())?;
    let mag = Plane {
        width: gx.width,
        height: gx.height,
        data: gx.data.iter().zip(&gy.data).map(|(a, b)| (a * a + b * b).sqrt() / 4.0).collect(),
    };
    Ok((gx, gy, mag))
}

/// Canny edge detector: Gaussian smoothing (5×5, σ=1.4), Sobel gradient,
/// non-maximum suppression along the quantised gradient direction, and
/// 8-connected hysteresis between `low` and `high`.
pub fn canny(img: &Image, low: f64, high: f64) -> Result<EdgeMap, RasterError> {
    if !(0.0..=1.0).contains(&low) || !(0.0..=1.0).contains(&high) || low > high {
        return Err(RasterError::Thresholds { low, high });
    }
    let (gx, gy, mag) = smoothed_gradient(img)?;
    let (w, h) = (img.width(), img.height());
    let m = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag.data[y as usize * w + x as usize]
        }
    };

    // 0 = not a candidate, 1 = weak, 2 = strong
    let mut class = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let v = mag.data[i];
            if v <= 0.0 || v < low {
                continue;
            }
            let angle = gy.data[i].atan2(gx.data[i]);
            let mut deg = angle.to_degrees();
            if deg < 0.0 {
                deg += 180.0;
            }
            let (dx, dy) = if !(22.5..157.5).contains(&deg) {
                (1, 0)
            } else if deg < 67.5 {
                (1, 1)
            } else if deg < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let (xi, yi) = (x as isize, y as isize);
            let prev = m(xi - dx, yi - dy);
            let next = m(xi + dx, yi + dy);
            // Strict on one side so flat-topped ridges stay one pixel wide.
            if v > prev && v >= next {
                class[i] = if v >= high { 2 } else { 1 };
            }
        }
    }

    let mut edges = EdgeMap::empty(w, h);
    let mut queue: VecDeque<usize> = VecDeque::new();
    for (i, c) in class.iter().enumerate() {
        if *c == 2 {
            edges.bits[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if class[j] == 1 && !edges.bits[j] {
                    edges.bits[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(edges)
}

/// Line in Hesse normal form: `x·cos θ + y·sin θ = ρ`, with θ in `[0, π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarLine {
    pub rho: f64,
    pub theta: f64,
}

impl PolarLine {
    /// Normalises θ into `[0, π)`, flipping the sign of ρ as needed.
    pub fn new(rho: f64, theta: f64) -> Self {
        let mut rho = rho;
        let mut theta = theta;
        let turns = (theta / PI).floor();
        if turns != 0.0 {
            theta -= turns * PI;
            if (turns as i64).rem_euclid(2) == 1 {
                rho = -rho;
            }
        }
        if theta >= PI {
            theta -= PI;
            rho = -rho;
        }
        Self { rho, theta }
    }

    /// Signed distance of a point from the line.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        x * self.theta.cos() + y * self.theta.sin() - self.rho
    }
}

/// Hough vote accumulator over (θ, ρ) cells.
#[derive(Clone, Debug)]
pub struct HoughAccumulator {
    pub rho_res: f64,
    pub theta_res: f64,
    pub n_theta: usize,
    pub n_rho: usize,
    pub rho_max: f64,
    /// Row-major `[theta][rho]`.
    pub votes: Vec<u32>,
}

impl HoughAccumulator {
    pub fn line_at(&self, t: usize, r: usize) -> PolarLine {
        PolarLine { rho: r as f64 * self.rho_res - self.rho_max, theta: t as f64 * self.theta_res }
    }

    #[inline]
    pub fn votes_at(&self, t: usize, r: usize) -> u32 {
        self.votes[t * self.n_rho + r]
    }

    /// Every cell with at least `votes_min` votes.
    pub fn lines(&self, votes_min: u32) -> Vec<PolarLine> {
        let mut out = Vec::new();
        for t in 0..self.n_theta {
            for r in 0..self.n_rho {
                if self.votes_at(t, r) >= votes_min.max(1) {
                    out.push(self.line_at(t, r));
                }
            }
        }
        out
    }

    /// Local maxima in a `(2·radius+1)²` window, strongest first, capped at
    /// `max_lines`. Ties between equal neighbours keep the lower index.
    pub fn peaks(&self, votes_min: u32, radius: usize, max_lines: usize) -> Vec<(PolarLine, u32)> {
        let rad = radius as isize;
        let mut found = Vec::new();
        for t in 0..self.n_theta {
            for r in 0..self.n_rho {
                let v = self.votes_at(t, r);
                if v < votes_min.max(1) {
                    continue;
                }
                let mut is_peak = true;
                'win: for dt in -rad..=rad {
                    for dr in -rad..=rad {
                        if dt == 0 && dr == 0 {
                            continue;
                        }
                        let tt = t as isize + dt;
                        let rr = r as isize + dr;
                        if rr < 0 || rr >= self.n_rho as isize {
                            continue;
                        }
                        // θ wraps with ρ mirrored.
                        let (tt, rr) = if tt < 0 {
                            (tt + self.n_theta as isize, self.n_rho as isize - 1 - rr)
                        } else if tt >= self.n_theta as isize {
                            (tt - self.n_theta as isize, self.n_rho as isize - 1 - rr)
                        } else {
                            (tt, rr)
                        };
                        let u = self.votes_at(tt as usize, rr as usize);
                        let earlier = (tt as usize, rr as usize) < (t, r);
                        if u > v || (u == v && earlier) {
                            is_peak = false;
                            break 'win;
                        }
                    }
                }
                if is_peak {
                    found.push((self.line_at(t, r), v));
                }
            }
        }
        found.sort_by(|a, b| b.1.cmp(&a.1));
        found.truncate(max_lines);
        found
    }
}

pub fn hough_accumulate(edges: &EdgeMap, rho_res: f64, theta_res: f64) -> Result<HoughAccumulator, RasterError> {
    if !(rho_res > 0.0) || !(theta_res > 0.0) {
        return Err(RasterError::Resolution);
    }
    let rho_max = ((edges.width * edges.width + edges.height * edges.height) as f64).sqrt();
    let n_theta = (PI / theta_res).round().max(1.0) as usize;
    let n_rho = (2.0 * rho_max / rho_res).ceil() as usize + 1;
    let trig: Vec<(f64, f64)> = (0..n_theta).map(|t| {
        let th = t as f64 * theta_res;
        (th.cos(), th.sin())
    }).collect();
    let mut votes = vec![0u32; n_theta * n_rho];
    for (x, y) in edges.iter_edges() {
        let (xf, yf) = (x as f64, y as f64);
        for (t, (c, s)) in trig.iter().enumerate() {
            let rho = xf * c + yf * s;
            let r = ((rho + rho_max) / rho_res).round() as usize;
            votes[t * n_rho + r] += 1;
        }
    }
    Ok(HoughAccumulator { rho_res, theta_res, n_theta, n_rho, rho_max, votes })
}

/// All accumulator cells with `votes >= votes_min`, as polar lines.
pub fn hough_lines(edges: &EdgeMap, rho_res: f64, theta_res: f64, votes_min: u32) -> Result<Vec<PolarLine>, RasterError> {
    Ok(hough_accumulate(edges, rho_res, theta_res)?.lines(votes_min))
}
