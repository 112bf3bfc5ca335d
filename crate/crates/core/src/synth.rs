//! Synthetic board photographs with exact ground truth: a flat 8×8 board
//! seen through a pinhole camera, with upright piece sprites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::HashSet;
use thiserror::Error;

use crate::chessio::{emit_fen, legality_check, parse_fen, Colour, FenError, LabelRecord, Perspective, Piece, PieceKind, Position, Square};
use crate::geometry::{fit_homography, CornerSet, GeometryError, Homography, Point};
use crate::image::Image;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error(transparent)]
    Fen(#[from] FenError),
    #[error("square_px must be at least 20, got {0}")]
    SquareSize(f64),
    #[error("noise sigma must lie in [0, 0.1], got {0}")]
    Noise(f64),
    #[error("camera: {0}")]
    Camera(#[from] GeometryError),
    #[error("image size must be positive")]
    Size,
}

pub type Rgb = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Palette {
    pub light: Rgb,
    pub dark: Rgb,
    pub table: Rgb,
    pub white_piece: Rgb,
    pub black_piece: Rgb,
    pub white_outline: Rgb,
    pub black_outline: Rgb,
}

impl Palette {
    pub fn classic() -> Self {
        Self {
            light: [0.86, 0.78, 0.62],
            dark: [0.45, 0.30, 0.18],
            table: [0.30, 0.36, 0.42],
            white_piece: [0.96, 0.94, 0.90],
            black_piece: [0.10, 0.09, 0.09],
            white_outline: [0.15, 0.12, 0.10],
            black_outline: [0.70, 0.70, 0.70],
        }
    }

    /// A different set and board used as the "unseen" domain.
    pub fn restyled() -> Self {
        Self {
            light: [0.90, 0.90, 0.80],
            dark: [0.35, 0.52, 0.35],
            table: [0.55, 0.45, 0.38],
            white_piece: [0.98, 0.85, 0.45],
            black_piece: [0.55, 0.10, 0.12],
            white_outline: [0.35, 0.25, 0.05],
            black_outline: [0.95, 0.75, 0.75],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Camera {
    /// Board-plane pixels (`square_px` per square, origin at the far-left
    /// corner) to image pixels.
    Fixed(Homography),
    /// Pinhole camera looking at the board centre from a random elevation,
    /// with small azimuth and roll jitter, drawn from the config seed.
    Random { tilt_min_deg: f64, tilt_max_deg: f64, max_azimuth_deg: f64, max_roll_deg: f64 },
}

impl Default for Camera {
    fn default() -> Self {
        Camera::Random { tilt_min_deg: 45.0, tilt_max_deg: 60.0, max_azimuth_deg: 6.0, max_roll_deg: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub square_px: f64,
    pub palette: Palette,
    /// 0 = the training set, 1 = the restyled set.
    pub glyph_style: u8,
    pub camera: Camera,
    /// Standard deviation of additive Gaussian pixel noise.
    pub noise: f64,
    /// Maximum displacement of interior grid lines, in image pixels.
    pub line_jitter: f64,
    /// Amplitude of the global gain and linear lighting gradient.
    pub lighting: f64,
    pub perspective: Perspective,
    pub seed: u64,
    pub supersample: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            square_px: 40.0,
            palette: Palette::classic(),
            glyph_style: 0,
            camera: Camera::default(),
            noise: 0.0,
            line_jitter: 0.0,
            lighting: 0.1,
            perspective: Perspective::White,
            seed: 0,
            supersample: 2,
        }
    }
}

impl SynthConfig {
    pub fn restyled() -> Self {
        Self { palette: Palette::restyled(), glyph_style: 1, ..Self::default() }
    }
}

/// A rendered scene and its exact geometry.
#[derive(Clone, Debug)]
pub struct Scene {
    pub image: Image,
    pub label: LabelRecord,
    /// Board units (corners at (0,0)..(8,8), far-left first) to image pixels.
    pub board_to_image: Homography,
}

fn board_corners() -> [Point; 4] {
    [Point::new(0.0, 0.0), Point::new(8.0, 0.0), Point::new(8.0, 8.0), Point::new(0.0, 8.0)]
}

fn random_camera(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Homography, GeometryError> {
    let Camera::Random { tilt_min_deg, tilt_max_deg, max_azimuth_deg, max_roll_deg } = cfg.camera else {
        unreachable!()
    };
    let sym = |rng: &mut ChaCha8Rng, m: f64| if m > 0.0 { rng.random_range(-m..=m) } else { 0.0 };
    let phi = if tilt_max_deg > tilt_min_deg { rng.random_range(tilt_min_deg..=tilt_max_deg) } else { tilt_min_deg }.to_radians();
    let az = sym(rng, max_azimuth_deg).to_radians();
    let roll = sym(rng, max_roll_deg).to_radians();
    let dist = rng.random_range(14.0..22.0);
    let fill = rng.random_range(0.62..0.8);
    let (offx, offy) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));

    // World: board in z = 0, centred, +y pointing away from the camera.
    let (ca, sa) = (az.cos(), az.sin());
    let cam = [0.0, -dist * phi.cos(), dist * phi.sin()];
    let fwd = [0.0, phi.cos(), -phi.sin()];
    let right = [1.0, 0.0, 0.0];
    let up = [0.0, phi.sin(), phi.cos()];
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let project = |u: f64, v: f64| {
        let (x, y) = (u - 4.0, 4.0 - v);
        let p = [ca * x - sa * y - cam[0], sa * x + ca * y - cam[1], -cam[2]];
        let z = dot(p, fwd);
        let (px, py) = (dot(p, right) / z, -dot(p, up) / z);
        Point::new(px * roll.cos() - py * roll.sin(), px * roll.sin() + py * roll.cos())
    };
    let corners = board_corners().map(|c| project(c.x, c.y));
    // Leave room above the far edge for the tallest pieces.
    let far_w = corners[0].dist(corners[1]) / 8.0;
    let xs = corners.map(|p| p.x);
    let ys = corners.map(|p| p.y);
    let min = |a: [f64; 4]| a.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |a: [f64; 4]| a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (x0, x1) = (min(xs), max(xs));
    let (y0, y1) = (min(ys) - 1.4 * far_w, max(ys));
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let s = (fill * w / (x1 - x0)).min(fill * h / (y1 - y0));
    let slack_x = (w - s * (x1 - x0)) / 2.0;
    let slack_y = (h - s * (y1 - y0)) / 2.0;
    let tx = slack_x + 0.6 * offx * slack_x - s * x0;
    let ty = slack_y + 0.6 * offy * slack_y - s * y0;
    let dst = corners.map(|p| Point::new(s * p.x + tx, s * p.y + ty));
    fit_homography(&board_corners(), &dst)
}

#[derive(Clone, Debug)]
enum Prim {
    Circle { c: (f64, f64), r: f64 },
    Ellipse { c: (f64, f64), rx: f64, ry: f64 },
    /// Convex, counter-clockwise in sprite coordinates (y up).
    Poly(Vec<(f64, f64)>),
}

fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Prim {
    Prim::Poly(vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
}

fn trap(y0: f64, w0: f64, y1: f64, w1: f64) -> Prim {
    Prim::Poly(vec![(-w0, y0), (w0, y0), (w1, y1), (-w1, y1)])
}

fn diamond(cx: f64, cy: f64, r: f64) -> Prim {
    Prim::Poly(vec![(cx, cy - r), (cx + r, cy), (cx, cy + r), (cx - r, cy)])
}

impl Prim {
    fn contains(&self, x: f64, y: f64, grow: f64) -> bool {
        match self {
            Prim::Circle { c, r } => (x - c.0).powi(2) + (y - c.1).powi(2) <= (r + grow).powi(2),
            Prim::Ellipse { c, rx, ry } => {
                ((x - c.0) / (rx + grow)).powi(2) + ((y - c.1) / (ry + grow)).powi(2) <= 1.0
            }
            Prim::Poly(pts) => {
                let n = pts.len();
                (0..n).all(|i| {
                    let (a, b) = (pts[i], pts[(i + 1) % n]);
                    let (ex, ey) = (b.0 - a.0, b.1 - a.1);
                    let len = (ex * ex + ey * ey).sqrt();
                    // Outward normal of a CCW edge is (ey, -ex).
                    ((x - a.0) * ey - (y - a.1) * ex) / len <= grow
                })
            }
        }
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        match self {
            Prim::Circle { c, r } => (c.0 - r, c.0 + r, c.1 - r, c.1 + r),
            Prim::Ellipse { c, rx, ry } => (c.0 - rx, c.0 + rx, c.1 - ry, c.1 + ry),
            Prim::Poly(pts) => pts.iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
                |(a, b, c, d), p| (a.min(p.0), b.max(p.0), c.min(p.1), d.max(p.1)),
            ),
        }
    }
}

/// Piece silhouette in units of the sprite width, x ∈ [-0.5, 0.5], y up from the base.
fn glyph(kind: PieceKind, style: u8) -> Vec<Prim> {
    let base = rect(-0.42, 0.42, 0.0, 0.14);
    if style == 0 {
        match kind {
            PieceKind::Pawn => vec![base, trap(0.14, 0.26, 0.6, 0.12), Prim::Circle { c: (0.0, 0.76), r: 0.22 }],
            PieceKind::Knight => vec![
                base,
                trap(0.14, 0.32, 0.8, 0.2),
                Prim::Poly(vec![(-0.22, 0.7), (0.42, 0.9), (0.2, 1.3), (-0.26, 1.15)]),
            ],
            PieceKind::Bishop => vec![
                base,
                trap(0.14, 0.3, 0.85, 0.12),
                Prim::Ellipse { c: (0.0, 1.08), rx: 0.2, ry: 0.28 },
                Prim::Circle { c: (0.0, 1.4), r: 0.07 },
            ],
            PieceKind::Rook => vec![base, rect(-0.28, 0.28, 0.14, 0.95), rect(-0.4, 0.4, 0.95, 1.2)],
            PieceKind::Queen => vec![
                base,
                trap(0.14, 0.32, 1.1, 0.14),
                trap(1.1, 0.14, 1.45, 0.36),
                Prim::Circle { c: (-0.3, 1.55), r: 0.08 },
                Prim::Circle { c: (0.0, 1.57), r: 0.08 },
                Prim::Circle { c: (0.3, 1.55), r: 0.08 },
            ],
            PieceKind::King => vec![
                base,
                trap(0.14, 0.32, 1.25, 0.18),
                rect(-0.26, 0.26, 1.25, 1.45),
                rect(-0.06, 0.06, 1.45, 1.85),
                rect(-0.18, 0.18, 1.58, 1.7),
            ],
        }
    } else {
        let base = rect(-0.34, 0.34, 0.0, 0.1);
        match kind {
            PieceKind::Pawn => vec![base, trap(0.1, 0.3, 0.5, 0.05), diamond(0.0, 0.62, 0.2)],
            PieceKind::Knight => vec![
                base,
                rect(-0.2, 0.2, 0.1, 0.7),
                Prim::Poly(vec![(-0.35, 0.65), (0.3, 0.65), (0.3, 1.0), (-0.05, 1.25)]),
            ],
            PieceKind::Bishop => vec![base, trap(0.1, 0.16, 1.0, 0.16), diamond(0.0, 1.15, 0.28)],
            PieceKind::Rook => vec![base, trap(0.1, 0.4, 1.1, 0.3), rect(-0.4, -0.2, 1.1, 1.3), rect(0.2, 0.4, 1.1, 1.3)],
            PieceKind::Queen => vec![
                base,
                rect(-0.22, 0.22, 0.1, 1.2),
                Prim::Ellipse { c: (0.0, 1.3), rx: 0.38, ry: 0.16 },
                diamond(0.0, 1.55, 0.12),
            ],
            PieceKind::King => vec![
                base,
                rect(-0.24, 0.24, 0.1, 1.3),
                Prim::Circle { c: (0.0, 1.45), r: 0.2 },
                diamond(0.0, 1.78, 0.12),
            ],
        }
    }
}

fn glyph_height(kind: PieceKind, style: u8) -> f64 {
    glyph(kind, style).iter().map(|p| p.bounds().3).fold(0.0, f64::max)
}

struct Sprite {
    prims: Vec<Prim>,
    base: Point,
    width: f64,
    body: Rgb,
    outline: Rgb,
}

/// Deterministic scene rendering.
pub fn render_scene(fen: &str, cfg: &SynthConfig) -> Result<Scene, SynthError> {
    let position = parse_fen(fen)?;
    if !(cfg.square_px >= 20.0) {
        return Err(SynthError::SquareSize(cfg.square_px));
    }
    if !(0.0..=0.1).contains(&cfg.noise) {
        return Err(SynthError::Noise(cfg.noise));
    }
    if cfg.width == 0 || cfg.height == 0 {
        return Err(SynthError::Size);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let board_to_image = match cfg.camera {
        Camera::Fixed(h) => h.after(&Homography::scale_translate(cfg.square_px, cfg.square_px, 0.0, 0.0))?,
        Camera::Random { .. } => random_camera(cfg, &mut rng)?,
    };
    let image_to_board = board_to_image.inverse()?;
    let corners_img = board_corners().map(|c| board_to_image.apply(c).expect("board corners are finite"));

    // Interior grid lines displaced by up to `line_jitter` image pixels.
    let perimeter: f64 = (0..4).map(|i| corners_img[i].dist(corners_img[(i + 1) % 4])).sum();
    let px_per_unit = perimeter / 32.0;
    let jitter = |rng: &mut ChaCha8Rng| -> [f64; 9] {
        let mut b = [0.0; 9];
        for (i, v) in b.iter_mut().enumerate() {
            *v = i as f64;
            if (1..8).contains(&i) && cfg.line_jitter > 0.0 {
                *v += rng.random_range(-1.0..=1.0) * cfg.line_jitter / px_per_unit;
            }
        }
        b
    };
    let bx = jitter(&mut rng);
    let by = jitter(&mut rng);
    let gain = 1.0 + cfg.lighting * rng.random_range(-1.0..=1.0);
    let grad = (cfg.lighting * rng.random_range(-1.0..=1.0), cfg.lighting * rng.random_range(-1.0..=1.0));
    let noise_seed: u64 = rng.random();

    let ss = cfg.supersample.max(1);
    let (sw, sh) = (cfg.width * ss, cfg.height * ss);
    let pal = &cfg.palette;
    let mut buf = vec![0.0f64; sw * sh * 3];
    let cell = |b: &[f64; 9], t: f64| b.iter().rposition(|&e| e <= t).unwrap_or(0).min(7);
    for sy in 0..sh {
        for sx in 0..sw {
            let p = Point::new((sx as f64 + 0.5) / ss as f64 - 0.5, (sy as f64 + 0.5) / ss as f64 - 0.5);
            let col = match image_to_board.apply(p) {
                Some(q) if (0.0..8.0).contains(&q.x) && (0.0..8.0).contains(&q.y) => {
                    let (c, r) = (cell(&bx, q.x), cell(&by, q.y));
                    // Bottom-left square as seen from the near side is dark.
                    if (c + 7 - r) % 2 == 0 { pal.dark } else { pal.light }
                }
                _ => pal.table,
            };
            buf[(sy * sw + sx) * 3..][..3].copy_from_slice(&col);
        }
    }

    let mut sprites = Vec::new();
    for row in 0..8 {
        for col in 0..8 {
            let sq = board_square(cfg.perspective, col, row);
            let Some(piece) = position.get(sq) else { continue };
            // Pieces are never placed exactly on the square centre.
            let (u, v) = (col as f64 + 0.5 + rng.random_range(-0.1..0.1), row as f64 + 0.5 + rng.random_range(-0.1..0.1));
            let size = rng.random_range(0.93..1.07);
            let at = |u: f64, v: f64| board_to_image.apply(Point::new(u, v)).expect("board points are finite");
            let centre = at(u, v);
            let local_w = at(u - 0.5, v).dist(at(u + 0.5, v));
            let local_h = at(u, v - 0.5).dist(at(u, v + 0.5));
            let base = Point::new(centre.x, centre.y + 0.25 * local_h);
            let (body, outline) = match piece.colour {
                Colour::White => (pal.white_piece, pal.white_outline),
                Colour::Black => (pal.black_piece, pal.black_outline),
            };
            sprites.push(Sprite { prims: glyph(piece.kind, cfg.glyph_style), base, width: 0.7 * size * local_w, body, outline });
        }
    }
    // Back to front.
    sprites.sort_by(|a, b| a.base.y.total_cmp(&b.base.y));
    for s in &sprites {
        draw_sprite(&mut buf, sw, sh, ss, s);
    }

    let (w, h) = (cfg.width, cfg.height);
    let normal = Normal::new(0.0, cfg.noise.max(1e-300)).expect("finite sigma");
    let mut noise_rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let mut data = vec![0.0; w * h * 3];
    let norm = 1.0 / (ss * ss) as f64;
    for y in 0..h {
        for x in 0..w {
            let light = gain * (1.0 + grad.0 * (x as f64 / w as f64 - 0.5) + grad.1 * (y as f64 / h as f64 - 0.5));
            for c in 0..3 {
                let mut s = 0.0;
                for dy in 0..ss {
                    for dx in 0..ss {
                        s += buf[((y * ss + dy) * sw + x * ss + dx) * 3 + c];
                    }
                }
                let mut v = s * norm * light;
                if cfg.noise > 0.0 {
                    v += normal.sample(&mut noise_rng);
                }
                data[(y * w + x) * 3 + c] = v;
            }
        }
    }
    let image = Image::from_clamped(w, h, 3, data).expect("buffer sized above");
    let corners = CornerSet::new(corners_img);
    let label = LabelRecord {
        image: String::from("board.png"),
        fen: emit_fen(&position),
        corners: corners.as_arrays(),
        perspective: cfg.perspective,
    };
    Ok(Scene { image, label, board_to_image })
}

/// Square shown at board cell (`col`, `row`), where row 0 is the far edge.
pub fn board_square(perspective: Perspective, col: usize, row: usize) -> Square {
    perspective.to_board(Square::new(col as u8, (7 - row) as u8).expect("cell in range"))
}

fn draw_sprite(buf: &mut [f64], sw: usize, sh: usize, ss: usize, s: &Sprite) {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &s.prims {
        let b = p.bounds();
        x0 = x0.min(b.0);
        x1 = x1.max(b.1);
        y0 = y0.min(b.2);
        y1 = y1.max(b.3);
    }
    let grow = 0.05;
    let ssf = ss as f64;
    // Supersample pixel → sprite units.
    let to_sprite = |px: usize, py: usize| {
        let ix = (px as f64 + 0.5) / ssf - 0.5;
        let iy = (py as f64 + 0.5) / ssf - 0.5;
        ((ix - s.base.x) / s.width, (s.base.y - iy) / s.width)
    };
    let lo_x = (((s.base.x + (x0 - grow) * s.width) + 0.5) * ssf).floor().max(0.0) as usize;
    let hi_x = ((((s.base.x + (x1 + grow) * s.width) + 0.5) * ssf).ceil().max(0.0) as usize).min(sw);
    let lo_y = (((s.base.y - (y1 + grow) * s.width) + 0.5) * ssf).floor().max(0.0) as usize;
    let hi_y = ((((s.base.y - (y0 - grow) * s.width) + 0.5) * ssf).ceil().max(0.0) as usize).min(sh);
    for py in lo_y..hi_y {
        for px in lo_x..hi_x {
            let (u, v) = to_sprite(px, py);
            let colour = if s.prims.iter().any(|p| p.contains(u, v, 0.0)) {
                // Cylindrical shading across the body.
                let shade = 1.0 - 0.3 * (u.abs() / 0.5).min(1.0).powi(2);
                s.body.map(|c| c * shade + (1.0 - shade) * 0.5 * c)
            } else if s.prims.iter().any(|p| p.contains(u, v, grow)) {
                s.outline
            } else {
                continue;
            };
            buf[(py * sw + px) * 3..][..3].copy_from_slice(&colour);
        }
    }
}

pub fn render(fen: &str, cfg: &SynthConfig) -> Result<(Image, LabelRecord), SynthError> {
    let s = render_scene(fen, cfg)?;
    Ok((s.image, s.label))
}

/// Random distinct positions that pass the static legality check.
pub fn sample_positions(count: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = random_position(&mut rng);
        if !legality_check(&p).legal {
            continue;
        }
        let fen = emit_fen(&p);
        if seen.insert(fen.clone()) {
            out.push(fen);
        }
    }
    out
}

fn random_position(rng: &mut ChaCha8Rng) -> Position {
    let mut p = Position::empty();
    let mut free: Vec<Square> = Square::all().collect();
    let mut place = |p: &mut Position, piece: Piece, rng: &mut ChaCha8Rng| {
        let pawn = piece.kind == PieceKind::Pawn;
        let choices: Vec<usize> =
            (0..free.len()).filter(|&i| !pawn || (1..7).contains(&free[i].rank())).collect();
        if choices.is_empty() {
            return;
        }
        let i = choices[rng.random_range(0..choices.len())];
        p.set(free.swap_remove(i), Some(piece));
    };
    // Play-out density: from an opening-like crowd to a sparse endgame.
    let keep = rng.random_range(0.15..1.0);
    for colour in [Colour::White, Colour::Black] {
        place(&mut p, Piece::new(colour, PieceKind::King), rng);
        for kind in PieceKind::ALL.into_iter().filter(|k| *k != PieceKind::King) {
            for _ in 0..kind.start_count() {
                if rng.random_bool(keep) {
                    place(&mut p, Piece::new(colour, kind), rng);
                }
            }
        }
    }
    p
}

/// Heights of the sprites in square widths, for crop-size checks.
pub fn piece_height_in_squares(kind: PieceKind, style: u8) -> f64 {
    0.7 * glyph_height(kind, style)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chessio::STARTING_FEN;

    #[test]
    fn fixed_camera_corners() {
        let cfg = SynthConfig {
            camera: Camera::Fixed(Homography::scale_translate(1.0, 1.0, 20.0, 10.0)),
            width: 400,
            height: 360,
            ..SynthConfig::default()
        };
        let (img, label) = render(STARTING_FEN, &cfg).unwrap();
        assert_eq!((img.width(), img.height()), (400, 360));
        let expect = [[20.0, 10.0], [340.0, 10.0], [340.0, 330.0], [20.0, 330.0]];
        for (a, b) in label.corners.iter().flatten().zip(expect.iter().flatten()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(label.fen, STARTING_FEN);
    }

    #[test]
    fn rendering_is_deterministic() {
        let cfg = SynthConfig { noise: 0.02, line_jitter: 1.0, seed: 9, ..SynthConfig::default() };
        let a = render(STARTING_FEN, &cfg).unwrap();
        let b = render(STARTING_FEN, &cfg).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let c = render(STARTING_FEN, &SynthConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn label_corners_are_exact_images() {
        for seed in 0..10 {
            let cfg = SynthConfig { seed, ..SynthConfig::default() };
            let s = render_scene("8/8/8/8/8/8/8/4K3", &cfg).unwrap();
            let truth = CornerSet::new(board_corners().map(|c| s.board_to_image.apply(c).unwrap()));
            assert_eq!(s.label.corners, truth.as_arrays());
            assert!(s.label.corners_in_bounds(640.0, 480.0));
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(render("9/8/8/8/8/8/8/8", &SynthConfig::default()), Err(SynthError::Fen(_))));
        let cfg = SynthConfig { noise: 0.5, ..SynthConfig::default() };
        assert_eq!(render(STARTING_FEN, &cfg).unwrap_err(), SynthError::Noise(0.5));
    }

    #[test]
    fn sampled_positions() {
        let a = sample_positions(1000, 4);
        assert_eq!(a.len(), 1000);
        assert_eq!(a.iter().collect::<HashSet<_>>().len(), 1000);
        assert_eq!(sample_positions(1, 4), sample_positions(1, 4));
        let mut counts = [0usize; 6];
        for fen in &a {
            let p = parse_fen(fen).unwrap();
            assert!(legality_check(&p).legal);
            for (_, piece) in p.pieces() {
                counts[piece.kind.index()] += 1;
            }
        }
        let pawns = counts[PieceKind::Pawn.index()];
        assert!(counts.iter().enumerate().all(|(i, &c)| i == 0 || c < pawns));
    }

    #[test]
    fn tallest_piece_fits_two_squares() {
        for style in [0, 1] {
            for kind in PieceKind::ALL {
                assert!(piece_height_in_squares(kind, style) < 1.4);
            }
        }
    }
}
