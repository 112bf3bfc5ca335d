use boardsight::boardloc::*;
use boardsight::chessio::corners_within;
use boardsight::geometry::{fit_homography, Homography, Point};
use boardsight::rasterops::PolarLine;
use boardsight::synth::{render_scene, SynthConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_homography(rng: &mut ChaCha8Rng) -> Homography {
    loop {
        let rows = [
            [rng.random_range(0.5..2.0), rng.random_range(-0.5..0.5), rng.random_range(-50.0..50.0)],
            [rng.random_range(-0.5..0.5), rng.random_range(0.5..2.0), rng.random_range(-50.0..50.0)],
            [rng.random_range(-1e-3..1e-3), rng.random_range(-1e-3..1e-3), 1.0],
        ];
        if let Ok(h) = Homography::from_rows(rows) {
            return h;
        }
    }
}

/// Inliers by exhaustive search over the four lattice points around the
/// warped position, with the warp written out longhand.
fn brute_force_inliers(h: &Homography, pts: &[Point], gamma: f64) -> Vec<usize> {
    let m = h.rows();
    let mut out = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        let w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
        if w.abs() < 1e-12 {
            continue;
        }
        let x = (m[0][0] * p.x + m[0][1] * p.y + m[0][2]) / w;
        let y = (m[1][0] * p.x + m[1][1] * p.y + m[1][2]) / w;
        let mut best = f64::INFINITY;
        for gx in [x.floor(), x.ceil()] {
            for gy in [y.floor(), y.ceil()] {
                best = best.min(((x - gx).powi(2) + (y - gy).powi(2)).sqrt());
            }
        }
        if best < gamma {
            out.push(i);
        }
    }
    out
}

#[test]
fn inliers_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        let h = random_homography(&mut rng);
        let inv = h.inverse().unwrap();
        let n = rng.random_range(0..=20);
        let pts: Vec<Point> = (0..n)
            .map(|_| {
                let q = Point::new(rng.random_range(-1..10) as f64, rng.random_range(-1..10) as f64);
                let q = Point::new(q.x + rng.random_range(-0.4..0.4), q.y + rng.random_range(-0.4..0.4));
                inv.apply(q).unwrap()
            })
            .collect();
        let gamma = rng.random_range(0.05..0.3);
        assert_eq!(inlier_indices(&h, &pts, gamma), brute_force_inliers(&h, &pts, gamma));
        assert_eq!(count_inliers(&h, &pts, gamma).0, brute_force_inliers(&h, &pts, gamma).len());
    }
}

#[test]
fn four_point_fit_inverts_a_known_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let truth = random_homography(&mut rng);
        let corners = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)];
        let src = corners.map(|c| truth.apply(c).unwrap());
        let h = homography_from_points(&src, 1, 1).unwrap();
        assert!(h.deviation(&truth.inverse().unwrap()) < 1e-6);
        let back = fit_homography(&corners, &src).unwrap();
        assert!(back.deviation(&truth) < 1e-6);
    }
}

/// Full 9×9 projected lattice plus uniform outliers, with the lines that
/// generated it.
fn projected_lattice(h: &Homography, outliers: usize, rng: &mut ChaCha8Rng) -> (Vec<Point>, Vec<PolarLine>, Vec<PolarLine>) {
    let inv = h.inverse().unwrap();
    let mut pts: Vec<Point> = (0..81).map(|i| inv.apply(Point::new((i % 9) as f64, (i / 9) as f64)).unwrap()).collect();
    let line = |a: Point, b: Point| {
        let theta = (b.x - a.x).atan2(-(b.y - a.y));
        PolarLine::new(a.x * theta.cos() + a.y * theta.sin(), theta)
    };
    let horizontal = (0..9).map(|y| line(pts[y * 9], pts[y * 9 + 8])).collect();
    let vertical = (0..9).map(|x| line(pts[x], pts[72 + x])).collect();
    for _ in 0..outliers {
        pts.push(Point::new(rng.random_range(0.0..400.0), rng.random_range(0.0..400.0)));
    }
    (pts, horizontal, vertical)
}

#[test]
fn ransac_recovers_a_projected_lattice_among_outliers() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let truth = Homography::from_rows([[0.04, 0.004, -2.0], [-0.002, 0.05, -3.0], [0.0, 0.0002, 1.0]]).unwrap();
    for outliers in [0, 20] {
        let (pts, horizontal, vertical) = projected_lattice(&truth, outliers, &mut rng);
        let fit = ransac_grid(&pts, &horizontal, &vertical, &RansacConfig::default()).unwrap();
        let hits = inlier_indices(&fit.h, &pts, 0.15);
        assert!(hits.len() >= 81);
        assert!((0..81).all(|i| hits.contains(&i)));
        let grid = WarpedGrid::from_targets(&fit.targets).unwrap();
        assert_eq!(grid.extent(), (8, 8));
        // True board corners land on the fitted grid's corners, in some order.
        for idx in [0, 8, 80, 72] {
            let q = fit.h.apply(pts[idx]).unwrap();
            let nearest = grid.corners().iter().map(|c| q.dist(*c)).fold(f64::INFINITY, f64::min);
            assert!(nearest < 0.01, "corner {idx} off by {nearest}");
        }
    }
    assert!(ransac_grid(&[Point::new(0.0, 0.0); 3], &[], &[], &RansacConfig::default()).is_err());
}

#[test]
fn localisation_on_tilted_renders() {
    for seed in 0..6 {
        let cfg = SynthConfig { seed, ..SynthConfig::default() };
        let scene = render_scene("8/8/8/8/8/8/8/8", &cfg).unwrap();
        let loc = locate_corners(&scene.image, &LocateConfig::default()).unwrap();
        assert!(corners_within(&loc.corners, &scene.label.corners, 0.01 * cfg.width as f64), "seed {seed}");
    }
}

#[test]
fn grid_completion_chooses_the_board_side() {
    let frame = WarpFrame { px_per_unit: 20.0, origin: Point::new(-3.0, -3.0) };
    let n = (14.0 * frame.px_per_unit) as usize + 1;
    let img = boardsight::image::Image::from_fn_gray(n, n, |x, y| {
        let u = frame.to_lattice(Point::new(x as f64, y as f64));
        if (0.0..8.0).contains(&u.x) && (0.0..8.0).contains(&u.y) {
            if (u.x.floor() as i64 + u.y.floor() as i64) % 2 == 0 { 0.8 } else { 0.2 }
        } else {
            0.5
        }
    });
    let lattice = |x0: i64, x1: i64, y0: i64, y1: i64| -> Vec<(i64, i64)> {
        (x0..=x1).flat_map(|x| (y0..=y1).map(move |y| (x, y))).collect()
    };
    let cfg = CompletionConfig::default();
    let full = WarpedGrid { x_min: 0, x_max: 8, y_min: 0, y_max: 8 };
    for (x0, x1, y0, y1) in [(2, 8, 0, 8), (0, 6, 0, 8), (1, 7, 0, 8), (0, 8, 2, 8), (0, 8, 1, 6), (1, 8, 0, 7)] {
        assert_eq!(complete_grid(&img, &frame, &lattice(x0, x1, y0, y1), &cfg).unwrap(), full);
    }
}

proptest! {
    #[test]
    fn dlt_recovers_exact_correspondences(
        a in 0.5f64..2.0, b in -0.5f64..0.5, c in -20.0f64..20.0,
        d in -0.5f64..0.5, e in 0.5f64..2.0, f in -20.0f64..20.0,
        g in -1e-3f64..1e-3, h in -1e-3f64..1e-3,
    ) {
        let truth = Homography::from_rows([[a, b, c], [d, e, f], [g, h, 1.0]]).unwrap();
        let src: Vec<Point> = (0..12).map(|i| Point::new((i % 4) as f64 * 30.0, (i / 4) as f64 * 25.0)).collect();
        let dst: Vec<Point> = src.iter().map(|p| truth.apply(*p).unwrap()).collect();
        let fit = fit_homography(&src, &dst).unwrap();
        prop_assert!(fit.deviation(&truth) < 1e-6);
        prop_assert!(residual(&refine_homography(&fit, &src, &dst), &src, &dst) <= residual(&fit, &src, &dst));
    }
}
