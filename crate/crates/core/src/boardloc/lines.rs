//! Line grouping: orientation clustering, duplicate suppression and
//! intersections.

use std::f64::consts::{FRAC_PI_2, PI};

use super::LocateError;
use crate::geometry::Point;
use crate::rasterops::PolarLine;

/// Minimum angle between the two orientation clusters' mean directions.
pub const MIN_CLUSTER_SEPARATION: f64 = 0.25;

/// Smallest angle between two undirected line orientations.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(PI);
    d.min(PI - d)
}

/// Circular mean of orientations with period π.
pub fn mean_orientation(thetas: impl IntoIterator<Item = f64>) -> f64 {
    let (s, c) = thetas.into_iter().fold((0.0, 0.0), |(s, c), t| (s + (2.0 * t).sin(), c + (2.0 * t).cos()));
    (s.atan2(c) / 2.0).rem_euclid(PI)
}

/// Mean line: circular-mean orientation and mean ρ after expressing every line
/// with θ within ±π/2 of that orientation.
pub fn mean_line(lines: &[PolarLine]) -> PolarLine {
    assert!(!lines.is_empty(), "mean of no lines");
    let centre = mean_orientation(lines.iter().map(|l| l.theta));
    let mut rho = 0.0;
    let mut theta = 0.0;
    for l in lines {
        let (mut r, mut t) = (l.rho, l.theta);
        if t - centre > FRAC_PI_2 {
            t -= PI;
            r = -r;
        } else if t - centre < -FRAC_PI_2 {
            t += PI;
            r = -r;
        }
        rho += r;
        theta += t;
    }
    let n = lines.len() as f64;
    PolarLine::new(rho / n, theta / n)
}

/// Splits lines into two orientation groups by Ward-linkage agglomerative
/// clustering on the angular metric. Returns `(horizontal, vertical)`; the
/// group whose mean orientation is closer to vertical (θ near 0 or π) is the
/// vertical one.
pub fn cluster_by_orientation(lines: &[PolarLine]) -> Result<(Vec<PolarLine>, Vec<PolarLine>), LocateError> {
    if lines.len() < 2 {
        return Err(LocateError::clustering(format!("need at least 2 lines, got {}", lines.len())));
    }
    let labels = ward_two_clusters(&lines.iter().map(|l| l.theta).collect::<Vec<_>>());
    let (a, b): (Vec<_>, Vec<_>) = lines.iter().zip(&labels).partition(|(_, l)| **l == 0);
    let a: Vec<PolarLine> = a.into_iter().map(|(l, _)| *l).collect();
    let b: Vec<PolarLine> = b.into_iter().map(|(l, _)| *l).collect();
    let ma = mean_orientation(a.iter().map(|l| l.theta));
    let mb = mean_orientation(b.iter().map(|l| l.theta));
    if angular_distance(ma, mb) < MIN_CLUSTER_SEPARATION {
        return Err(LocateError::clustering("all lines share one orientation".into()));
    }
    let to_vertical = |t: f64| angular_distance(t, 0.0);
    if to_vertical(ma) <= to_vertical(mb) {
        Ok((b, a))
    } else {
        Ok((a, b))
    }
}

/// Agglomerative clustering down to two clusters with Ward linkage
/// (Lance–Williams update on squared angular distances). Returns a 0/1 label
/// per input.
fn ward_two_clusters(thetas: &[f64]) -> Vec<u8> {
    let n = thetas.len();
    let mut d = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = angular_distance(thetas[i], thetas[j]).powi(2);
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    // Cluster representative of every item.
    let mut owner: Vec<usize> = (0..n).collect();
    let mut remaining = n;
    while remaining > 2 {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if active[j] && d[i * n + j] < best.2 {
                    best = (i, j, d[i * n + j]);
                }
            }
        }
        let (i, j, dij) = best;
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let (ni, nj, nk) = (size[i] as f64, size[j] as f64, size[k] as f64);
            let v = ((ni + nk) * d[i * n + k] + (nj + nk) * d[j * n + k] - nk * dij) / (ni + nj + nk);
            d[i * n + k] = v;
            d[k * n + i] = v;
        }
        size[i] += size[j];
        active[j] = false;
        for o in owner.iter_mut() {
            if *o == j {
                *o = i;
            }
        }
        remaining -= 1;
    }
    let first = owner[0];
    owner.iter().map(|o| u8::from(*o != first)).collect()
}

/// Unique intersection of two lines.
pub fn intersect(a: &PolarLine, b: &PolarLine) -> Result<Point, LocateError> {
    let det = (b.theta - a.theta).sin();
    if det.abs() <= 1e-9 {
        return Err(LocateError::parallel());
    }
    let (ca, sa) = (a.theta.cos(), a.theta.sin());
    let (cb, sb) = (b.theta.cos(), b.theta.sin());
    let x = (a.rho * sb - b.rho * sa) / det;
    let y = (ca * b.rho - cb * a.rho) / det;
    Ok(Point::new(x, y))
}

/// Position of a point along a line's direction vector `(-sin θ, cos θ)`.
fn position_along(line: &PolarLine, p: Point) -> f64 {
    -line.theta.sin() * p.x + line.theta.cos() * p.y
}

/// DBSCAN with minPts = 1 on the lines' crossings with `reference`:
/// index clusters, ordered by position along the reference line.
fn crossing_clusters(group: &[PolarLine], reference: &PolarLine, eps: f64) -> Result<Vec<Vec<usize>>, LocateError> {
    let mut keyed = Vec::with_capacity(group.len());
    for (i, l) in group.iter().enumerate() {
        let p = intersect(l, reference)?;
        keyed.push((position_along(reference, p), i));
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (t, i) in keyed {
        match out.last_mut() {
            Some(c) if t - last <= eps => c.push(i),
            _ => out.push(vec![i]),
        }
        last = t;
    }
    Ok(out)
}

/// Merges near-duplicate lines: DBSCAN (minPts = 1, radius `eps`) on each
/// line's intersection with `reference`, replacing every cluster by its mean
/// line. Output is ordered by position along the reference line.
pub fn dedup_lines(group: &[PolarLine], reference: &PolarLine, eps: f64) -> Result<Vec<PolarLine>, LocateError> {
    Ok(crossing_clusters(group, reference, eps)?
        .into_iter()
        .map(|c| mean_line(&c.iter().map(|&i| group[i]).collect::<Vec<_>>()))
        .collect())
}

/// As [`dedup_lines`], but each cluster is represented by its member with
/// the most votes instead of the mean.
pub fn dedup_lines_strongest(
    group: &[(PolarLine, u32)],
    reference: &PolarLine,
    eps: f64,
) -> Result<Vec<PolarLine>, LocateError> {
    let lines: Vec<PolarLine> = group.iter().map(|g| g.0).collect();
    Ok(crossing_clusters(&lines, reference, eps)?
        .into_iter()
        .map(|c| {
            // Ties keep the earliest member.
            let best = c.iter().copied().fold(c[0], |b, i| if group[i].1 > group[b].1 { i } else { b });
            lines[best]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lines(thetas: &[f64]) -> Vec<PolarLine> {
        thetas.iter().enumerate().map(|(i, t)| PolarLine::new(10.0 * i as f64, *t)).collect()
    }

    #[test]
    fn splits_axis_aligned_groups() {
        let ls = lines(&[0.01, 0.02, 1.58, 1.57]);
        let (h, v) = cluster_by_orientation(&ls).unwrap();
        let mut ht: Vec<f64> = h.iter().map(|l| l.theta).collect();
        let mut vt: Vec<f64> = v.iter().map(|l| l.theta).collect();
        ht.sort_by(f64::total_cmp);
        vt.sort_by(f64::total_cmp);
        assert_eq!(ht, vec![1.57, 1.58]);
        assert_eq!(vt, vec![0.01, 0.02]);
    }

    #[test]
    fn exhaustive_pairing_agrees_on_small_input() {
        // For four lines the best 2+2 split by within-cluster spread is the one
        // Ward finds.
        let t = [0.01, 0.02, 1.58, 1.57];
        let cost = |a: &[usize]| -> f64 {
            let mut c = 0.0;
            for i in 0..a.len() {
                for j in 0..a.len() {
                    c += angular_distance(t[a[i]], t[a[j]]).powi(2);
                }
            }
            c
        };
        let splits = [([0, 1], [2, 3]), ([0, 2], [1, 3]), ([0, 3], [1, 2])];
        let best = splits.iter().min_by(|a, b| (cost(&a.0) + cost(&a.1)).total_cmp(&(cost(&b.0) + cost(&b.1)))).unwrap();
        assert_eq!(*best, ([0, 1], [2, 3]));
        let labels = ward_two_clusters(&t);
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
    }

    #[test]
    fn tilted_board_split_across_wrap() {
        // 20° tilt: one family near 0.35, the other near 1.92.
        let ls = lines(&[0.33, 0.35, 0.37, 1.90, 1.92, 1.94]);
        let (h, v) = cluster_by_orientation(&ls).unwrap();
        assert!(v.iter().all(|l| (l.theta - 0.35).abs() < 0.05));
        assert!(h.iter().all(|l| (l.theta - 1.92).abs() < 0.05));
        // A family straddling θ = 0/π stays together.
        let ls = lines(&[0.01, PI - 0.01, 0.02, 1.5, 1.6]);
        let (h, v) = cluster_by_orientation(&ls).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(h.len(), 2);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(cluster_by_orientation(&lines(&[0.5])).is_err());
        assert!(cluster_by_orientation(&lines(&[0.50, 0.51, 0.52, 0.53])).is_err());
    }

    #[test]
    fn intersections() {
        let p = intersect(&PolarLine::new(1.0, 0.0), &PolarLine::new(2.0, FRAC_PI_2)).unwrap();
        assert!((p.x - 1.0).abs() < 1e-12 && (p.y - 2.0).abs() < 1e-12);
        assert!(intersect(&PolarLine::new(1.0, 0.3), &PolarLine::new(5.0, 0.3)).is_err());
        // x + y = 4 and -x + y = 2 (θ = 3π/4, ρ = 2/√2) meet at (1, 3).
        let a = PolarLine::new(4.0 / 2f64.sqrt(), PI / 4.0);
        let b = PolarLine::new(2.0 / 2f64.sqrt(), 3.0 * PI / 4.0);
        let p = intersect(&a, &b).unwrap();
        assert!((p.x - 1.0).abs() < 1e-12 && (p.y - 3.0).abs() < 1e-12, "{p:?}");
    }

    #[test]
    fn dedup_behaviour() {
        let reference = PolarLine::new(50.0, 0.0); // x = 50
        let near: Vec<PolarLine> = [10.0, 11.0, 12.0].iter().map(|y| PolarLine::new(*y, FRAC_PI_2)).collect();
        let out = dedup_lines(&near, &reference, 5.0).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0].rho - 11.0).abs() < 1e-9);
        let far: Vec<PolarLine> = [200.0, 0.0, 100.0].iter().map(|y| PolarLine::new(*y, FRAC_PI_2)).collect();
        let out = dedup_lines(&far, &reference, 5.0).unwrap();
        assert_eq!(out.iter().map(|l| l.rho.round()).collect::<Vec<_>>(), vec![0.0, 100.0, 200.0]);
        assert!(dedup_lines(&[], &reference, 5.0).unwrap().is_empty());
        assert!(dedup_lines(&[PolarLine::new(3.0, 0.0)], &reference, 5.0).is_err());
    }

    #[test]
    fn mean_line_across_wrap() {
        // x = 100 written both ways.
        let m = mean_line(&[PolarLine::new(100.0, 0.01), PolarLine { rho: -100.0, theta: PI - 0.01 }]);
        assert!(angular_distance(m.theta, 0.0) < 1e-9);
        assert!((m.rho.abs() - 100.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn clustering_ignores_input_order(
            a in proptest::collection::vec(0.2f64..0.5, 3..8),
            b in proptest::collection::vec(1.7f64..2.0, 3..8),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut all = lines(&a.iter().chain(b.iter()).copied().collect::<Vec<_>>());
            let (h1, v1) = cluster_by_orientation(&all).unwrap();
            all.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (h2, v2) = cluster_by_orientation(&all).unwrap();
            let key = |v: &[PolarLine]| {
                let mut k: Vec<(u64, u64)> = v.iter().map(|l| (l.theta.to_bits(), l.rho.to_bits())).collect();
                k.sort();
                k
            };
            prop_assert_eq!(key(&h1), key(&h2));
            prop_assert_eq!(key(&v1), key(&v2));
        }
    }
}
