//! Per-square and per-board recognition metrics.

use serde::Serialize;
use thiserror::Error;

use super::fen::{parse_fen, FenError};
use super::labels::LabelRecord;
use super::position::Position;
use crate::geometry::CornerSet;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("input lengths differ: {preds} predictions, {labels} labels, {corners} corner sets, {widths} widths")]
    LengthMismatch { preds: usize, labels: usize, corners: usize, widths: usize },
    #[error("no boards to evaluate")]
    Empty,
    #[error("label {index}: {source}")]
    Fen { index: usize, source: FenError },
}

/// All percentages are in `[0, 100]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub boards: usize,
    pub mean_incorrect_squares: f64,
    pub pct_boards_no_mistakes: f64,
    pub pct_boards_le1_mistake: f64,
    pub per_square_error_rate: f64,
    pub corner_detection_accuracy: f64,
    pub occupancy_accuracy: f64,
    pub piece_accuracy: f64,
}

impl EvalReport {
    pub fn table(&self) -> String {
        let rows = [
            ("boards", format!("{}", self.boards)),
            ("mean number of incorrect squares per board", format!("{:.4}", self.mean_incorrect_squares)),
            ("percentage of boards predicted with no mistakes", format!("{:.2}%", self.pct_boards_no_mistakes)),
            ("percentage of boards predicted with <=1 mistake", format!("{:.2}%", self.pct_boards_le1_mistake)),
            ("per-square error rate", format!("{:.4}%", self.per_square_error_rate)),
            ("corner detection accuracy", format!("{:.2}%", self.corner_detection_accuracy)),
            ("occupancy classification accuracy", format!("{:.4}%", self.occupancy_accuracy)),
            ("piece classification accuracy", format!("{:.4}%", self.piece_accuracy)),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<width$}  {v:>10}\n")).collect()
    }
}

/// True when every true corner has a distinct predicted corner within
/// `tolerance`, under the best one-to-one assignment.
pub fn corners_within(pred: &CornerSet, truth: &[[f64; 2]; 4], tolerance: f64) -> bool {
    const PERMS: [[usize; 4]; 24] = [
        [0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3], [0, 2, 3, 1], [0, 3, 1, 2], [0, 3, 2, 1],
        [1, 0, 2, 3], [1, 0, 3, 2], [1, 2, 0, 3], [1, 2, 3, 0], [1, 3, 0, 2], [1, 3, 2, 0],
        [2, 0, 1, 3], [2, 0, 3, 1], [2, 1, 0, 3], [2, 1, 3, 0], [2, 3, 0, 1], [2, 3, 1, 0],
        [3, 0, 1, 2], [3, 0, 2, 1], [3, 1, 0, 2], [3, 1, 2, 0], [3, 2, 0, 1], [3, 2, 1, 0],
    ];
    let pts = pred.points();
    PERMS.iter().any(|perm| {
        perm.iter().enumerate().all(|(t, &p)| {
            let dx = pts[p].x - truth[t][0];
            let dy = pts[p].y - truth[t][1];
            (dx * dx + dy * dy).sqrt() < tolerance
        })
    })
}

/// Aggregates board-level metrics. `None` entries are localisation failures:
/// all 64 squares count as wrong and the corners as inaccurate.
pub fn evaluate(
    preds: &[Option<Position>],
    labels: &[LabelRecord],
    corner_preds: &[Option<CornerSet>],
    image_widths: &[f64],
) -> Result<EvalReport, EvalError> {
    let n = labels.len();
    if preds.len() != n || corner_preds.len() != n || image_widths.len() != n {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            labels: n,
            corners: corner_preds.len(),
            widths: image_widths.len(),
        });
    }
    if n == 0 {
        return Err(EvalError::Empty);
    }
    let mut wrong_total = 0usize;
    let mut no_mistakes = 0usize;
    let mut le1 = 0usize;
    let mut corners_ok = 0usize;
    let mut occ_right = 0usize;
    let mut piece_right = 0usize;
    let mut piece_total = 0usize;
    for (index, label) in labels.iter().enumerate() {
        let truth = parse_fen(&label.fen).map_err(|source| EvalError::Fen { index, source })?;
        let truth_occupied = truth.occupied();
        piece_total += truth_occupied;
        let wrong = match &preds[index] {
            Some(pred) => {
                for (sq, t) in truth.iter() {
                    let p = pred.get(sq);
                    if p.is_some() == t.is_some() {
                        occ_right += 1;
                    }
                    if t.is_some() && p == t {
                        piece_right += 1;
                    }
                }
                pred.diff_count(&truth)
            }
            None => 64,
        };
        wrong_total += wrong;
        no_mistakes += usize::from(wrong == 0);
        le1 += usize::from(wrong <= 1);
        if let Some(c) = &corner_preds[index] {
            corners_ok += usize::from(corners_within(c, &label.corners, 0.01 * image_widths[index]));
        }
    }
    let nf = n as f64;
    let pct = |k: usize, d: usize| if d == 0 { 100.0 } else { 100.0 * k as f64 / d as f64 };
    Ok(EvalReport {
        boards: n,
        mean_incorrect_squares: wrong_total as f64 / nf,
        pct_boards_no_mistakes: pct(no_mistakes, n),
        pct_boards_le1_mistake: pct(le1, n),
        per_square_error_rate: pct(wrong_total, 64 * n),
        corner_detection_accuracy: pct(corners_ok, n),
        occupancy_accuracy: pct(occ_right, 64 * n),
        piece_accuracy: pct(piece_right, piece_total),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chessio::fen::emit_fen;
    use crate::chessio::labels::Perspective;
    use crate::chessio::position::{Colour, Piece, PieceKind, Square};
    use crate::geometry::Point;

    fn label(p: &Position) -> LabelRecord {
        LabelRecord {
            image: "x.png".into(),
            fen: emit_fen(p),
            corners: [[10.0, 10.0], [90.0, 10.0], [90.0, 90.0], [10.0, 90.0]],
            perspective: Perspective::White,
        }
    }

    fn corners(shift: f64) -> CornerSet {
        CornerSet::new([
            Point::new(10.0 + shift, 10.0),
            Point::new(90.0 + shift, 10.0),
            Point::new(90.0 + shift, 90.0),
            Point::new(10.0 + shift, 90.0),
        ])
    }

    #[test]
    fn perfect_predictions() {
        let p = Position::starting();
        let r = evaluate(&[Some(p.clone()), Some(p.clone())], &[label(&p), label(&p)], &[Some(corners(0.0)), Some(corners(0.0))], &[100.0, 100.0]).unwrap();
        assert_eq!(r.mean_incorrect_squares, 0.0);
        assert_eq!(r.pct_boards_no_mistakes, 100.0);
        assert_eq!(r.per_square_error_rate, 0.0);
        assert_eq!(r.corner_detection_accuracy, 100.0);
    }

    #[test]
    fn one_wrong_square() {
        let p = Position::starting();
        let mut q = p.clone();
        q.set(Square::new(0, 1).unwrap(), Some(Piece::new(Colour::White, PieceKind::Queen)));
        let r = evaluate(&[Some(p.clone()), Some(q)], &[label(&p), label(&p)], &[Some(corners(0.0)), Some(corners(0.5))], &[100.0, 100.0]).unwrap();
        assert_eq!(r.mean_incorrect_squares, 0.5);
        assert_eq!(r.pct_boards_no_mistakes, 50.0);
        assert_eq!(r.pct_boards_le1_mistake, 100.0);
        assert!((r.per_square_error_rate - 100.0 / 128.0).abs() < 1e-12);
        assert_eq!(r.occupancy_accuracy, 100.0);
        assert!((r.piece_accuracy - 100.0 * 63.0 / 64.0).abs() < 1e-12);
        // 0.5 px shift is within 1% of a 100 px image.
        assert_eq!(r.corner_detection_accuracy, 100.0);
    }

    #[test]
    fn failures_count_everything_wrong() {
        let p = Position::starting();
        let r = evaluate(&[None], &[label(&p)], &[None], &[100.0]).unwrap();
        assert_eq!(r.mean_incorrect_squares, 64.0);
        assert_eq!(r.corner_detection_accuracy, 0.0);
        assert_eq!(r.piece_accuracy, 0.0);
        assert!(matches!(evaluate(&[None], &[], &[], &[]), Err(EvalError::LengthMismatch { .. })));
        assert_eq!(evaluate(&[], &[], &[], &[]), Err(EvalError::Empty));
    }

    #[test]
    fn corner_assignment_ignores_order() {
        let c = corners(0.0);
        let pts = c.points();
        let shuffled = CornerSet::new([pts[2], pts[0], pts[3], pts[1]]);
        let truth = [[10.0, 10.0], [90.0, 10.0], [90.0, 90.0], [10.0, 90.0]];
        assert!(corners_within(&shuffled, &truth, 1.0));
        assert!(!corners_within(&corners(1.5), &truth, 1.0));
    }

    #[test]
    fn permutation_equivariance() {
        let p = Position::starting();
        let mut q = Position::empty();
        q.set(Square::new(4, 0).unwrap(), Some(Piece::new(Colour::White, PieceKind::King)));
        let preds = vec![Some(p.clone()), Some(q.clone()), None];
        let labels = vec![label(&p), label(&p), label(&q)];
        let cs = vec![Some(corners(0.0)), Some(corners(3.0)), None];
        let ws = vec![100.0, 100.0, 100.0];
        let a = evaluate(&preds, &labels, &cs, &ws).unwrap();
        let order = [2, 0, 1];
        fn pick<T: Clone>(v: &[T], order: &[usize]) -> Vec<T> {
            order.iter().map(|&i| v[i].clone()).collect()
        }
        let b = evaluate(&pick(&preds, &order), &pick(&labels, &order), &pick(&cs, &order), &pick(&ws, &order)).unwrap();
        assert_eq!(a, b);
    }
}
