//! Static plausibility checks on a recognised position.
//!
//! Only material and pawn-placement constraints are checked; whether the
//! position is reachable from the start, or which side is to move, cannot be
//! decided from a single frame.

use std::fmt;

use serde::Serialize;

use super::position::{Colour, Piece, PieceKind, Position};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    KingCount { colour: Colour, count: usize },
    TooManyPieces { colour: Colour, count: usize },
    TooManyPawns { colour: Colour, count: usize },
    PawnOnBackRank { square: String },
    PromotionMismatch { colour: Colour, extra: usize, missing_pawns: usize },
}

impl Serialize for Colour {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match self {
            Colour::White => "white",
            Colour::Black => "black",
        })
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::KingCount { colour, count } => write!(f, "king count: {colour:?} has {count}"),
            Violation::TooManyPieces { colour, count } => write!(f, "piece count: {colour:?} has {count} > 16"),
            Violation::TooManyPawns { colour, count } => write!(f, "pawn count: {colour:?} has {count} > 8"),
            Violation::PawnOnBackRank { square } => write!(f, "pawn on back rank: {square}"),
            Violation::PromotionMismatch { colour, extra, missing_pawns } => write!(
                f,
                "promotion mismatch: {colour:?} has {extra} extra officers but only {missing_pawns} missing pawns"
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Legality {
    pub legal: bool,
    pub violations: Vec<Violation>,
}

pub fn legality_check(p: &Position) -> Legality {
    let mut violations = Vec::new();
    for colour in [Colour::White, Colour::Black] {
        let count = |kind| p.count(Piece::new(colour, kind));
        let kings = count(PieceKind::King);
        if kings != 1 {
            violations.push(Violation::KingCount { colour, count: kings });
        }
        let total: usize = PieceKind::ALL.iter().map(|k| count(*k)).sum();
        if total > 16 {
            violations.push(Violation::TooManyPieces { colour, count: total });
        }
        let pawns = count(PieceKind::Pawn);
        if pawns > 8 {
            violations.push(Violation::TooManyPawns { colour, count: pawns });
        }
        let extra: usize = [PieceKind::Knight, PieceKind::Bishop, PieceKind::Rook, PieceKind::Queen]
            .iter()
            .map(|k| count(*k).saturating_sub(k.start_count()))
            .sum();
        let missing_pawns = 8usize.saturating_sub(pawns);
        if extra > missing_pawns {
            violations.push(Violation::PromotionMismatch { colour, extra, missing_pawns });
        }
    }
    for (sq, piece) in p.pieces() {
        if piece.kind == PieceKind::Pawn && (sq.rank() == 0 || sq.rank() == 7) {
            violations.push(Violation::PawnOnBackRank { square: sq.to_string() });
        }
    }
    Legality { legal: violations.is_empty(), violations }
}
