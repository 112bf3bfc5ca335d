//! Board field of Forsyth–Edwards Notation.

use thiserror::Error;

use super::position::{Piece, Position, Square};

pub const STARTING_FEN: &str = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FenError {
    #[error("expected 8 ranks, found {0}")]
    RankCount(usize),
    #[error("rank {rank} describes {files} files")]
    RankLength { rank: usize, files: usize },
    #[error("unknown piece letter '{0}'")]
    UnknownPiece(char),
    #[error("empty FEN string")]
    Empty,
}

/// Board field only; side-to-move and the other fields are not emitted.
pub fn emit_fen(p: &Position) -> String {
    let mut out = String::with_capacity(72);
    for rank in (0..8u8).rev() {
        let mut run = 0;
        for file in 0..8u8 {
            match p.get(Square::new(file, rank).unwrap()) {
                Some(piece) => {
                    if run > 0 {
                        out.push(char::from_digit(run, 10).unwrap());
                        run = 0;
                    }
                    out.push(piece.to_char());
                }
                None => run += 1,
            }
        }
        if run > 0 {
            out.push(char::from_digit(run, 10).unwrap());
        }
        if rank > 0 {
            out.push('/');
        }
    }
    out
}

/// Parses the board field; anything after the first whitespace is ignored.
pub fn parse_fen(s: &str) -> Result<Position, FenError> {
    let board = s.split_whitespace().next().ok_or(FenError::Empty)?;
    let ranks: Vec<&str> = board.split('/').collect();
    if ranks.len() != 8 {
        return Err(FenError::RankCount(ranks.len()));
    }
    let mut p = Position::empty();
    for (i, text) in ranks.iter().enumerate() {
        let rank = 7 - i as u8;
        let mut file = 0usize;
        for c in text.chars() {
            if let Some(d) = c.to_digit(10) {
                if d == 0 {
                    return Err(FenError::UnknownPiece(c));
                }
                file += d as usize;
            } else {
                let piece = Piece::from_char(c).ok_or(FenError::UnknownPiece(c))?;
                if file < 8 {
                    p.set(Square::new(file as u8, rank).unwrap(), Some(piece));
                }
                file += 1;
            }
            if file > 8 {
                return Err(FenError::RankLength { rank: rank as usize + 1, files: file });
            }
        }
        if file != 8 {
            return Err(FenError::RankLength { rank: rank as usize + 1, files: file });
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chessio::position::{Colour, PieceKind};
    use proptest::prelude::*;

    #[test]
    fn canonical_strings() {
        assert_eq!(emit_fen(&Position::starting()), STARTING_FEN);
        assert_eq!(emit_fen(&Position::empty()), "8/8/8/8/8/8/8/8");
        let mut p = Position::empty();
        p.set(Square::new(4, 0).unwrap(), Some(Piece::new(Colour::White, PieceKind::King)));
        assert_eq!(emit_fen(&p), "8/8/8/8/8/8/8/4K3");
    }

    #[test]
    fn parse_errors_and_suffix() {
        assert_eq!(parse_fen("9/8/8/8/8/8/8/8"), Err(FenError::RankLength { rank: 8, files: 9 }));
        assert_eq!(parse_fen("8/8/8/8/8/8/8"), Err(FenError::RankCount(7)));
        assert_eq!(parse_fen("7x/8/8/8/8/8/8/8"), Err(FenError::UnknownPiece('x')));
        assert_eq!(parse_fen("ppppppppp/8/8/8/8/8/8/8"), Err(FenError::RankLength { rank: 8, files: 9 }));
        assert_eq!(parse_fen("7/8/8/8/8/8/8/8"), Err(FenError::RankLength { rank: 8, files: 7 }));
        assert_eq!(parse_fen(""), Err(FenError::Empty));
        let full = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1";
        assert_eq!(parse_fen(full).unwrap(), Position::starting());
    }

    pub(crate) fn arb_position() -> impl Strategy<Value = Position> {
        proptest::collection::vec(proptest::option::weighted(0.4, 0usize..12), 64).prop_map(|cells| {
            let mut p = Position::empty();
            for (i, c) in cells.into_iter().enumerate() {
                p.set(Square::from_index(i), c.and_then(Piece::from_index));
            }
            p
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn emit_parse_round_trip(p in arb_position()) {
            let s = emit_fen(&p);
            prop_assert_eq!(parse_fen(&s).unwrap(), p);
            prop_assert_eq!(emit_fen(&parse_fen(&s).unwrap()), s);
        }
    }
}
