//! Chess-domain model and I/O: positions, FEN, static legality, label files
//! and evaluation metrics.

mod eval;
mod fen;
mod labels;
mod legality;
mod position;

pub use eval::{corners_within, evaluate, EvalError, EvalReport};
pub use fen::{emit_fen, parse_fen, FenError, STARTING_FEN};
pub use labels::{
    is_convex, labels_to_string, load_labels, parse_labels, save_labels, LabelError, LabelRecord, LabelWarning,
    Perspective,
};
pub use legality::{legality_check, Legality, Violation};
pub use position::{Colour, Piece, PieceKind, Position, Square};
