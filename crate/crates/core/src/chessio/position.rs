use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Colour {
    White,
    Black,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PieceKind {
    Pawn,
    Knight,
    Bishop,
    Rook,
    Queen,
    King,
}

impl PieceKind {
    pub const ALL: [PieceKind; 6] =
        [PieceKind::Pawn, PieceKind::Knight, PieceKind::Bishop, PieceKind::Rook, PieceKind::Queen, PieceKind::King];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Material present in the starting position, per side.
    pub fn start_count(self) -> usize {
        match self {
            PieceKind::Pawn => 8,
            PieceKind::Knight | PieceKind::Bishop | PieceKind::Rook => 2,
            PieceKind::Queen | PieceKind::King => 1,
        }
    }
}

/// One of the twelve piece classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Piece {
    pub colour: Colour,
    pub kind: PieceKind,
}

impl Piece {
    pub const COUNT: usize = 12;

    pub fn new(colour: Colour, kind: PieceKind) -> Self {
        Self { colour, kind }
    }

    /// Class index: white pawn..king are 0..6, black pawn..king are 6..12.
    pub fn index(self) -> usize {
        let base = match self.colour {
            Colour::White => 0,
            Colour::Black => 6,
        };
        base + self.kind.index()
    }

    pub fn from_index(i: usize) -> Option<Piece> {
        if i >= Self::COUNT {
            return None;
        }
        let colour = if i < 6 { Colour::White } else { Colour::Black };
        Some(Piece { colour, kind: PieceKind::ALL[i % 6] })
    }

    pub fn all() -> impl Iterator<Item = Piece> {
        (0..Self::COUNT).map(|i| Piece::from_index(i).unwrap())
    }

    pub fn to_char(self) -> char {
        let c = match self.kind {
            PieceKind::Pawn => 'p',
            PieceKind::Knight => 'n',
            PieceKind::Bishop => 'b',
            PieceKind::Rook => 'r',
            PieceKind::Queen => 'q',
            PieceKind::King => 'k',
        };
        match self.colour {
            Colour::White => c.to_ascii_uppercase(),
            Colour::Black => c,
        }
    }

    pub fn from_char(c: char) -> Option<Piece> {
        let colour = if c.is_ascii_uppercase() { Colour::White } else { Colour::Black };
        let kind = match c.to_ascii_lowercase() {
            'p' => PieceKind::Pawn,
            'n' => PieceKind::Knight,
            'b' => PieceKind::Bishop,
            'r' => PieceKind::Rook,
            'q' => PieceKind::Queen,
            'k' => PieceKind::King,
            _ => return None,
        };
        Some(Piece { colour, kind })
    }
}

/// A board square: file 0..8 is a..h, rank 0..8 is 1..8.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Square {
    file: u8,
    rank: u8,
}

impl Square {
    pub fn new(file: u8, rank: u8) -> Option<Square> {
        (file < 8 && rank < 8).then_some(Square { file, rank })
    }

    pub fn file(self) -> u8 {
        self.file
    }

    pub fn rank(self) -> u8 {
        self.rank
    }

    pub fn index(self) -> usize {
        self.rank as usize * 8 + self.file as usize
    }

    pub fn from_index(i: usize) -> Square {
        assert!(i < 64);
        Square { file: (i % 8) as u8, rank: (i / 8) as u8 }
    }

    pub fn all() -> impl Iterator<Item = Square> {
        (0..64).map(Square::from_index)
    }

    /// The same physical square seen from the other side of the board.
    pub fn rotated(self) -> Square {
        Square { file: 7 - self.file, rank: 7 - self.rank }
    }
}

impl fmt::Display for Square {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", (b'a' + self.file) as char, self.rank + 1)
    }
}

/// 8×8 grid of optional pieces, indexed by [`Square::index`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Position {
    squares: [Option<Piece>; 64],
}

impl Default for Position {
    fn default() -> Self {
        Self::empty()
    }
}

impl Position {
    pub fn empty() -> Self {
        Self { squares: [None; 64] }
    }

    pub fn starting() -> Self {
        let back = [
            PieceKind::Rook,
            PieceKind::Knight,
            PieceKind::Bishop,
            PieceKind::Queen,
            PieceKind::King,
            PieceKind::Bishop,
            PieceKind::Knight,
            PieceKind::Rook,
        ];
        let mut p = Self::empty();
        for (f, kind) in back.iter().enumerate() {
            let f = f as u8;
            p.set(Square::new(f, 0).unwrap(), Some(Piece::new(Colour::White, *kind)));
            p.set(Square::new(f, 1).unwrap(), Some(Piece::new(Colour::White, PieceKind::Pawn)));
            p.set(Square::new(f, 6).unwrap(), Some(Piece::new(Colour::Black, PieceKind::Pawn)));
            p.set(Square::new(f, 7).unwrap(), Some(Piece::new(Colour::Black, *kind)));
        }
        p
    }

    pub fn get(&self, sq: Square) -> Option<Piece> {
        self.squares[sq.index()]
    }

    pub fn set(&mut self, sq: Square, piece: Option<Piece>) {
        self.squares[sq.index()] = piece;
    }

    pub fn iter(&self) -> impl Iterator<Item = (Square, Option<Piece>)> + '_ {
        self.squares.iter().enumerate().map(|(i, p)| (Square::from_index(i), *p))
    }

    pub fn pieces(&self) -> impl Iterator<Item = (Square, Piece)> + '_ {
        self.iter().filter_map(|(s, p)| p.map(|p| (s, p)))
    }

    pub fn count(&self, piece: Piece) -> usize {
        self.squares.iter().filter(|p| **p == Some(piece)).count()
    }

    pub fn occupied(&self) -> usize {
        self.squares.iter().filter(|p| p.is_some()).count()
    }

    /// Number of squares on which two positions differ.
    pub fn diff_count(&self, other: &Position) -> usize {
        self.squares.iter().zip(other.squares.iter()).filter(|(a, b)| a != b).count()
    }
}

/// Serialised as an object from square name to piece letter, occupied
/// squares only, in square-index order.
impl serde::Serialize for Position {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(self.occupied()))?;
        for (sq, piece) in self.pieces() {
            map.serialize_entry(&sq.to_string(), &piece.to_char().to_string())?;
        }
        map.end()
    }
}
