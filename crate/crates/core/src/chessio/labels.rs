//! JSON-lines label files: one record per line,
//! `{"image": str, "fen": str, "corners": [[x, y] × 4], "perspective": "white" | "black"}`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::fen::{parse_fen, FenError};
use super::position::Square;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Perspective {
    #[default]
    White,
    Black,
}

impl Perspective {
    /// Board square shown at camera-frame square `camera` (file 0 on the
    /// left of the photo, rank 0 nearest the camera).
    pub fn to_board(self, camera: Square) -> Square {
        match self {
            Perspective::White => camera,
            Perspective::Black => camera.rotated(),
        }
    }
}

impl FromStr for Perspective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "white" => Ok(Perspective::White),
            "black" => Ok(Perspective::Black),
            other => Err(format!("unknown perspective '{other}' (expected white or black)")),
        }
    }
}

impl fmt::Display for Perspective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Perspective::White => "white",
            Perspective::Black => "black",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRecord {
    pub image: String,
    pub fen: String,
    /// Board corners in input pixels: top-left, top-right, bottom-right,
    /// bottom-left as seen in the image.
    pub corners: [[f64; 2]; 4],
    pub perspective: Perspective,
}

impl LabelRecord {
    /// Resolves the image path relative to the directory holding the label file.
    pub fn image_path(&self, labels_path: &Path) -> PathBuf {
        let p = Path::new(&self.image);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            labels_path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }

    pub fn corners_in_bounds(&self, width: f64, height: f64) -> bool {
        self.corners.iter().all(|[x, y]| (0.0..=width).contains(x) && (0.0..=height).contains(y))
    }
}

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: invalid FEN: {source}")]
    Fen { line: usize, source: FenError },
    #[error("line {line}: corners do not form a convex quadrilateral")]
    NonConvex { line: usize },
    #[error("label file contains no records")]
    Empty,
    #[error("label I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelWarning {
    pub line: usize,
    pub message: String,
}

pub fn is_convex(corners: &[[f64; 2]; 4]) -> bool {
    let mut sign = 0.0f64;
    for i in 0..4 {
        let a = corners[i];
        let b = corners[(i + 1) % 4];
        let c = corners[(i + 2) % 4];
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        if !cross.is_finite() || cross == 0.0 {
            return false;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if sign != cross.signum() {
            return false;
        }
    }
    true
}

/// Parses label text; negative corner coordinates are accepted with a warning.
pub fn parse_labels(text: &str) -> Result<(Vec<LabelRecord>, Vec<LabelWarning>), LabelError> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: LabelRecord =
            serde_json::from_str(raw).map_err(|e| LabelError::Schema { line, message: e.to_string() })?;
        parse_fen(&rec.fen).map_err(|source| LabelError::Fen { line, source })?;
        if !is_convex(&rec.corners) {
            return Err(LabelError::NonConvex { line });
        }
        if rec.corners.iter().any(|[x, y]| *x < 0.0 || *y < 0.0) {
            warnings.push(LabelWarning { line, message: "corner lies outside the image".into() });
        }
        records.push(rec);
    }
    Ok((records, warnings))
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<LabelRecord>, LabelError> {
    let text = fs::read_to_string(path)?;
    let (records, warnings) = parse_labels(&text)?;
    for w in &warnings {
        log::warn!("labels line {}: {}", w.line, w.message);
    }
    Ok(records)
}

pub fn labels_to_string(records: &[LabelRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("label records serialise"));
        out.push('\n');
    }
    out
}

pub fn save_labels(records: &[LabelRecord], path: impl AsRef<Path>) -> Result<(), LabelError> {
    fs::write(path, labels_to_string(records))?;
    Ok(())
}
