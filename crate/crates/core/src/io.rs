//! JSON file formats.
//!
//! Adjacency files come in two shapes:
//!
//! ```json
//! { "n": 3, "edges": [ { "i": 0, "j": 1, "p": 0.8 } ] }
//! { "matrix": [[0, 0.8, 0], [0, 0, 0], [0, 0, 0]] }
//! ```
//!
//! and are always written in the edge-list shape. Prediction files carry
//! pixel-space corner boxes plus the image size; ground-truth files list
//! annotated objects and `[i, j]` pairs meaning "object `i` rests directly on
//! object `j`".

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adjacency::{AdjacencyError, AdjacencyMatrix, EdgeProbability};
use crate::detection::{DetectionError, GroundTruth, Prediction};
use crate::geometry::{BBox, BoxError};
use crate::matrix::SquareMatrix;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{context}: {source}")]
    Json { context: String, source: serde_json::Error },
    #[error("{context}: {message}")]
    Schema { context: String, message: String },
    #[error("{context}: {source}")]
    Adjacency { context: String, source: AdjacencyError },
}

impl IoError {
    fn schema(context: &str, message: impl Into<String>) -> Self {
        Self::Schema { context: context.to_owned(), message: message.into() }
    }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Read { path: path.display().to_string(), source })
}

fn parse<'a, T: Deserialize<'a>>(text: &'a str, context: &str) -> Result<T, IoError> {
    serde_json::from_str(text).map_err(|source| IoError::Json { context: context.to_owned(), source })
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdjacencyDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<EdgeProbability>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<Vec<f64>>>,
}

/// Parses either adjacency shape. `context` (usually the file name) prefixes
/// error messages; JSON errors carry line and column.
pub fn parse_adjacency(text: &str, context: &str) -> Result<AdjacencyMatrix, IoError> {
    let doc: AdjacencyDoc = parse(text, context)?;
    let wrap = |source| IoError::Adjacency { context: context.to_owned(), source };
    match doc {
        AdjacencyDoc { n: Some(n), edges, matrix: None } => {
            AdjacencyMatrix::from_edges(n, &edges.unwrap_or_default()).map_err(wrap)
        }
        AdjacencyDoc { n: None, edges: None, matrix: Some(rows) } => {
            if rows.is_empty() {
                return Err(wrap(AdjacencyError::Empty));
            }
            AdjacencyMatrix::from_rows(&rows).map_err(wrap)
        }
        _ => Err(IoError::schema(context, "expected either {\"n\", \"edges\"} or {\"matrix\"}")),
    }
}

pub fn read_adjacency(path: &Path) -> Result<AdjacencyMatrix, IoError> {
    parse_adjacency(&read_text(path)?, &path.display().to_string())
}

/// Edge-list JSON for `a`, listing every nonzero off-diagonal entry.
pub fn adjacency_to_json(a: &AdjacencyMatrix) -> String {
    let doc = AdjacencyDoc { n: Some(a.n()), edges: Some(a.edges().collect()), matrix: None };
    serde_json::to_string_pretty(&doc).expect("adjacency serialises")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageSize {
    pub w: f64,
    pub h: f64,
}

/// One image's detector output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionFile {
    /// Pixel corners `[x1, y1, x2, y2]`.
    pub boxes: Vec<[f64; 4]>,
    pub class_probs: Vec<Vec<f64>>,
    pub adjacency: Vec<Vec<f64>>,
    pub image: ImageSize,
}

impl PredictionFile {
    /// Normalises boxes by the image size. The diagonal of the adjacency is
    /// zeroed, since raw sigmoid outputs are never exactly 0 there.
    pub fn to_prediction(&self, context: &str) -> Result<Prediction, IoError> {
        let boxes = normalise_boxes(&self.boxes, self.image, context)?;
        let n = self.adjacency.len();
        let mut square = SquareMatrix::zeros(n);
        for (i, row) in self.adjacency.iter().enumerate() {
            if row.len() != n {
                return Err(IoError::schema(
                    context,
                    format!("adjacency row {i} has {} entries, expected {n}", row.len()),
                ));
            }
            for (j, &v) in row.iter().enumerate() {
                if i != j {
                    square.set(i, j, v);
                }
            }
        }
        let adjacency = AdjacencyMatrix::from_square(square)
            .map_err(|source| IoError::Adjacency { context: context.to_owned(), source })?;
        Prediction::new(boxes, self.class_probs.clone(), adjacency).map_err(|e| detection_error(context, e))
    }
}

pub fn parse_prediction(text: &str, context: &str) -> Result<PredictionFile, IoError> {
    parse(text, context)
}

/// Integer class index or class name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassLabel {
    Index(usize),
    Name(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtObject {
    pub class: ClassLabel,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthFile {
    pub objects: Vec<GtObject>,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
    /// Optional; the paired prediction's image size is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageSize>,
}

impl GroundTruthFile {
    /// Builds the ground truth. In `binary` mode every class becomes 0;
    /// otherwise names are resolved against `class_names`.
    pub fn to_ground_truth(
        &self,
        fallback_image: ImageSize,
        class_names: Option<&[String]>,
        binary: bool,
        context: &str,
    ) -> Result<GroundTruth, IoError> {
        let image = self.image.unwrap_or(fallback_image);
        let corners: Vec<[f64; 4]> = self.objects.iter().map(|o| o.bbox).collect();
        let boxes = normalise_boxes(&corners, image, context)?;
        let classes = self
            .objects
            .iter()
            .map(|o| {
                if binary {
                    return Ok(0);
                }
                match &o.class {
                    ClassLabel::Index(k) => Ok(*k),
                    ClassLabel::Name(name) => {
                        class_names.and_then(|names| names.iter().position(|c| c == name)).ok_or_else(|| {
                            IoError::schema(
                                context,
                                format!("unknown class name {name:?} (supply a class list or use binary mode)"),
                            )
                        })
                    }
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let edges: Vec<EdgeProbability> = self.edges.iter().map(|&[i, j]| EdgeProbability::new(i, j, 1.0)).collect();
        let n = self.objects.len();
        let adjacency = if n == 0 {
            if !edges.is_empty() {
                return Err(IoError::schema(context, "edges given for an image without objects"));
            }
            AdjacencyMatrix::zeros(0)
        } else {
            AdjacencyMatrix::from_edges(n, &edges)
                .map_err(|source| IoError::Adjacency { context: context.to_owned(), source })?
        };
        GroundTruth::new(boxes, classes, adjacency).map_err(|e| detection_error(context, e))
    }
}

pub fn parse_ground_truth(text: &str, context: &str) -> Result<GroundTruthFile, IoError> {
    parse(text, context)
}

fn normalise_boxes(corners: &[[f64; 4]], image: ImageSize, context: &str) -> Result<Vec<BBox>, IoError> {
    corners
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            BBox::from_pixel_corners(c, image.w, image.h)
                .map_err(|e: BoxError| IoError::schema(context, format!("box {k}: {e}")))
        })
        .collect()
}

fn detection_error(context: &str, e: DetectionError) -> IoError {
    match e {
        DetectionError::Adjacency(source) => IoError::Adjacency { context: context.to_owned(), source },
        other => IoError::schema(context, other.to_string()),
    }
}
