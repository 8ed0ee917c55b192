//! Detector outputs, ground-truth annotations, and the set-matching step that
//! pairs them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adjacency::{AdjacencyError, AdjacencyMatrix};
use crate::assignment::{hungarian, AssignmentError, Matching};
use crate::geometry::{giou, BBox};

/// Tolerance on class-probability rows summing to one.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("{what}: expected {expected} entries, found {found}")]
    LengthMismatch { what: &'static str, expected: usize, found: usize },
    #[error("class probabilities of proposal {row} are invalid (negative entry or sum {sum})")]
    InvalidClassRow { row: usize, sum: f64 },
    #[error("class index {class} out of range for {classes} real classes")]
    ClassOutOfRange { class: usize, classes: usize },
    #[error("ground-truth adjacency must be 0/1")]
    NonBinaryGroundTruth,
    #[error(transparent)]
    Adjacency(#[from] AdjacencyError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
}

/// Raw output of a set-prediction detector for one image: `q` proposals, each
/// with a box, a distribution over `c_t + 1` classes (the last column is the
/// "unknown"/"empty" class), and a `q x q` adjacency matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    boxes: Vec<BBox>,
    class_probs: Vec<Vec<f64>>,
    adjacency: AdjacencyMatrix,
}

impl Prediction {
    pub fn new(
        boxes: Vec<BBox>,
        class_probs: Vec<Vec<f64>>,
        adjacency: AdjacencyMatrix,
    ) -> Result<Self, DetectionError> {
        let q = boxes.len();
        check_len("class probability rows", q, class_probs.len())?;
        check_len("adjacency dimension", q, adjacency.n())?;
        let width = class_probs.first().map_or(0, Vec::len);
        for (row, probs) in class_probs.iter().enumerate() {
            check_len("class probability columns", width, probs.len())?;
            let sum: f64 = probs.iter().sum();
            if probs.iter().any(|&p| p.is_nan() || p < 0.0) || (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                return Err(DetectionError::InvalidClassRow { row, sum });
            }
        }
        if q > 0 && width < 2 {
            return Err(DetectionError::LengthMismatch {
                what: "class probability columns (at least one real class plus unknown)",
                expected: 2,
                found: width,
            });
        }
        Ok(Self { boxes, class_probs, adjacency })
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn boxes(&self) -> &[BBox] {
        &self.boxes
    }

    pub fn class_probs(&self) -> &[Vec<f64>] {
        &self.class_probs
    }

    pub fn adjacency(&self) -> &AdjacencyMatrix {
        &self.adjacency
    }

    /// Number of columns per class row, `c_t + 1`. Zero for an empty prediction.
    pub fn class_columns(&self) -> usize {
        self.class_probs.first().map_or(0, Vec::len)
    }

    /// Index of the unknown class, i.e. `c_t`.
    pub fn unknown_class(&self) -> usize {
        self.class_columns().saturating_sub(1)
    }

    /// Final detections: proposals whose most likely class is "unknown" are
    /// discarded together with their adjacency rows and columns.
    pub fn to_detection_set(&self) -> DetectionSet {
        let unknown = self.unknown_class();
        let mut keep = Vec::new();
        let mut classes = Vec::new();
        for (p, probs) in self.class_probs.iter().enumerate() {
            let label = argmax(probs);
            if label != unknown {
                keep.push(p);
                classes.push(label);
            }
        }
        DetectionSet {
            boxes: keep.iter().map(|&p| self.boxes[p]).collect(),
            classes,
            adjacency: self.adjacency.submatrix(&keep).expect("indices in range"),
        }
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), DetectionError> {
    if expected == found {
        Ok(())
    } else {
        Err(DetectionError::LengthMismatch { what, expected, found })
    }
}

/// Filtered detections with hard class labels, as consumed by the
/// relationship metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionSet {
    pub boxes: Vec<BBox>,
    pub classes: Vec<usize>,
    pub adjacency: AdjacencyMatrix,
}

impl DetectionSet {
    pub fn new(boxes: Vec<BBox>, classes: Vec<usize>, adjacency: AdjacencyMatrix) -> Result<Self, DetectionError> {
        check_len("classes", boxes.len(), classes.len())?;
        check_len("adjacency dimension", boxes.len(), adjacency.n())?;
        Ok(Self { boxes, classes, adjacency })
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

/// Annotated objects of one image with their 0/1 direct-support relations.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    boxes: Vec<BBox>,
    classes: Vec<usize>,
    adjacency: AdjacencyMatrix,
}

impl GroundTruth {
    pub fn new(boxes: Vec<BBox>, classes: Vec<usize>, adjacency: AdjacencyMatrix) -> Result<Self, DetectionError> {
        check_len("classes", boxes.len(), classes.len())?;
        check_len("adjacency dimension", boxes.len(), adjacency.n())?;
        if !adjacency.is_binary() {
            return Err(DetectionError::NonBinaryGroundTruth);
        }
        adjacency.extract_order(0.5)?;
        Ok(Self { boxes, classes, adjacency })
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn boxes(&self) -> &[BBox] {
        &self.boxes
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn adjacency(&self) -> &AdjacencyMatrix {
        &self.adjacency
    }

    /// Ground-truth edges `(i, j)`: object `i` rests directly on `j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency.thresholded_edges(0.5)
    }
}

/// Weights of the prediction/ground-truth matching cost.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchWeights {
    pub class: f64,
    pub l1: f64,
    pub giou: f64,
}

impl Default for MatchWeights {
    fn default() -> Self {
        Self { class: 1.0, l1: 5.0, giou: 2.0 }
    }
}

/// `q x m` matching cost. Entry `(p, g)` is
/// `class * (1 - P_p(class_g)) + l1 * |box_p - box_g|_1 + giou * (1 - GIoU)`.
pub fn match_cost(
    pred: &Prediction,
    gt: &GroundTruth,
    weights: &MatchWeights,
) -> Result<Vec<Vec<f64>>, DetectionError> {
    let real_classes = pred.unknown_class();
    if let Some(&class) = gt.classes.iter().find(|&&c| c >= real_classes) {
        if !pred.is_empty() {
            return Err(DetectionError::ClassOutOfRange { class, classes: real_classes });
        }
    }
    Ok(pred
        .boxes
        .iter()
        .zip(&pred.class_probs)
        .map(|(pb, probs)| {
            gt.boxes
                .iter()
                .zip(&gt.classes)
                .map(|(gb, &c)| {
                    weights.class * (1.0 - probs[c])
                        + weights.l1 * pb.l1_distance(gb)
                        + weights.giou * (1.0 - giou(pb, gb))
                })
                .collect()
        })
        .collect())
}

/// Hungarian matching of proposals to ground-truth objects under [`match_cost`].
pub fn match_prediction(
    pred: &Prediction,
    gt: &GroundTruth,
    weights: &MatchWeights,
) -> Result<Matching, DetectionError> {
    if gt.is_empty() {
        return Ok(Matching { pairs: Vec::new(), unmatched: (0..pred.len()).collect() });
    }
    Ok(hungarian(&match_cost(pred, gt, weights)?)?)
}

/// `A_m`: the predicted adjacency restricted to matched proposals, rows and
/// columns ordered by ground-truth index.
pub fn matched_adjacency(
    pred_adjacency: &AdjacencyMatrix,
    matching: &Matching,
) -> Result<AdjacencyMatrix, AdjacencyError> {
    pred_adjacency.submatrix(&matching.prediction_order())
}
