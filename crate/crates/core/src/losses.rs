//! Set-prediction training losses, evaluated as plain scalar functions.
//!
//! Reductions follow the loss definitions literally: the classification and
//! adjacency terms are sums, the two box terms are means over matched pairs.
//! This matters when choosing the `γ` weights.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adjacency::AdjacencyMatrix;
use crate::assignment::Matching;
use crate::detection::{match_prediction, matched_adjacency, DetectionError, GroundTruth, MatchWeights, Prediction};
use crate::geometry::{giou, BBox};

/// Probabilities are clamped to `[LOG_FLOOR, 1 - LOG_FLOOR]` before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("target class {target} out of range for {classes} columns")]
    TargetOutOfRange { target: usize, classes: usize },
    #[error("ground-truth adjacency entry ({i}, {j}) = {value} is not 0 or 1")]
    NonBinaryTarget { i: usize, j: usize, value: f64 },
    #[error("invalid loss weights: {0}")]
    InvalidWeights(String),
    #[error(transparent)]
    Detection(#[from] DetectionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub class: f64,
    pub l1: f64,
    pub giou: f64,
    pub adj: f64,
    /// Weight of the unknown class in the classification loss, in `(0, 1]`.
    pub w_unknown: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { class: 1.0, l1: 5.0, giou: 2.0, adj: 1.0, w_unknown: 0.1 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), LossError> {
        let gammas = [self.class, self.l1, self.giou, self.adj];
        if gammas.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(LossError::InvalidWeights("γ weights must be finite and nonnegative".into()));
        }
        if !(self.w_unknown > 0.0 && self.w_unknown <= 1.0) {
            return Err(LossError::InvalidWeights(format!("w_unknown = {} is outside (0, 1]", self.w_unknown)));
        }
        Ok(())
    }
}

/// Per-proposal target classes: matched proposals take their ground-truth
/// class, every other proposal the unknown class.
pub fn class_targets(proposals: usize, matching: &Matching, gt_classes: &[usize], unknown: usize) -> Vec<usize> {
    let mut targets = vec![unknown; proposals];
    for &(p, g) in &matching.pairs {
        targets[p] = gt_classes[g];
    }
    targets
}

/// Weighted cross-entropy `-Σ_p w_{t_p} log P_p(t_p)` with one-hot targets.
/// The last column is the unknown class and is weighted by `w_unknown`.
pub fn classification_loss<R: AsRef<[f64]>>(
    class_probs: &[R],
    targets: &[usize],
    w_unknown: f64,
) -> Result<f64, LossError> {
    if class_probs.len() != targets.len() {
        return Err(LossError::Shape(format!("{} probability rows but {} targets", class_probs.len(), targets.len())));
    }
    let mut loss = 0.0;
    for (probs, &t) in class_probs.iter().zip(targets) {
        let probs = probs.as_ref();
        if t >= probs.len() {
            return Err(LossError::TargetOutOfRange { target: t, classes: probs.len() });
        }
        let weight = if t + 1 == probs.len() { w_unknown } else { 1.0 };
        loss -= weight * probs[t].clamp(LOG_FLOOR, 1.0).ln();
    }
    Ok(loss)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoxLosses {
    pub l1: f64,
    pub giou: f64,
}

/// Mean L1 (center-size form) and mean `1 - GIoU` over matched box pairs.
/// An empty matching yields zero for both.
pub fn box_losses(pred: &[BBox], gt: &[BBox]) -> Result<BoxLosses, LossError> {
    if pred.len() != gt.len() {
        return Err(LossError::Shape(format!("{} predicted boxes but {} targets", pred.len(), gt.len())));
    }
    if pred.is_empty() {
        return Ok(BoxLosses::default());
    }
    let k = pred.len() as f64;
    let l1 = pred.iter().zip(gt).map(|(p, g)| p.l1_distance(g)).sum::<f64>() / k;
    let giou_loss = pred.iter().zip(gt).map(|(p, g)| 1.0 - giou(p, g)).sum::<f64>() / k;
    Ok(BoxLosses { l1, giou: giou_loss })
}

/// Binary cross-entropy summed over the off-diagonal cells of `A_m`.
pub fn adjacency_loss(matched: &AdjacencyMatrix, target: &AdjacencyMatrix) -> Result<f64, LossError> {
    let n = matched.n();
    if target.n() != n {
        return Err(LossError::Shape(format!("A_m is {n}x{n} but target is {0}x{0}", target.n())));
    }
    let mut loss = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let y = target.get(i, j);
            if y != 0.0 && y != 1.0 {
                return Err(LossError::NonBinaryTarget { i, j, value: y });
            }
            let a = matched.get(i, j).clamp(LOG_FLOOR, 1.0 - LOG_FLOOR);
            loss -= if y == 1.0 { a.ln() } else { (-a).ln_1p() };
        }
    }
    Ok(loss)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub class: f64,
    pub l1: f64,
    pub giou: f64,
    pub adj: f64,
}

/// `γ_c L_c + γ_l1 L_l1 + γ_GIoU L_GIoU + γ_adj L_adj`. A zero weight drops
/// its term entirely, even if the component is infinite or NaN.
pub fn total_loss(components: &LossComponents, weights: &LossWeights) -> f64 {
    [
        (weights.class, components.class),
        (weights.l1, components.l1),
        (weights.giou, components.giou),
        (weights.adj, components.adj),
    ]
    .iter()
    .filter(|(w, _)| *w != 0.0)
    .map(|(w, c)| w * c)
    .sum()
}

/// Full loss evaluation for one image: Hungarian matching under
/// `match_weights`, then every loss component on the matched sets.
pub fn evaluate_set_loss(
    pred: &Prediction,
    gt: &GroundTruth,
    weights: &LossWeights,
    match_weights: &MatchWeights,
) -> Result<(LossComponents, f64), LossError> {
    weights.validate()?;
    let matching = match_prediction(pred, gt, match_weights)?;
    let targets = class_targets(pred.len(), &matching, gt.classes(), pred.unknown_class());
    let class = classification_loss(pred.class_probs(), &targets, weights.w_unknown)?;
    let pred_boxes: Vec<BBox> = matching.pairs.iter().map(|&(p, _)| pred.boxes()[p]).collect();
    let gt_boxes: Vec<BBox> = matching.pairs.iter().map(|&(_, g)| gt.boxes()[g]).collect();
    let boxes = box_losses(&pred_boxes, &gt_boxes)?;
    let am = matched_adjacency(pred.adjacency(), &matching).map_err(DetectionError::from)?;
    let adj = adjacency_loss(&am, gt.adjacency())?;
    let components = LossComponents { class, l1: boxes.l1, giou: boxes.giou, adj };
    Ok((components, total_loss(&components, weights)))
}
