//! Relationship-inference benchmarks: object precision (OP), object recall
//! (OR), image accuracy (IA) and IA restricted to images with `x` objects.
//!
//! An ordered pair `(a, b)` of predicted objects is a *detected relationship*
//! when `P(a on b) > 0.5` and `P(a on b) > P(b on a)`. It is a true positive
//! when both boxes are matched to ground-truth objects `i`, `j`, the ground
//! truth has `i` resting directly on `j`, and (outside binary mode) both
//! predicted classes are correct.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{assign_rectangular, AssignmentError};
use crate::detection::{DetectionSet, GroundTruth};
use crate::geometry::iou;
use crate::par::{self, Execution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("{predictions} prediction sets but {ground_truths} ground truths")]
    CountMismatch { predictions: usize, ground_truths: usize },
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// Minimum IoU for a predicted box to count as a ground-truth object.
    pub iou_threshold: f64,
    /// Ignore class labels; only box matches matter.
    pub binary: bool,
    /// Count detected relationships touching unmatched predicted boxes as
    /// false positives. When off they are ignored.
    pub count_unmatched_edges: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { iou_threshold: 0.5, binary: false, count_unmatched_edges: true }
    }
}

/// Relationship counts for a single image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub gt_objects: usize,
    /// Every object found with its class, every relationship right, nothing extra.
    pub correct: bool,
}

/// Detected relationships `(a, b)` over predicted indices.
pub fn detected_relationships(detections: &DetectionSet) -> Vec<(usize, usize)> {
    let a = &detections.adjacency;
    let n = a.n();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let p = a.get(i, j);
                if p > 0.5 && p > a.get(j, i) {
                    out.push((i, j));
                }
            }
        }
    }
    out
}

/// Pairs predicted boxes with ground-truth boxes by Hungarian assignment on
/// `1 - IoU`, dropping pairs below the threshold. Returns, per predicted box,
/// the matched ground-truth index.
pub fn match_boxes(
    detections: &DetectionSet,
    gt: &GroundTruth,
    iou_threshold: f64,
) -> Result<Vec<Option<usize>>, MetricsError> {
    let cost: Vec<Vec<f64>> =
        detections.boxes.iter().map(|p| gt.boxes().iter().map(|g| 1.0 - iou(p, g)).collect()).collect();
    let mut gt_of_pred = vec![None; detections.len()];
    for (p, g) in assign_rectangular(&cost)? {
        if 1.0 - cost[p][g] >= iou_threshold {
            gt_of_pred[p] = Some(g);
        }
    }
    Ok(gt_of_pred)
}

pub fn score_image(
    detections: &DetectionSet,
    gt: &GroundTruth,
    config: &MetricsConfig,
) -> Result<ImageScore, MetricsError> {
    let gt_of_pred = match_boxes(detections, gt, config.iou_threshold)?;
    let class_ok = |p: usize, g: usize| config.binary || detections.classes[p] == gt.classes()[g];
    let gt_adj = gt.adjacency();
    let (mut tp, mut fp) = (0, 0);
    for (a, b) in detected_relationships(detections) {
        match (gt_of_pred[a], gt_of_pred[b]) {
            (Some(i), Some(j)) => {
                if gt_adj.get(i, j) == 1.0 && class_ok(a, i) && class_ok(b, j) {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
            _ => {
                if config.count_unmatched_edges {
                    fp += 1;
                }
            }
        }
    }
    let gt_edges = gt.edges().len();
    let fn_ = gt_edges - tp;
    let matched = gt_of_pred.iter().flatten().count();
    let classes_right = gt_of_pred.iter().enumerate().all(|(p, g)| g.is_none_or(|g| class_ok(p, g)));
    let correct = fp == 0 && fn_ == 0 && matched == gt.len() && matched == detections.len() && classes_right;
    Ok(ImageScore { tp, fp, fn_, gt_objects: gt.len(), correct })
}

/// Correct / total image counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageTally {
    pub correct: usize,
    pub total: usize,
}

impl ImageTally {
    pub fn percent(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.total as f64
        }
    }
}

/// Aggregated counts. Merging is associative and commutative.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub images: ImageTally,
    pub by_count: BTreeMap<usize, ImageTally>,
}

impl MetricCounts {
    pub fn add(&mut self, score: &ImageScore) {
        self.tp += score.tp;
        self.fp += score.fp;
        self.fn_ += score.fn_;
        let c = usize::from(score.correct);
        self.images.correct += c;
        self.images.total += 1;
        let slot = self.by_count.entry(score.gt_objects).or_default();
        slot.correct += c;
        slot.total += 1;
    }

    pub fn merge(mut self, other: &Self) -> Self {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.images.correct += other.images.correct;
        self.images.total += other.images.total;
        for (k, t) in &other.by_count {
            let slot = self.by_count.entry(*k).or_default();
            slot.correct += t.correct;
            slot.total += t.total;
        }
        self
    }

    pub fn report(&self) -> MetricsReport {
        let ratio = |num: usize, den: usize, clean: bool| {
            if den > 0 {
                100.0 * num as f64 / den as f64
            } else if clean {
                100.0
            } else {
                0.0
            }
        };
        MetricsReport {
            op: ratio(self.tp, self.tp + self.fp, self.fn_ == 0),
            or_: ratio(self.tp, self.tp + self.fn_, self.fp == 0),
            ia: self.images.percent(),
            ia_by_count: self.by_count.iter().map(|(&k, t)| (k, t.percent())).collect(),
            counts: self.clone(),
        }
    }
}

/// Percentages in `[0, 100]` plus the counts they were derived from.
///
/// When a precision or recall denominator is zero the value is 100 if the
/// other error count is also zero (nothing to find, nothing claimed) and 0
/// otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub op: f64,
    #[serde(rename = "or")]
    pub or_: f64,
    pub ia: f64,
    pub ia_by_count: BTreeMap<usize, f64>,
    pub counts: MetricCounts,
}

pub fn relationship_metrics(
    predictions: &[DetectionSet],
    ground_truths: &[GroundTruth],
    config: &MetricsConfig,
) -> Result<MetricsReport, MetricsError> {
    relationship_metrics_with(predictions, ground_truths, config, Execution::default())
}

pub fn relationship_metrics_with(
    predictions: &[DetectionSet],
    ground_truths: &[GroundTruth],
    config: &MetricsConfig,
    execution: Execution,
) -> Result<MetricsReport, MetricsError> {
    if predictions.len() != ground_truths.len() {
        return Err(MetricsError::CountMismatch { predictions: predictions.len(), ground_truths: ground_truths.len() });
    }
    let pairs: Vec<(&DetectionSet, &GroundTruth)> = predictions.iter().zip(ground_truths).collect();
    let scores = par::map(&pairs, execution, |(p, g)| score_image(p, g, config));
    let mut counts = MetricCounts::default();
    for s in scores {
        counts.add(&s?);
    }
    Ok(counts.report())
}
