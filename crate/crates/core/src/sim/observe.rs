//! Surrogate for one detector pass over one viewpoint.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::scene::{ObjectId, SceneGraph};
use super::SimError;
use crate::adjacency::{fuse, AdjacencyMatrix};
use crate::matrix::SquareMatrix;

/// Noisy observed probabilities are kept inside `[OBS_CLAMP, 1 - OBS_CLAMP]`.
pub const OBS_CLAMP: f64 = 1e-6;

/// How detections, edge probabilities and grasp-quality scores are drawn.
///
/// A true edge is observed as `Beta(edge_alpha, edge_beta)`, an absent edge as
/// the mirrored `Beta(edge_beta, edge_alpha)`. The draw is then pulled toward
/// 0.5 by `shrink = 1 - view_noise_scale * (1 - viewpoint quality)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObservationModel {
    pub p_detect: f64,
    pub edge_alpha: f64,
    pub edge_beta: f64,
    /// Observe edges as exact 0/1 truth instead of Beta draws.
    pub exact_edges: bool,
    /// Probability a true edge is hidden and observed as 0.5.
    pub p_occlude: f64,
    pub view_noise_scale: f64,
    /// Probability that one view swaps the identities of two detections.
    pub mis_association_rate: f64,
    pub quality_low: f64,
    pub quality_high: f64,
    /// Multiplicative quality loss per object resting on the candidate.
    pub support_quality_penalty: f64,
}

impl Default for ObservationModel {
    fn default() -> Self {
        Self {
            p_detect: 0.97,
            edge_alpha: 20.0,
            edge_beta: 1.0,
            exact_edges: false,
            p_occlude: 0.15,
            view_noise_scale: 0.5,
            mis_association_rate: 0.0,
            quality_low: 0.3,
            quality_high: 1.0,
            support_quality_penalty: 0.1,
        }
    }
}

impl ObservationModel {
    /// Every object seen, every edge observed exactly, no view degradation.
    pub fn noiseless() -> Self {
        Self {
            p_detect: 1.0,
            exact_edges: true,
            p_occlude: 0.0,
            view_noise_scale: 0.0,
            mis_association_rate: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let probs = [
            ("p_detect", self.p_detect),
            ("p_occlude", self.p_occlude),
            ("mis_association_rate", self.mis_association_rate),
            ("quality_low", self.quality_low),
            ("quality_high", self.quality_high),
            ("support_quality_penalty", self.support_quality_penalty),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::InvalidConfig(vec![format!("observation.{name} = {p} is outside [0, 1]")]));
            }
        }
        if self.quality_low > self.quality_high {
            return Err(SimError::InvalidConfig(vec!["observation.quality_low exceeds quality_high".into()]));
        }
        if !(self.edge_alpha > 0.0 && self.edge_beta > 0.0 && self.edge_alpha.is_finite() && self.edge_beta.is_finite())
        {
            return Err(SimError::InvalidConfig(vec!["observation edge concentrations must be positive".into()]));
        }
        if self.view_noise_scale.is_nan() || self.view_noise_scale < 0.0 {
            return Err(SimError::InvalidConfig(vec!["observation.view_noise_scale must be nonnegative".into()]));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub id: usize,
    /// In `(0, 1]`; 1 is an unobstructed view.
    pub quality: f64,
}

/// A ring of `k` viewpoints. Viewpoint 0 (the start pose) is the weakest;
/// quality rises toward the far side of the ring.
pub fn viewpoint_ring(k: usize) -> Vec<Viewpoint> {
    (0..k)
        .map(|id| {
            let angle = std::f64::consts::PI * id as f64 / k as f64;
            Viewpoint { id, quality: 0.55 + 0.45 * angle.sin() }
        })
        .collect()
}

/// Detections of one view: which objects were seen, their observed adjacency
/// (in `ids` order) and per-object grasp quality.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewObservation {
    pub viewpoint: usize,
    pub ids: Vec<ObjectId>,
    /// Identity each detection is associated with across views. Equal to
    /// `ids` unless data association swapped two of them.
    pub association: Vec<ObjectId>,
    pub adjacency: AdjacencyMatrix,
    pub grasp_quality: Vec<f64>,
}

impl ViewObservation {
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn observe<R: Rng>(
    scene: &SceneGraph,
    viewpoint: &Viewpoint,
    model: &ObservationModel,
    rng: &mut R,
) -> ViewObservation {
    let ids: Vec<ObjectId> = scene.present().into_iter().filter(|_| rng.random_bool(model.p_detect)).collect();
    let n = ids.len();
    let shrink = (1.0 - model.view_noise_scale * (1.0 - viewpoint.quality)).clamp(0.0, 1.0);
    let present_dist = Beta::new(model.edge_alpha, model.edge_beta).expect("validated concentrations");
    let absent_dist = Beta::new(model.edge_beta, model.edge_alpha).expect("validated concentrations");

    let mut m = SquareMatrix::zeros(n);
    for (a, &i) in ids.iter().enumerate() {
        for (b, &j) in ids.iter().enumerate() {
            if a == b {
                continue;
            }
            let truth = scene.rests_on(i, j);
            let raw = if model.exact_edges {
                if truth {
                    1.0
                } else {
                    0.0
                }
            } else if truth && rng.random_bool(model.p_occlude) {
                0.5
            } else if truth {
                present_dist.sample(rng)
            } else {
                absent_dist.sample(rng)
            };
            let mut p = 0.5 + shrink * (raw - 0.5);
            if !model.exact_edges {
                p = p.clamp(OBS_CLAMP, 1.0 - OBS_CLAMP);
            }
            m.set(a, b, p);
        }
    }

    let grasp_quality = ids
        .iter()
        .map(|&i| {
            let base = if model.quality_high > model.quality_low {
                rng.random_range(model.quality_low..model.quality_high)
            } else {
                model.quality_low
            };
            let on_top = ids.iter().filter(|&&t| scene.rests_on(t, i)).count();
            base * (1.0 - model.support_quality_penalty).powi(on_top as i32)
        })
        .collect();

    let mut association = ids.clone();
    if n >= 2 && rng.random_bool(model.mis_association_rate) {
        let a = rng.random_range(0..n);
        let b = (a + rng.random_range(1..n)) % n;
        association.swap(a, b);
    }

    ViewObservation {
        viewpoint: viewpoint.id,
        ids,
        association,
        adjacency: AdjacencyMatrix::from_square(m).expect("observed probabilities are valid"),
        grasp_quality,
    }
}

/// Posterior over the objects of the latest view.
///
/// `prev_ids` are the objects the previous belief is indexed by; the latest
/// view is aligned to them through its association. Pairs already seen in the previous belief are fused with the new
/// observation; pairs new to this view keep their observed value. A 0/1
/// contradiction (possible only with exact observations and broken
/// association) falls back to the latest view.
pub fn fuse_into_latest(prev_ids: &[ObjectId], prev: &AdjacencyMatrix, latest: &ViewObservation) -> AdjacencyMatrix {
    let n = latest.ids.len();
    let position: Vec<Option<usize>> =
        latest.association.iter().map(|id| prev_ids.iter().position(|p| p == id)).collect();
    let mut aligned = SquareMatrix::zeros(n);
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let v = match (position[a], position[b]) {
                (Some(pa), Some(pb)) => prev.get(pa, pb),
                _ => 0.5,
            };
            aligned.set(a, b, v);
        }
    }
    let aligned = AdjacencyMatrix::from_square(aligned).expect("entries copied from a valid matrix");
    match fuse(&[aligned, latest.adjacency.clone()]) {
        Ok(posterior) => posterior,
        Err(_) => latest.adjacency.clone(),
    }
}
