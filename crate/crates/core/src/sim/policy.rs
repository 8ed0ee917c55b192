//! Grasp-or-view action selection.

use serde::{Deserialize, Serialize};

use super::observe::Viewpoint;
use super::scene::ObjectId;
use super::SimError;
use crate::adjacency::AdjacencyMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "target")]
pub enum PolicyAction {
    Grasp(ObjectId),
    View(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Grasp the highest-quality detection, ignoring the hierarchy.
    QualityOnly,
    /// Take more views while the hierarchy is uncertain, then grasp safely.
    EntropyGated,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 2] = [PolicyKind::QualityOnly, PolicyKind::EntropyGated];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::QualityOnly => "quality_only",
            PolicyKind::EntropyGated => "entropy_gated",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyParams {
    /// Entropy threshold in nats; grasp when `H_max <= h_th`.
    pub h_th: f64,
    /// Minimum grasp quality preferred among safe objects.
    pub q_th: f64,
    /// Minimum safe-grasp probability for an object to count as safe.
    pub safety_threshold: f64,
    /// Info-gain multiplier for viewpoints already visited in this decision.
    pub visited_novelty: f64,
    /// Views allowed before a grasp is forced.
    pub max_views_per_grasp: usize,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self { h_th: 0.45, q_th: 0.2, safety_threshold: 0.5, visited_novelty: 0.25, max_views_per_grasp: 4 }
    }
}

/// Per-viewpoint information-gain surrogate:
/// `h_max * quality * (1 if unvisited else visited_novelty)`.
pub fn info_gain_scores(
    h_max: f64,
    viewpoints: &[Viewpoint],
    visited: &[bool],
    visited_novelty: f64,
) -> Result<Vec<f64>, SimError> {
    if viewpoints.is_empty() || viewpoints.len() != visited.len() {
        return Err(SimError::NoViewpoints);
    }
    let novelty = visited_novelty.clamp(0.0, 1.0);
    Ok(viewpoints
        .iter()
        .zip(visited)
        .map(|(vp, &seen)| h_max * vp.quality.clamp(0.0, 1.0) * if seen { novelty } else { 1.0 })
        .collect())
}

/// First index of the maximum; `None` for an empty slice.
pub(crate) fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Grasp candidate under the safety cut: the highest-quality object among
/// those with safe-grasp probability `>= safety_threshold` and quality
/// `>= q_th`; failing that, the highest-quality safe object; failing that, the
/// highest-quality object overall. Returns a position in `quality`.
pub fn select_grasp(adjacency: &AdjacencyMatrix, quality: &[f64], params: &PolicyParams) -> Option<usize> {
    let safe = adjacency.safe_grasp_probs();
    let pick = |keep: &dyn Fn(usize) -> bool| {
        let masked: Vec<f64> =
            quality.iter().enumerate().map(|(i, &q)| if keep(i) { q } else { f64::NEG_INFINITY }).collect();
        argmax(&masked).filter(|&i| keep(i))
    };
    let is_safe = |i: usize| safe.get(i) >= params.safety_threshold;
    pick(&|i| is_safe(i) && quality[i] >= params.q_th).or_else(|| pick(&is_safe)).or_else(|| argmax(quality))
}

/// Current belief of one decision cycle.
pub struct Belief<'a> {
    pub ids: &'a [ObjectId],
    pub adjacency: &'a AdjacencyMatrix,
    pub grasp_quality: &'a [f64],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub action: PolicyAction,
    pub h_max: f64,
}

/// Entropy-gated step: grasp (under the safety cut) when `H_max <= h_th` or
/// when no further view is allowed, otherwise move to the viewpoint with the
/// largest information-gain score. With nothing detected it looks for the best
/// viewpoint by quality and novelty alone.
pub fn entropy_gated_step(
    belief: &Belief<'_>,
    viewpoints: &[Viewpoint],
    visited: &[bool],
    can_view: bool,
    params: &PolicyParams,
) -> Result<Decision, SimError> {
    let h_max = belief.adjacency.max_entropy();
    let view_possible = can_view && !viewpoints.is_empty();
    if belief.ids.is_empty() {
        if !view_possible {
            return Err(SimError::NothingToDo);
        }
        let scores = info_gain_scores(1.0, viewpoints, visited, params.visited_novelty)?;
        let v = argmax(&scores).expect("nonempty");
        return Ok(Decision { action: PolicyAction::View(viewpoints[v].id), h_max });
    }
    if h_max <= params.h_th || !view_possible {
        let k = select_grasp(belief.adjacency, belief.grasp_quality, params).expect("nonempty belief");
        return Ok(Decision { action: PolicyAction::Grasp(belief.ids[k]), h_max });
    }
    let scores = info_gain_scores(h_max, viewpoints, visited, params.visited_novelty)?;
    let v = argmax(&scores).expect("nonempty");
    Ok(Decision { action: PolicyAction::View(viewpoints[v].id), h_max })
}

/// Baseline step: grasp the highest-quality detection.
pub fn quality_only_step(ids: &[ObjectId], grasp_quality: &[f64]) -> Result<PolicyAction, SimError> {
    argmax(grasp_quality).map(|k| PolicyAction::Grasp(ids[k])).ok_or(SimError::NothingToDo)
}
