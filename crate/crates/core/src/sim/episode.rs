//! Grasp outcomes and full bin-clearing episodes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::observe::{fuse_into_latest, observe, ObservationModel, ViewObservation, Viewpoint};
use super::policy::{entropy_gated_step, quality_only_step, Belief, PolicyAction, PolicyKind, PolicyParams};
use super::scene::{ObjectId, SceneGraph};
use super::SimError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraspModel {
    /// Success probability of an unobstructed grasp at quality 1.
    pub base_success: f64,
    /// How much low grasp quality lowers success: `1 - influence * (1 - q)`.
    pub quality_influence: f64,
    /// Relative success loss when the target still supports other objects.
    pub order_error_penalty: f64,
    /// Probability that each object resting on a disturbed target falls free.
    pub topple_prob: f64,
    /// Probability that a successful grasp also lifts a second, free object.
    pub double_grasp_prob: f64,
}

impl Default for GraspModel {
    fn default() -> Self {
        Self {
            base_success: 0.95,
            quality_influence: 0.3,
            order_error_penalty: 0.5,
            topple_prob: 0.3,
            double_grasp_prob: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraspOutcome {
    pub success: bool,
    /// The target still supported at least one object.
    pub order_error: bool,
    pub toppled: Vec<ObjectId>,
    /// Extra object removed by a double grasp.
    pub also_removed: Option<ObjectId>,
}

/// Executes a grasp on the ground-truth scene.
///
/// Draw order is fixed: success, then one topple draw per supported object in
/// id order, then the double-grasp draw.
pub fn apply_grasp<R: Rng>(
    scene: &mut SceneGraph,
    target: ObjectId,
    quality: f64,
    model: &GraspModel,
    rng: &mut R,
) -> Result<GraspOutcome, SimError> {
    if !scene.is_present(target) {
        return Err(SimError::AbsentObject(target));
    }
    let supported = scene.supported_by(target);
    let order_error = !supported.is_empty();
    let mut p = model.base_success * (1.0 - model.quality_influence * (1.0 - quality.clamp(0.0, 1.0)));
    if order_error {
        p *= 1.0 - model.order_error_penalty;
    }
    let success = rng.random_bool(p.clamp(0.0, 1.0));
    let mut toppled = Vec::new();
    if order_error {
        for &s in &supported {
            if rng.random_bool(model.topple_prob) {
                scene.drop_supports(s);
                toppled.push(s);
            }
        }
    }
    let mut also_removed = None;
    if success {
        scene.remove(target);
        if model.double_grasp_prob > 0.0 && rng.random_bool(model.double_grasp_prob) {
            let free: Vec<ObjectId> =
                scene.present().into_iter().filter(|&o| scene.supported_by(o).is_empty()).collect();
            if !free.is_empty() {
                let extra = free[rng.random_range(0..free.len())];
                scene.remove(extra);
                also_removed = Some(extra);
            }
        }
    }
    Ok(GraspOutcome { success, order_error, toppled, also_removed })
}

/// Everything an episode needs besides the scene, the policy and the RNG.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeConfig {
    pub observation: ObservationModel,
    pub grasp: GraspModel,
    pub policy: PolicyParams,
    pub viewpoints: Vec<Viewpoint>,
    /// Consecutive failed decisions that end the episode.
    pub failure_limit: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepLog {
    View {
        viewpoint: usize,
        h_max: f64,
    },
    Grasp {
        target: ObjectId,
        h_max: Option<f64>,
        success: bool,
        order_error: bool,
    },
    /// Nothing detected and no view available.
    Idle,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub grasp_attempts: usize,
    pub grasp_successes: usize,
    pub views_added: usize,
    pub order_errors: usize,
    pub objects_removed: usize,
    pub double_grasps: usize,
    /// The bin was emptied before hitting the failure limit.
    pub cleared: bool,
    pub steps: Vec<StepLog>,
}

impl EpisodeReport {
    pub fn grasp_success_rate(&self) -> Option<f64> {
        (self.grasp_attempts > 0).then(|| self.grasp_successes as f64 / self.grasp_attempts as f64)
    }

    /// Successful grasps over all actions (grasps and views).
    pub fn action_efficiency(&self) -> Option<f64> {
        let actions = self.grasp_attempts + self.views_added;
        (actions > 0).then(|| self.grasp_successes as f64 / actions as f64)
    }

    pub fn order_error_rate(&self) -> Option<f64> {
        (self.grasp_attempts > 0).then(|| self.order_errors as f64 / self.grasp_attempts as f64)
    }
}

/// Runs one bin-clearing episode.
///
/// Each decision cycle starts with a fresh view from the current viewpoint.
/// The entropy-gated policy keeps moving to new viewpoints, fusing each view
/// into its belief, until it grasps; the baseline grasps straight away. The
/// episode ends when the bin is empty, after `failure_limit` consecutive
/// failed decisions, or at a hard cap of `20 n + 50` actions.
pub fn run_episode<R: Rng>(
    scene: &SceneGraph,
    policy: PolicyKind,
    config: &EpisodeConfig,
    rng: &mut R,
) -> EpisodeReport {
    let mut scene = scene.clone();
    let mut report = EpisodeReport::default();
    let k = config.viewpoints.len();
    let mut current = 0usize;
    let mut failures = 0usize;
    let action_cap = 20 * scene.total_objects() + 50;
    let viewpoint = |idx: usize| config.viewpoints.get(idx).copied().unwrap_or(Viewpoint { id: 0, quality: 1.0 });

    while !scene.is_empty()
        && failures < config.failure_limit
        && report.grasp_attempts + report.views_added < action_cap
    {
        let mut visited = vec![false; k];
        if k > 0 {
            visited[current] = true;
        }
        let first = observe(&scene, &viewpoint(current), &config.observation, rng);
        let mut ids = first.ids.clone();
        let mut adjacency = first.adjacency.clone();
        let mut quality = first.grasp_quality.clone();
        let mut views_this_cycle = 0usize;

        let (action, h_max) = loop {
            let decided = match policy {
                PolicyKind::QualityOnly => quality_only_step(&ids, &quality).map(|a| (a, None)),
                PolicyKind::EntropyGated => {
                    let belief = Belief { ids: &ids, adjacency: &adjacency, grasp_quality: &quality };
                    let can_view = views_this_cycle < config.policy.max_views_per_grasp
                        && report.grasp_attempts + report.views_added < action_cap;
                    entropy_gated_step(&belief, &config.viewpoints, &visited, can_view, &config.policy)
                        .map(|d| (d.action, Some(d.h_max)))
                }
            };
            match decided {
                Ok((PolicyAction::View(v), h)) => {
                    let idx = config.viewpoints.iter().position(|vp| vp.id == v).unwrap_or(0);
                    report.views_added += 1;
                    views_this_cycle += 1;
                    visited[idx] = true;
                    current = idx;
                    report.steps.push(StepLog::View { viewpoint: v, h_max: h.unwrap_or(0.0) });
                    let latest: ViewObservation = observe(&scene, &viewpoint(idx), &config.observation, rng);
                    adjacency = fuse_into_latest(&ids, &adjacency, &latest);
                    ids = latest.ids;
                    quality = latest.grasp_quality;
                }
                Ok((PolicyAction::Grasp(target), h)) => break (Some(target), h),
                Err(_) => break (None, None),
            }
        };

        let Some(target) = action else {
            failures += 1;
            report.steps.push(StepLog::Idle);
            continue;
        };
        let q = ids.iter().position(|&i| i == target).map_or(0.0, |p| quality[p]);
        let outcome = apply_grasp(&mut scene, target, q, &config.grasp, rng).expect("target was detected in the scene");
        report.grasp_attempts += 1;
        if outcome.order_error {
            report.order_errors += 1;
        }
        if outcome.success {
            report.grasp_successes += 1;
            report.objects_removed += 1;
            failures = 0;
        } else {
            failures += 1;
        }
        if outcome.also_removed.is_some() {
            report.objects_removed += 1;
            report.double_grasps += 1;
        }
        report.steps.push(StepLog::Grasp { target, h_max, success: outcome.success, order_error: outcome.order_error });
    }
    report.cleared = scene.is_empty();
    report
}
