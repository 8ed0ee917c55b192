//! Ensemble configuration and its JSON form.

use serde::{Deserialize, Serialize};

use super::episode::{EpisodeConfig, GraspModel};
use super::observe::{viewpoint_ring, ObservationModel, Viewpoint};
use super::policy::PolicyParams;
use super::SimError;

/// One family of random scenes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub name: String,
    pub n_objects: usize,
    /// Probability that each placed object lands on earlier objects.
    pub density: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self { name: "ordered".into(), n_objects: 5, density: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub scenarios: Vec<ScenarioConfig>,
    pub observation: ObservationModel,
    pub grasp: GraspModel,
    pub policy: PolicyParams,
    /// Size of the viewpoint ring.
    pub viewpoints: usize,
    /// Explicit per-viewpoint qualities; overrides the ring profile.
    pub viewpoint_qualities: Option<Vec<f64>>,
    pub failure_limit: usize,
    pub seeds: Vec<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scenarios: vec![
                ScenarioConfig::default(),
                ScenarioConfig { name: "random".into(), n_objects: 10, density: 0.7 },
            ],
            observation: ObservationModel::default(),
            grasp: GraspModel::default(),
            policy: PolicyParams::default(),
            viewpoints: 8,
            viewpoint_qualities: None,
            failure_limit: 10,
            seeds: (0..200).collect(),
        }
    }
}

impl SimConfig {
    /// Parses a JSON config. Missing keys take their defaults; unknown keys
    /// are rejected all at once, each named by its dotted path.
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let mut unknown = Vec::new();
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: SimConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
            .map_err(|e| SimError::InvalidConfig(vec![e.to_string()]))?;
        if !unknown.is_empty() {
            return Err(SimError::InvalidConfig(unknown.into_iter().map(|k| format!("unknown key `{k}`")).collect()));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Collects every problem rather than stopping at the first.
    pub fn validate(&self) -> Result<(), SimError> {
        let mut problems = Vec::new();
        if self.scenarios.is_empty() {
            problems.push("at least one scenario is required".to_string());
        }
        for s in &self.scenarios {
            if s.n_objects == 0 {
                problems.push(format!("scenario `{}` needs n_objects >= 1", s.name));
            }
            if !(0.0..=1.0).contains(&s.density) {
                problems.push(format!("scenario `{}` density {} is outside [0, 1]", s.name, s.density));
            }
        }
        let mut names: Vec<&str> = self.scenarios.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            problems.push("scenario names must be unique".to_string());
        }
        if let Err(SimError::InvalidConfig(p)) = self.observation.validate() {
            problems.extend(p);
        }
        let g = &self.grasp;
        for (name, p) in [
            ("base_success", g.base_success),
            ("quality_influence", g.quality_influence),
            ("order_error_penalty", g.order_error_penalty),
            ("topple_prob", g.topple_prob),
            ("double_grasp_prob", g.double_grasp_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                problems.push(format!("grasp.{name} = {p} is outside [0, 1]"));
            }
        }
        let p = &self.policy;
        if p.h_th.is_nan() || p.h_th < 0.0 {
            problems.push("policy.h_th must be nonnegative".to_string());
        }
        for (name, v) in
            [("q_th", p.q_th), ("safety_threshold", p.safety_threshold), ("visited_novelty", p.visited_novelty)]
        {
            if !(0.0..=1.0).contains(&v) {
                problems.push(format!("policy.{name} = {v} is outside [0, 1]"));
            }
        }
        match &self.viewpoint_qualities {
            Some(q) if q.len() != self.viewpoints => {
                problems.push(format!("viewpoint_qualities has {} entries for {} viewpoints", q.len(), self.viewpoints))
            }
            Some(q) if q.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) => {
                problems.push("viewpoint qualities must lie in (0, 1]".to_string())
            }
            _ => {}
        }
        if self.failure_limit == 0 {
            problems.push("failure_limit must be at least 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(problems))
        }
    }

    pub fn viewpoint_set(&self) -> Vec<Viewpoint> {
        match &self.viewpoint_qualities {
            Some(q) => q.iter().enumerate().map(|(id, &quality)| Viewpoint { id, quality }).collect(),
            None => viewpoint_ring(self.viewpoints),
        }
    }

    pub fn episode_config(&self) -> EpisodeConfig {
        EpisodeConfig {
            observation: self.observation.clone(),
            grasp: self.grasp.clone(),
            policy: self.policy.clone(),
            viewpoints: self.viewpoint_set(),
            failure_limit: self.failure_limit,
        }
    }
}

/// Parses `a..b` (half-open), `a..=b`, or a comma-separated list.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let text = text.trim();
    let num = |s: &str| s.trim().parse::<u64>().map_err(|e| format!("bad seed `{}`: {e}", s.trim()));
    let seeds = if let Some((a, b)) = text.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = text.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if seeds.is_empty() {
        return Err(format!("seed range `{text}` is empty"));
    }
    Ok(seeds)
}
