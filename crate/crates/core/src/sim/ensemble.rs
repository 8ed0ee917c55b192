//! Seeded ensembles and the benchmark table.

use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::episode::{run_episode, EpisodeReport};
use super::policy::PolicyKind;
use super::scene::SceneGraph;
use super::{seeded_rng, SimError};
use crate::par::{self, Execution};

/// RNG stream for scenario `scenario` and draw purpose `tag` (0 builds the
/// scene, `1 + policy index` drives that policy's episode).
fn stream(scenario: usize, tag: u64) -> u64 {
    ((scenario as u64) << 8) | tag
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub scenario: String,
    pub policy: PolicyKind,
    pub seed: u64,
    #[serde(flatten)]
    pub report: EpisodeReport,
}

/// One row per (scenario, policy). Counts are per-episode means; percentages
/// are means of per-episode ratios over episodes where the ratio is defined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub scenario: String,
    pub policy: String,
    pub episodes: usize,
    pub grasp_att: f64,
    pub grasp_suc: f64,
    pub views_added: f64,
    pub grasp_suc_pct: f64,
    pub action_eff_pct: f64,
    pub ooe_pct: f64,
    /// Standard error of `ooe_pct`.
    pub ooe_pct_stderr: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkTable {
    pub fn row(&self, scenario: &str, policy: PolicyKind) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.scenario == scenario && r.policy == policy.name())
    }

    /// CSV with four decimals per value.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "scenario",
            "policy",
            "episodes",
            "grasp_att",
            "grasp_suc",
            "views_added",
            "grasp_suc_pct",
            "action_eff_pct",
            "ooe_pct",
            "ooe_pct_stderr",
        ])
        .expect("in-memory write");
        for r in &self.rows {
            let f = |v: f64| format!("{v:.4}");
            w.write_record([
                r.scenario.clone(),
                r.policy.clone(),
                r.episodes.to_string(),
                f(r.grasp_att),
                f(r.grasp_suc),
                f(r.views_added),
                f(r.grasp_suc_pct),
                f(r.action_eff_pct),
                f(r.ooe_pct),
                f(r.ooe_pct_stderr),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub table: BenchmarkTable,
    /// Sorted by scenario (config order), policy, then seed.
    pub episodes: Vec<EpisodeRecord>,
}

impl EnsembleResult {
    /// One JSON object per line.
    pub fn episodes_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.episodes {
            out.push_str(&serde_json::to_string(e).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Mean and standard error of the mean (sample deviation; 0 below two values).
fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn summarize(scenario: &str, policy: PolicyKind, reports: &[&EpisodeReport]) -> BenchmarkRow {
    let n = reports.len();
    let mean_count = |f: fn(&EpisodeReport) -> usize| reports.iter().map(|r| f(r) as f64).sum::<f64>() / n as f64;
    let pct = |f: fn(&EpisodeReport) -> Option<f64>| -> Vec<f64> {
        reports.iter().filter_map(|r| f(r)).map(|v| 100.0 * v).collect()
    };
    let (ooe, ooe_se) = mean_stderr(&pct(EpisodeReport::order_error_rate));
    BenchmarkRow {
        scenario: scenario.to_string(),
        policy: policy.name().to_string(),
        episodes: n,
        grasp_att: mean_count(|r| r.grasp_attempts),
        grasp_suc: mean_count(|r| r.grasp_successes),
        views_added: mean_count(|r| r.views_added),
        grasp_suc_pct: mean_stderr(&pct(EpisodeReport::grasp_success_rate)).0,
        action_eff_pct: mean_stderr(&pct(EpisodeReport::action_efficiency)).0,
        ooe_pct: ooe,
        ooe_pct_stderr: ooe_se,
    }
}

/// Runs every policy on every (scenario, seed) scene.
///
/// Both policies face the same scene for a given seed. Episodes are executed
/// with `execution` and aggregated in sorted seed order, so the table does not
/// depend on seed-list order or on scheduling.
pub fn run_ensemble(config: &SimConfig, seeds: &[u64], execution: Execution) -> Result<EnsembleResult, SimError> {
    if seeds.is_empty() {
        return Err(SimError::NoSeeds);
    }
    config.validate()?;
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    let episode_config = config.episode_config();

    let mut jobs = Vec::new();
    for si in 0..config.scenarios.len() {
        for (pi, &policy) in PolicyKind::ALL.iter().enumerate() {
            for &seed in &sorted {
                jobs.push((si, pi, policy, seed));
            }
        }
    }
    let reports = par::map(&jobs, execution, |&(si, pi, policy, seed)| {
        let s = &config.scenarios[si];
        let scene = SceneGraph::generate_with(&mut seeded_rng(seed, stream(si, 0)), s.n_objects, s.density);
        run_episode(&scene, policy, &episode_config, &mut seeded_rng(seed, stream(si, 1 + pi as u64)))
    });

    let episodes: Vec<EpisodeRecord> = jobs
        .iter()
        .zip(reports)
        .map(|(&(si, _, policy, seed), report)| EpisodeRecord {
            scenario: config.scenarios[si].name.clone(),
            policy,
            seed,
            report,
        })
        .collect();

    let mut rows = Vec::new();
    let per_group = sorted.len();
    for (g, chunk) in episodes.chunks(per_group).enumerate() {
        let si = g / PolicyKind::ALL.len();
        let policy = PolicyKind::ALL[g % PolicyKind::ALL.len()];
        let reports: Vec<&EpisodeReport> = chunk.iter().map(|e| &e.report).collect();
        rows.push(summarize(&config.scenarios[si].name, policy, &reports));
    }
    Ok(EnsembleResult { table: BenchmarkTable { rows }, episodes })
}
