//! Release acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::f64::consts::LN_2;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use stackgraph::adjacency::{binary_entropy, fuse};
use stackgraph::detection::{DetectionSet, GroundTruth};
use stackgraph::losses::{adjacency_loss, box_losses, classification_loss, total_loss, LossComponents, LossWeights};
use stackgraph::metrics::{relationship_metrics, MetricsConfig};
use stackgraph::par::Execution;
use stackgraph::sim::{
    entropy_gated_step, run_ensemble, run_episode, seeded_rng, viewpoint_ring, Belief, EpisodeConfig, GraspModel,
    ObservationModel, PolicyAction, PolicyKind, PolicyParams, SceneGraph, SimConfig,
};
use stackgraph::{giou, hungarian, AdjacencyMatrix, BBox, EdgeProbability, SquareMatrix};

// Tolerances.
const SAFE_GRASP_TOL: f64 = 1e-12;
const FUSION_TOL: f64 = 1e-12;
const ENTROPY_TOL: f64 = 1e-12;
const GIOU_TOL: f64 = 1e-12;
const LOSS_TOL: f64 = 1e-9;
const IA_RECOMBINE_TOL: f64 = 1e-9;
const OOE_MARGIN_SE: f64 = 2.0;

// Runtime budgets.
const BUDGET_SAFE_GRASP: Duration = Duration::from_secs(5);
const BUDGET_FUSION: Duration = Duration::from_secs(5);
const BUDGET_HUNGARIAN: Duration = Duration::from_secs(10);
const BUDGET_DOMINANCE: Duration = Duration::from_secs(60);
const BUDGET_ZERO_NOISE: Duration = Duration::from_secs(10);

const H_TH: f64 = 0.45;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn within(elapsed: Duration, budget: Duration) -> Result<(), String> {
    check(elapsed < budget, || format!("took {elapsed:?}, budget {budget:?}"))
}

fn random_adjacency<R: Rng>(rng: &mut R, n: usize) -> AdjacencyMatrix {
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = match rng.random_range(0..8) {
                    0 => 0.0,
                    1 => 1.0,
                    _ => rng.random::<f64>(),
                };
                m.set(i, j, v);
            }
        }
    }
    AdjacencyMatrix::from_square(m).unwrap()
}

/// Enumerates every configuration of the edges into `i` and sums the
/// probability of those leaving it free.
fn enumerate_safe(a: &AdjacencyMatrix, i: usize) -> f64 {
    let others: Vec<usize> = (0..a.n()).filter(|&j| j != i).collect();
    let mut free = 0.0;
    for mask in 0u32..(1 << others.len()) {
        let mut p = 1.0;
        for (bit, &j) in others.iter().enumerate() {
            p *= if mask & (1 << bit) != 0 { a.get(j, i) } else { 1.0 - a.get(j, i) };
        }
        if mask == 0 {
            free += p;
        }
    }
    free
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(1, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let a = random_adjacency(&mut rng, n);
        let safe = a.safe_grasp_probs();
        for i in 0..n {
            worst = worst.max((safe.get(i) - enumerate_safe(&a, i)).abs());
        }
    }
    within(start.elapsed(), BUDGET_SAFE_GRASP)?;
    check(worst <= SAFE_GRASP_TOL, || format!("max deviation {worst:e}"))?;
    Ok(format!("1000 matrices, max deviation {worst:.1e}, {:?}", start.elapsed()))
}

fn bayes_oracle(values: &[f64]) -> f64 {
    let present: f64 = values.iter().product();
    let absent: f64 = values.iter().map(|a| 1.0 - a).product();
    present / (present + absent)
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(2, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = rng.random_range(1..=5);
        let values: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..0.99)).collect();
        let obs: Vec<AdjacencyMatrix> =
            values.iter().map(|&v| AdjacencyMatrix::from_rows(&[vec![0.0, v], vec![0.0, 0.0]]).unwrap()).collect();
        let fused = fuse(&obs).unwrap();
        worst = worst.max((fused.get(0, 1) - bayes_oracle(&values)).abs());

        let mut reversed = obs.clone();
        reversed.reverse();
        check(fuse(&reversed).unwrap() == fused, || format!("order changed the posterior for {values:?}"))?;

        let mut padded = obs.clone();
        padded.insert(rng.random_range(0..=k), AdjacencyMatrix::uniform(2, 0.5).unwrap());
        check(fuse(&padded).unwrap() == fused, || format!("a 0.5 view changed the posterior for {values:?}"))?;
    }
    within(start.elapsed(), BUDGET_FUSION)?;
    check(worst <= FUSION_TOL, || format!("max deviation from Bayes rule {worst:e}"))?;
    Ok(format!("1000 cells, max deviation {worst:.1e}, order and 0.5 invariance exact"))
}

fn criterion_3() -> Outcome {
    // every 0/1 matrix up to n = 3, plus random binary ones up to n = 6
    for n in 1..=3usize {
        let cells: Vec<(usize, usize)> =
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).collect();
        for mask in 0u32..(1 << cells.len()) {
            let edges: Vec<EdgeProbability> = cells
                .iter()
                .enumerate()
                .filter(|(b, _)| mask & (1 << b) != 0)
                .map(|(_, &(i, j))| EdgeProbability::new(i, j, 1.0))
                .collect();
            let a = AdjacencyMatrix::from_edges(n, &edges).unwrap();
            check(a.max_entropy() == 0.0, || format!("H_max {} for binary matrix {:?}", a.max_entropy(), a.to_rows()))?;
        }
    }
    let mut rng = seeded_rng(3, 0);
    for _ in 0..200 {
        let n = rng.random_range(4..=6);
        let rows: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| if i != j && rng.random_bool(0.4) { 1.0 } else { 0.0 }).collect()).collect();
        let a = AdjacencyMatrix::from_rows(&rows).unwrap();
        check(a.max_entropy() == 0.0, || format!("H_max {} for {rows:?}", a.max_entropy()))?;
    }

    let half = AdjacencyMatrix::uniform(2, 0.5).unwrap();
    let h = half.max_entropy();
    check((h - LN_2).abs() <= ENTROPY_TOL, || format!("H_max(n=2, p=0.5) = {h}, expected ln 2"))?;
    check((binary_entropy(0.5) - LN_2).abs() <= ENTROPY_TOL, || "binary entropy at 0.5".into())?;

    let params = PolicyParams { h_th: H_TH, ..Default::default() };
    let views = viewpoint_ring(8);
    let mut visited = vec![false; 8];
    visited[0] = true;
    let ids = [0, 1];
    let q = [0.9, 0.8];
    let uncertain =
        entropy_gated_step(&Belief { ids: &ids, adjacency: &half, grasp_quality: &q }, &views, &visited, true, &params)
            .map_err(|e| e.to_string())?;
    check(matches!(uncertain.action, PolicyAction::View(_)), || format!("p = 0.5 pair gave {:?}", uncertain.action))?;
    let certain_adj = AdjacencyMatrix::from_edges(2, &[EdgeProbability::new(0, 1, 1.0)]).unwrap();
    let certain = entropy_gated_step(
        &Belief { ids: &ids, adjacency: &certain_adj, grasp_quality: &q },
        &views,
        &visited,
        true,
        &params,
    )
    .map_err(|e| e.to_string())?;
    check(certain.action == PolicyAction::Grasp(0), || format!("certain pair gave {:?}", certain.action))?;
    Ok(format!(
        "binary family H_max = 0, H_max(0.5 pair) = ln 2 (|err| {:.1e}), threshold {H_TH} views vs grasps",
        (h - LN_2).abs()
    ))
}

fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], col: usize, used: &mut [bool]) -> f64 {
        if col == cost[0].len() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for r in 0..cost.len() {
            if !used[r] {
                used[r] = true;
                best = best.min(cost[r][col] + go(cost, col + 1, used));
                used[r] = false;
            }
        }
        best
    }
    go(cost, 0, &mut vec![false; cost.len()])
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(4, 0);
    for case in 0..500 {
        let m = rng.random_range(1..=7);
        let q = rng.random_range(m..=7);
        // integer costs keep every sum exact
        let cost: Vec<Vec<f64>> =
            (0..q).map(|_| (0..m).map(|_| f64::from(rng.random_range(0u32..100))).collect()).collect();
        let got = hungarian(&cost).map_err(|e| e.to_string())?.total_cost(&cost);
        let best = brute_force_assignment(&cost);
        check(got == best, || format!("case {case} ({q}x{m}): {got} vs optimum {best}"))?;
    }
    within(start.elapsed(), BUDGET_HUNGARIAN)?;
    Ok(format!("500 matrices up to 7x7 optimal, {:?}", start.elapsed()))
}

fn criterion_5() -> Outcome {
    let a = BBox::new(0.3, 0.4, 0.2, 0.1).unwrap();
    check((giou(&a, &a) - 1.0).abs() <= GIOU_TOL, || format!("identical boxes: {}", giou(&a, &a)))?;
    let left = BBox::new(0.25, 0.5, 0.5, 1.0).unwrap();
    let mid = BBox::new(0.5, 0.5, 0.5, 1.0).unwrap();
    let g = giou(&left, &mid);
    check((g - 1.0 / 3.0).abs() <= GIOU_TOL, || format!("half-overlap pair: {g}"))?;
    let tiny = BBox::new(0.0, 0.0, 0.01, 0.01).unwrap();
    let far = tiny.translated(0.1, 0.1);
    let gf = giou(&tiny, &far);
    check(gf < -0.9, || format!("far pair: {gf}"))?;
    Ok(format!("identical 1, half-overlap {g:.15}, far {gf:.4}"))
}

fn criterion_6() -> Outcome {
    let close =
        |got: f64, want: f64, what: &str| check((got - want).abs() <= LOSS_TOL, || format!("{what}: {got} vs {want}"));
    let ce = |p: &[Vec<f64>], t: &[usize], w: f64| classification_loss(p, t, w).map_err(|e| e.to_string());
    close(ce(&[vec![1.0, 0.0]], &[0], 0.1)?, 0.0, "CE perfect")?;
    close(ce(&[vec![0.5, 0.3, 0.2]], &[0], 1.0)?, LN_2, "CE half")?;
    close(ce(&[vec![0.3, 0.2, 0.5], vec![0.4, 0.1, 0.5]], &[2, 2], 0.1)?, 0.2 * LN_2, "CE unknown")?;

    let b = BBox::new(0.5, 0.5, 0.2, 0.2).unwrap();
    let shifted = BBox::new(0.6, 0.6, 0.3, 0.3).unwrap();
    let bl = |p: &[BBox], g: &[BBox]| box_losses(p, g).map_err(|e| e.to_string());
    let same = bl(&[b], &[b])?;
    close(same.l1, 0.0, "L1 identical")?;
    close(same.giou, 0.0, "GIoU identical")?;
    close(bl(&[shifted], &[b])?.l1, 0.4, "L1 offset")?;
    let left = BBox::new(0.25, 0.5, 0.5, 1.0).unwrap();
    let mid = BBox::new(0.5, 0.5, 0.5, 1.0).unwrap();
    close(bl(&[left], &[mid])?.giou, 2.0 / 3.0, "GIoU loss")?;
    let empty = bl(&[], &[])?;
    close(empty.l1 + empty.giou, 0.0, "empty matching")?;

    let target = AdjacencyMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
    let al = |m: &AdjacencyMatrix| adjacency_loss(m, &target).map_err(|e| e.to_string());
    check(al(&target)? <= 4.0 * 1e-12, || "exact adjacency".into())?;
    close(al(&AdjacencyMatrix::uniform(2, 0.5).unwrap())?, 2.0 * LN_2, "adjacency at 0.5")?;
    close(
        adjacency_loss(&AdjacencyMatrix::zeros(1), &AdjacencyMatrix::zeros(1)).map_err(|e| e.to_string())?,
        0.0,
        "1x1 adjacency",
    )?;

    let w = LossWeights::default();
    close(total_loss(&LossComponents::default(), &w), 0.0, "total zero")?;
    let ones = LossComponents { class: 1.0, l1: 1.0, giou: 1.0, adj: 1.0 };
    close(total_loss(&ones, &LossWeights { class: 1.0, l1: 5.0, giou: 2.0, adj: 1.0, ..w }), 9.0, "total weighted")?;
    let no_adj = LossWeights { adj: 0.0, ..w };
    let base = total_loss(&LossComponents { adj: 0.0, ..ones }, &no_adj);
    for adj in [0.0, 1.0, 1e6, f64::INFINITY, f64::NAN] {
        let t = total_loss(&LossComponents { adj, ..ones }, &no_adj);
        check(t == base, || format!("adjacency {adj} leaked into total with zero weight: {t}"))?;
    }
    Ok("CE, L1/GIoU, adjacency BCE and weighted total match; zero adjacency weight is inert".into())
}

fn row_boxes(n: usize) -> Vec<BBox> {
    (0..n).map(|i| BBox::new((i as f64 + 0.5) / n as f64, 0.5, 0.8 / n as f64, 0.4).unwrap()).collect()
}

fn criterion_7() -> Outcome {
    let gt = GroundTruth::new(
        row_boxes(3),
        vec![0, 0, 0],
        AdjacencyMatrix::from_edges(3, &[EdgeProbability::new(0, 1, 1.0), EdgeProbability::new(1, 2, 1.0)]).unwrap(),
    )
    .map_err(|e| e.to_string())?;
    let reversed = DetectionSet::new(
        row_boxes(3),
        vec![0, 0, 0],
        AdjacencyMatrix::from_rows(&[vec![0.0, 0.9, 0.1], vec![0.1, 0.0, 0.2], vec![0.1, 0.8, 0.0]]).unwrap(),
    )
    .map_err(|e| e.to_string())?;
    let r = relationship_metrics(&[reversed], std::slice::from_ref(&gt), &MetricsConfig::default())
        .map_err(|e| e.to_string())?;
    check((r.op, r.or_, r.ia) == (50.0, 50.0, 0.0), || {
        format!("reversed-edge fixture: OP {} OR {} IA {}", r.op, r.or_, r.ia)
    })?;

    // a mixed dataset: scenes scored against independently drawn guesses
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    for seed in 0..300u64 {
        let n = 1 + (seed % 7) as usize;
        let truth = SceneGraph::generate(seed, n, 0.6).true_adjacency();
        let guess =
            if seed % 3 == 0 { truth.clone() } else { SceneGraph::generate(seed + 7919, n, 0.6).true_adjacency() };
        preds.push(DetectionSet::new(row_boxes(n), vec![0; n], guess).unwrap());
        gts.push(GroundTruth::new(row_boxes(n), vec![0; n], truth).unwrap());
    }
    let r = relationship_metrics(&preds, &gts, &MetricsConfig::default()).map_err(|e| e.to_string())?;
    let total = r.counts.images.total as f64;
    let recombined: f64 = r.ia_by_count.iter().map(|(k, ia)| ia * r.counts.by_count[k].total as f64 / total).sum();
    check((recombined - r.ia).abs() <= IA_RECOMBINE_TOL, || format!("IA {} vs recombined {recombined}", r.ia))?;

    let own: Vec<DetectionSet> = gts
        .iter()
        .map(|g| DetectionSet::new(g.boxes().to_vec(), g.classes().to_vec(), g.adjacency().clone()).unwrap())
        .collect();
    let s = relationship_metrics(&own, &gts, &MetricsConfig::default()).map_err(|e| e.to_string())?;
    check((s.op, s.or_, s.ia) == (100.0, 100.0, 100.0), || format!("self-evaluation {} {} {}", s.op, s.or_, s.ia))?;
    Ok(format!("fixture OP 50 OR 50 IA 0; IA-x recombines to {:.4} (IA {:.4}); self-evaluation 100", recombined, r.ia))
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let config = SimConfig {
        policy: PolicyParams { h_th: H_TH, ..Default::default() },
        seeds: (0..200).collect(),
        ..Default::default()
    };
    let result = run_ensemble(&config, &config.seeds, Execution::Parallel).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut summary = Vec::new();
    for s in &config.scenarios {
        let base = result.table.row(&s.name, PolicyKind::QualityOnly).unwrap();
        let gated = result.table.row(&s.name, PolicyKind::EntropyGated).unwrap();
        check(base.episodes >= 200 && gated.episodes >= 200, || format!("{}: too few episodes", s.name))?;
        let se = (base.ooe_pct_stderr.powi(2) + gated.ooe_pct_stderr.powi(2)).sqrt();
        let margin = base.ooe_pct - gated.ooe_pct;
        check(margin > OOE_MARGIN_SE * se, || {
            format!(
                "{}: OOE {:.2} vs baseline {:.2}, margin {margin:.2} <= {OOE_MARGIN_SE} SE ({se:.2})",
                s.name, gated.ooe_pct, base.ooe_pct
            )
        })?;
        check(gated.action_eff_pct <= base.action_eff_pct, || {
            format!(
                "{}: action efficiency {:.2} above baseline {:.2}",
                s.name, gated.action_eff_pct, base.action_eff_pct
            )
        })?;
        check(gated.views_added > 0.0, || format!("{}: no views added", s.name))?;
        summary.push(format!(
            "{} OOE {:.1}% vs {:.1}% ({:.1} SE), eff {:.1}% vs {:.1}%",
            s.name,
            gated.ooe_pct,
            base.ooe_pct,
            margin / se,
            gated.action_eff_pct,
            base.action_eff_pct
        ));
    }
    within(elapsed, BUDGET_DOMINANCE)?;
    Ok(format!("{}; {elapsed:?}", summary.join("; ")))
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let config = EpisodeConfig {
        observation: ObservationModel::noiseless(),
        grasp: GraspModel::default(),
        policy: PolicyParams { h_th: H_TH, ..Default::default() },
        viewpoints: viewpoint_ring(8),
        failure_limit: 10,
    };
    let (mut errors, mut views, mut grasps) = (0, 0, 0);
    for seed in 0..100u64 {
        let n = 1 + (seed % 8) as usize;
        let scene = SceneGraph::generate(seed, n, 0.8);
        let r = run_episode(&scene, PolicyKind::EntropyGated, &config, &mut seeded_rng(seed, 1));
        errors += r.order_errors;
        views += r.views_added;
        grasps += r.grasp_attempts;
    }
    within(start.elapsed(), BUDGET_ZERO_NOISE)?;
    check(errors == 0 && views == 0, || format!("{errors} order errors, {views} views"))?;
    Ok(format!("100 scenes, {grasps} grasps, 0 order errors, 0 views, {:?}", start.elapsed()))
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"seeds": [3, 1, 4, 1, 5], "scenarios": [{"name": "mixed", "n_objects": 7, "density": 0.6}]}"#,
    )
    .map_err(|e| e.to_string())?;
    let run = |sub: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(sub);
        let status = Command::new(env!("CARGO_BIN_EXE_stackgraph"))
            .args(["simulate", "--config"])
            .arg(&config)
            .args(["--seeds", "0..40", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        check(status.status.success(), || String::from_utf8_lossy(&status.stderr).into_owned())?;
        std::fs::read(out.join("benchmark.csv")).map_err(|e| e.to_string())
    };
    let first = run("a")?;
    let second = run("b")?;
    check(!first.is_empty() && first == second, || "CSV output differs between runs".into())?;
    Ok(format!("two runs, {} identical bytes", first.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("safe-grasp oracle equivalence", criterion_1),
        ("fusion correctness", criterion_2),
        ("entropy values and gate", criterion_3),
        ("hungarian optimality", criterion_4),
        ("giou reference values", criterion_5),
        ("loss evaluators", criterion_6),
        ("relationship metrics", criterion_7),
        ("simulator dominance", criterion_8),
        ("zero-noise soundness", criterion_9),
        ("simulate determinism", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
