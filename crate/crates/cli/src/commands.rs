use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use stackgraph::adjacency::fuse;
use stackgraph::detection::{DetectionSet, GroundTruth};
use stackgraph::io::{adjacency_to_json, parse_ground_truth, parse_prediction, read_adjacency, read_text};
use stackgraph::metrics::{relationship_metrics, MetricsConfig, MetricsReport};
use stackgraph::par::Execution;
use stackgraph::sim::{parse_seeds, run_ensemble, SimConfig};
use stackgraph::{AdjacencyError, AdjacencyMatrix};

use crate::{is_domain, CliError, Command};

type Out<'a> = &'a mut dyn Write;

fn write_failed(e: std::io::Error) -> CliError {
    CliError::Data(format!("write failed: {e}"))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn adjacency_error(context: &str, e: AdjacencyError) -> CliError {
    let message = format!("{context}: {e}");
    match e {
        _ if is_domain(&e) => CliError::Domain(message),
        AdjacencyError::DegreeOutOfRange { .. } => CliError::Usage(message),
        _ => CliError::Data(message),
    }
}

pub(crate) fn dispatch(command: Command, out: Out<'_>, err: Out<'_>) -> Result<(), CliError> {
    match command {
        Command::Inspect { file, moment, order_threshold } => inspect(&file, moment, order_threshold, out),
        Command::Fuse { files, output } => fuse_files(&files, output.as_deref(), out, err),
        Command::Eval { pred, gt, iou, binary, class_names, ignore_unmatched_edges, json } => {
            if !(0.0..=1.0).contains(&iou) {
                return Err(CliError::Usage(format!("--iou {iou} is outside [0, 1]")));
            }
            let config = MetricsConfig { iou_threshold: iou, binary, count_unmatched_edges: !ignore_unmatched_edges };
            eval(&pred, &gt, &config, class_names.as_deref(), json.as_deref(), out)
        }
        Command::Simulate { config, seeds, out: dir, sequential } => {
            let execution = if sequential { Execution::Sequential } else { Execution::Parallel };
            simulate(config.as_deref(), seeds.as_deref(), &dir, execution, out)
        }
    }
}

fn format_vector(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| format!("{v:.6}")).collect();
    format!("[{}]", items.join(", "))
}

fn inspect(file: &Path, moment: Option<usize>, order_threshold: Option<f64>, out: Out<'_>) -> Result<(), CliError> {
    let a = read_adjacency(file)?;
    let context = file.display().to_string();
    let safe = a.safe_grasp_probs();
    writeln!(out, "objects: {}", a.n()).map_err(write_failed)?;
    writeln!(out, "safe-grasp: {}", format_vector(safe.as_slice())).map_err(write_failed)?;
    writeln!(out, "H_max: {:.6}", safe.max_entropy()).map_err(write_failed)?;
    if let Some(k) = safe.safest() {
        writeln!(out, "safest: {k}").map_err(write_failed)?;
    }
    if let Some(degree) = moment {
        let m = a.moment(degree).map_err(|e| adjacency_error(&context, e))?;
        writeln!(out, "moment {degree}:").map_err(write_failed)?;
        for i in 0..m.dim() {
            for j in 0..m.dim() {
                let v = m.get(i, j);
                if v != 0.0 {
                    writeln!(out, "  ({i},{j})={v}").map_err(write_failed)?;
                }
            }
        }
    }
    if let Some(t) = order_threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(CliError::Usage(format!("--order-threshold {t} is outside [0, 1]")));
        }
        let layers = a.extract_order(t).map_err(|e| adjacency_error(&context, e))?;
        writeln!(out, "order (p > {t}):").map_err(write_failed)?;
        for (k, layer) in layers.iter().enumerate() {
            let ids: Vec<String> = layer.iter().map(usize::to_string).collect();
            writeln!(out, "  layer {k}: {}", ids.join(" ")).map_err(write_failed)?;
        }
    }
    Ok(())
}

fn fuse_files(files: &[PathBuf], output: Option<&Path>, out: Out<'_>, err: Out<'_>) -> Result<(), CliError> {
    let observations = files.iter().map(|f| read_adjacency(f)).collect::<Result<Vec<AdjacencyMatrix>, _>>()?;
    let posterior = fuse(&observations).map_err(|e| adjacency_error("fuse", e))?;
    let json = adjacency_to_json(&posterior);
    // the report shares stdout only when the posterior goes to a file
    let report: Out<'_> = match output {
        Some(path) => {
            write_file(path, &format!("{json}\n"))?;
            out
        }
        None => {
            writeln!(out, "{json}").map_err(write_failed)?;
            err
        }
    };
    for (file, a) in files.iter().zip(&observations) {
        writeln!(report, "H_max before: {:.6}  {}", a.max_entropy(), file.display()).map_err(write_failed)?;
    }
    writeln!(report, "H_max after: {:.6}", posterior.max_entropy()).map_err(write_failed)?;
    Ok(())
}

/// `*.json` files in `dir`, sorted by name.
fn json_files(dir: &Path) -> Result<Vec<String>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".json") && entry.path().is_file() {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

fn load_pairs(
    pred_dir: &Path,
    gt_dir: &Path,
    config: &MetricsConfig,
    class_names: Option<&[String]>,
) -> Result<(Vec<DetectionSet>, Vec<GroundTruth>), CliError> {
    let preds = json_files(pred_dir)?;
    let gts = json_files(gt_dir)?;
    if let Some(orphan) = gts.iter().find(|g| !preds.contains(g)) {
        return Err(CliError::Data(format!("{orphan}: ground truth has no prediction in {}", pred_dir.display())));
    }
    let mut detections = Vec::new();
    let mut truths = Vec::new();
    for name in &preds {
        if !gts.contains(name) {
            return Err(CliError::Data(format!("{name}: prediction has no ground truth in {}", gt_dir.display())));
        }
        let pred_path = pred_dir.join(name);
        let gt_path = gt_dir.join(name);
        let pred_ctx = pred_path.display().to_string();
        let gt_ctx = gt_path.display().to_string();
        let pred_file = parse_prediction(&read_text(&pred_path)?, &pred_ctx)?;
        let gt_file = parse_ground_truth(&read_text(&gt_path)?, &gt_ctx)?;
        detections.push(pred_file.to_prediction(&pred_ctx)?.to_detection_set());
        truths.push(gt_file.to_ground_truth(pred_file.image, class_names, config.binary, &gt_ctx)?);
    }
    Ok((detections, truths))
}

fn print_report(r: &MetricsReport, out: Out<'_>) -> std::io::Result<()> {
    writeln!(out, "images: {}", r.counts.images.total)?;
    writeln!(out, "relationships: tp {} fp {} fn {}", r.counts.tp, r.counts.fp, r.counts.fn_)?;
    writeln!(out, "{:<8}{:>8}", "OP", format!("{:.2}", r.op))?;
    writeln!(out, "{:<8}{:>8}", "OR", format!("{:.2}", r.or_))?;
    writeln!(out, "{:<8}{:>8}", "IA", format!("{:.2}", r.ia))?;
    writeln!(out, "{:<8}{:>8}{:>8}", "objects", "images", "IA-x")?;
    for (k, ia) in &r.ia_by_count {
        writeln!(out, "{:<8}{:>8}{:>8}", k, r.counts.by_count[k].total, format!("{ia:.2}"))?;
    }
    Ok(())
}

fn eval(
    pred_dir: &Path,
    gt_dir: &Path,
    config: &MetricsConfig,
    class_names: Option<&[String]>,
    json: Option<&Path>,
    out: Out<'_>,
) -> Result<(), CliError> {
    let (detections, truths) = load_pairs(pred_dir, gt_dir, config, class_names)?;
    if detections.is_empty() {
        return Err(CliError::Data(format!("no .json files in {}", pred_dir.display())));
    }
    let report = relationship_metrics(&detections, &truths, config).map_err(|e| CliError::Data(e.to_string()))?;
    print_report(&report, out).map_err(write_failed)?;
    if let Some(path) = json {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(path, &format!("{text}\n"))?;
    }
    Ok(())
}

fn simulate(
    config_path: Option<&Path>,
    seeds: Option<&str>,
    dir: &Path,
    execution: Execution,
    out: Out<'_>,
) -> Result<(), CliError> {
    let mut config = match config_path {
        Some(path) => {
            let text = read_text(path)?;
            SimConfig::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        }
        None => SimConfig::default(),
    };
    if let Some(spec) = seeds {
        config.seeds = parse_seeds(spec).map_err(|e| CliError::Usage(format!("--seeds: {e}")))?;
    }
    let result = run_ensemble(&config, &config.seeds, execution)?;
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let csv = result.table.to_csv();
    write_file(&dir.join("benchmark.csv"), &csv)?;
    write_file(&dir.join("episodes.jsonl"), &result.episodes_jsonl())?;
    write!(out, "{csv}").map_err(write_failed)?;
    Ok(())
}
