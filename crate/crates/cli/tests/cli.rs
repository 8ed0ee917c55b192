use std::fs;
use std::path::Path;

use serde_json::{json, Value};
use stackgraph::io::parse_adjacency;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["stackgraph"];
    argv.extend_from_slice(args);
    let code = stackgraph_cli::run(argv, &mut out, &mut err);
    Run { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn write_json(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn inspect_two_objects() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_json(dir.path(), "a.json", &json!({"n": 2, "edges": [{"i": 0, "j": 1, "p": 0.8}]}));
    let r = run(&["inspect", &f]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("safe-grasp: [1.000000, 0.200000]"));
    assert!(r.stdout.contains("H_max: 0.500402"));
    assert!(r.stdout.contains("safest: 0"));
}

#[test]
fn inspect_zero_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_json(dir.path(), "z.json", &json!({"matrix": [[0, 0, 0], [0, 0, 0], [0, 0, 0]]}));
    let r = run(&["inspect", &f]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("safe-grasp: [1.000000, 1.000000, 1.000000]"));
    assert!(r.stdout.contains("H_max: 0.000000"));
}

#[test]
fn inspect_moment_and_order_of_chain() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_json(dir.path(), "c.json", &json!({"matrix": [[0, 1, 0], [0, 0, 1], [0, 0, 0]]}));
    let r = run(&["inspect", &f, "--moment", "2", "--order-threshold", "0.5"]);
    assert_eq!(r.code, 0);
    let moment: Vec<&str> = r.stdout.lines().filter(|l| l.trim_start().starts_with('(')).map(str::trim).collect();
    assert_eq!(moment, vec!["(0,2)=1"]);
    assert!(r.stdout.contains("layer 0: 0\n  layer 1: 1\n  layer 2: 2"));
}

#[test]
fn inspect_reports_cycle_with_domain_exit() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_json(dir.path(), "cyc.json", &json!({"matrix": [[0, 0.9, 0], [0, 0, 0.9], [0.9, 0, 0]]}));
    let r = run(&["inspect", &f, "--order-threshold", "0.5"]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("0 -> 1 -> 2 -> 0"), "{}", r.stderr);
}

#[test]
fn malformed_file_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\n  \"matrix\": [[0, 1],\n  [0 0]]\n}").unwrap();
    let r = run(&["inspect", path.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line 3"), "{}", r.stderr);
}

#[test]
fn schema_violations_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    for (name, doc) in [
        ("extra.json", json!({"matrix": [[0]], "colour": 1})),
        ("diag.json", json!({"matrix": [[0.5, 0], [0, 0]]})),
        ("range.json", json!({"n": 2, "edges": [{"i": 0, "j": 1, "p": 1.5}]})),
        ("ragged.json", json!({"matrix": [[0, 1], [0]]})),
    ] {
        let f = write_json(dir.path(), name, &doc);
        assert_eq!(run(&["inspect", &f]).code, 2, "{name}");
    }
    assert_eq!(run(&["inspect", "/nonexistent/a.json"]).code, 2);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&[]).code, 1);
    assert_eq!(run(&["frobnicate"]).code, 1);
    assert_eq!(run(&["inspect"]).code, 1);
    assert_eq!(run(&["fuse"]).code, 1);
    assert_eq!(run(&["inspect", "x.json", "--moment", "two"]).code, 1);
    let help = run(&["--help"]);
    assert_eq!(help.code, 0);
    assert!(help.stdout.contains("simulate"));
}

#[test]
fn moment_zero_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_json(dir.path(), "a.json", &json!({"matrix": [[0, 1], [0, 0]]}));
    assert_eq!(run(&["inspect", &f, "--moment", "0"]).code, 1);
}

#[test]
fn fuse_with_itself() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_json(dir.path(), "a.json", &json!({"n": 2, "edges": [{"i": 0, "j": 1, "p": 0.8}]}));
    let out = dir.path().join("post.json");
    let r = run(&["fuse", &f, &f, "-o", out.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("H_max after: 0.223718"));
    let post = parse_adjacency(&fs::read_to_string(&out).unwrap(), "post").unwrap();
    assert!((post.get(0, 1) - 0.9411764705882353).abs() < 1e-12);
}

#[test]
fn fuse_single_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let rows = json!([[0, 0.123456789012345, 0.3], [0.7, 0, 1e-7], [0, 0.999999, 0]]);
    let f = write_json(dir.path(), "a.json", &json!({"matrix": rows}));
    let r = run(&["fuse", &f]);
    assert_eq!(r.code, 0);
    assert!(r.stderr.contains("H_max after"));
    let original = parse_adjacency(&fs::read_to_string(&f).unwrap(), "a").unwrap();
    let emitted = parse_adjacency(&r.stdout, "stdout").unwrap();
    assert!(original.as_matrix().max_abs_diff(emitted.as_matrix()) <= 1e-9);
    assert_eq!(original, emitted);
}

#[test]
fn fuse_conflict_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let zero = write_json(dir.path(), "z.json", &json!({"matrix": [[0, 0], [0, 0]]}));
    let one = write_json(dir.path(), "o.json", &json!({"matrix": [[0, 1], [0, 0]]}));
    let three = write_json(dir.path(), "t.json", &json!({"n": 3, "edges": []}));
    let r = run(&["fuse", &zero, &one]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("(0, 1)"), "{}", r.stderr);
    assert_eq!(run(&["fuse", &zero, &three]).code, 2);
}

/// Three side-by-side boxes on a 300x100 image.
fn boxes() -> Value {
    json!([[0, 0, 90, 100], [100, 0, 190, 100], [200, 0, 290, 100]])
}

fn gt_doc(classes: Value) -> Value {
    let objects: Vec<Value> = boxes()
        .as_array()
        .unwrap()
        .iter()
        .zip(classes.as_array().unwrap())
        .map(|(b, c)| json!({"class": c, "box": b}))
        .collect();
    json!({"objects": objects, "edges": [[0, 1], [1, 2]]})
}

fn pred_doc(adjacency: Value, class_probs: Value) -> Value {
    json!({"boxes": boxes(), "class_probs": class_probs, "adjacency": adjacency, "image": {"w": 300, "h": 100}})
}

fn confident() -> Value {
    json!([[0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.9, 0.05, 0.05]])
}

fn eval_dirs(preds: &[(&str, Value)], gts: &[(&str, Value)]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("pred")).unwrap();
    fs::create_dir(dir.path().join("gt")).unwrap();
    for (name, v) in preds {
        write_json(&dir.path().join("pred"), name, v);
    }
    for (name, v) in gts {
        write_json(&dir.path().join("gt"), name, v);
    }
    dir
}

fn eval(dir: &Path, extra: &[&str]) -> (Run, Value) {
    let json_out = dir.join("report.json");
    let mut args = vec![
        "eval",
        "--pred",
        dir.join("pred").to_str().unwrap().to_owned().leak(),
        "--gt",
        dir.join("gt").to_str().unwrap().to_owned().leak(),
        "--json",
        json_out.to_str().unwrap().to_owned().leak(),
    ];
    args.extend_from_slice(extra);
    let r = run(&args);
    let report = fs::read_to_string(&json_out).map(|t| serde_json::from_str(&t).unwrap()).unwrap_or(Value::Null);
    (r, report)
}

#[test]
fn eval_self_is_perfect() {
    let truth = json!([[0, 1, 0], [0, 0, 1], [0, 0, 0]]);
    let dir = eval_dirs(&[("img1.json", pred_doc(truth, confident()))], &[("img1.json", gt_doc(json!([0, 1, 0])))]);
    let (r, report) = eval(dir.path(), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(
        (report["op"].as_f64(), report["or"].as_f64(), report["ia"].as_f64()),
        (Some(100.0), Some(100.0), Some(100.0))
    );
    assert!(r.stdout.contains("OP        100.00"), "{}", r.stdout);
}

#[test]
fn eval_reversed_edge() {
    let adjacency = json!([[0, 0.9, 0.1], [0.1, 0, 0.2], [0.1, 0.8, 0]]);
    let dir = eval_dirs(&[("a.json", pred_doc(adjacency, confident()))], &[("a.json", gt_doc(json!([0, 1, 0])))]);
    let (r, report) = eval(dir.path(), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(report["op"], json!(50.0));
    assert_eq!(report["or"], json!(50.0));
    assert_eq!(report["ia"], json!(0.0));
    assert_eq!(report["ia_by_count"]["3"], json!(0.0));
    assert_eq!(report["counts"]["fn"], json!(1));
}

#[test]
fn eval_class_names_and_binary_mode() {
    let truth = json!([[0, 1, 0], [0, 0, 1], [0, 0, 0]]);
    // wrong class on the middle object
    let probs = json!([[0.9, 0.05, 0.05], [0.9, 0.05, 0.05], [0.9, 0.05, 0.05]]);
    let dir = eval_dirs(&[("a.json", pred_doc(truth, probs))], &[("a.json", gt_doc(json!(["cup", "box", "cup"])))]);
    assert_eq!(eval(dir.path(), &[]).0.code, 2);
    let (r, labelled) = eval(dir.path(), &["--class-names", "cup,box"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(labelled["op"], json!(0.0));
    let (_, binary) = eval(dir.path(), &["--binary"]);
    assert_eq!((binary["op"].clone(), binary["ia"].clone()), (json!(100.0), json!(100.0)));
}

#[test]
fn eval_missing_counterpart() {
    let truth = json!([[0, 1, 0], [0, 0, 1], [0, 0, 0]]);
    let dir = eval_dirs(&[("a.json", pred_doc(truth, confident()))], &[("b.json", gt_doc(json!([0, 1, 0])))]);
    let (r, _) = eval(dir.path(), &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("a.json") || r.stderr.contains("b.json"));
}

#[test]
fn eval_unknown_proposals_are_dropped() {
    let truth = json!([[0, 1, 0, 0.9], [0, 0, 1, 0], [0, 0, 0, 0], [0, 0, 0, 0]]);
    let mut doc = pred_doc(truth, json!([[0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.9, 0.05, 0.05], [0.1, 0.1, 0.8]]));
    doc["boxes"].as_array_mut().unwrap().push(json!([0, 0, 300, 100]));
    let dir = eval_dirs(&[("a.json", doc)], &[("a.json", gt_doc(json!([0, 1, 0])))]);
    let (r, report) = eval(dir.path(), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(report["ia"], json!(100.0));
}

#[test]
fn simulate_writes_table_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let r = run(&["simulate", "--seeds", "0..6", "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = fs::read_to_string(out.join("benchmark.csv")).unwrap();
    assert_eq!(csv, r.stdout);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("ordered,quality_only,6,") && rows[1].starts_with("ordered,entropy_gated,6,"));
    let logs = fs::read_to_string(out.join("episodes.jsonl")).unwrap();
    assert_eq!(logs.lines().count(), 24);
    for line in logs.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["grasp_successes"].as_u64() <= v["grasp_attempts"].as_u64());
    }
}

#[test]
fn simulate_deterministic_world() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_json(
        dir.path(),
        "cfg.json",
        &json!({
            "observation": {"p_detect": 1.0, "exact_edges": true, "p_occlude": 0.0, "view_noise_scale": 0.0},
            "grasp": {"base_success": 1.0, "quality_influence": 0.0},
        }),
    );
    let out = dir.path().join("run");
    let r = run(&["simulate", "--config", &cfg, "--seeds", "0..=9", "--out", out.to_str().unwrap(), "--sequential"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    for line in r.stdout.lines().filter(|l| l.contains("entropy_gated")) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(&cols[5..9], &["0.0000", "100.0000", "100.0000", "0.0000"], "{line}");
    }
}

#[test]
fn simulate_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = write_json(dir.path(), "cfg.json", &json!({"colour": 1, "grasp": {"succes": 1}}));
    let r = run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("colour") && r.stderr.contains("grasp.succes"), "{}", r.stderr);
    assert_eq!(run(&["simulate", "--seeds", "5..2", "--out", out.to_str().unwrap()]).code, 1);
}
