use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;
use weighted_ase::represent::{pvalue_cell, EdgeTransform};
use weighted_ase_cli::commands::{self, sweep_rows, Context};
use weighted_ase_cli::config::{ExperimentConfig, Task};
use weighted_ase_cli::io::load_edge_list;

const GAUSSIAN: &str = r#"{
  "model": {"K": 2, "pi": [0.5, 0.5], "H": [
    [{"kind": "gaussian", "mean": 1.0, "variance": 1.0}, {"kind": "gaussian", "mean": 1.0, "variance": 2.0}],
    [{"kind": "gaussian", "mean": 1.0, "variance": 2.0}, {"kind": "gaussian", "mean": 1.0, "variance": 8.0}]]},
  "n": 1000, "seed": 11
}"#;

const POISSON: &str = r#"{
  "model": {"K": 2, "pi": [0.5, 0.5], "H": [
    [{"kind": "poisson", "rate": 0.5}, {"kind": "poisson", "rate": 0.6}],
    [{"kind": "poisson", "rate": 0.6}, {"kind": "poisson", "rate": 0.5}]]},
  "n": 1000, "seed": 5
}"#;

const PVALUE: &str = r#"{
  "model": {"K": 2, "pi": [0.2, 0.8], "H": [
    [{"kind": "zero_inflated", "present_prob": 0.25, "inner": {"kind": "beta", "shape_a": 1.0, "shape_b": 0.5}},
     {"kind": "zero_inflated", "present_prob": 0.25, "inner": {"kind": "beta", "shape_a": 1.0, "shape_b": 1.0}}],
    [{"kind": "zero_inflated", "present_prob": 0.25, "inner": {"kind": "beta", "shape_a": 1.0, "shape_b": 1.0}},
     {"kind": "zero_inflated", "present_prob": 0.25, "inner": {"kind": "beta", "shape_a": 1.0, "shape_b": 1.0}}]]},
  "n": 800, "seed": 2
}"#;

fn with(base: &str, patch: &str) -> ExperimentConfig {
    let mut v: Value = serde_json::from_str(base).unwrap();
    let p: Value = serde_json::from_str(patch).unwrap();
    for (k, x) in p.as_object().unwrap() {
        v[k] = x.clone();
    }
    ExperimentConfig::from_json(&v.to_string()).unwrap()
}

fn ctx(cfg: ExperimentConfig, dir: &Path) -> Context {
    let seed = cfg.seed;
    Context::new(cfg, dir.to_path_buf(), seed).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_stores_every_upper_pair() {
    let dir = tempfile::tempdir().unwrap();
    let report = commands::simulate(&ctx(with(GAUSSIAN, "{}"), dir.path())).unwrap();
    assert_eq!(report["rows"], 499_500);
    let edges = fs::read_to_string(dir.path().join("edges.csv")).unwrap();
    let mut lines = edges.lines();
    assert_eq!(lines.next(), Some("src,dst,weight"));
    assert_eq!(lines.count(), 499_500);
    let labels = fs::read_to_string(dir.path().join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 1001);
    let prov = read_json(&dir.path().join("provenance.json"));
    assert_eq!(prov["seed"], 11);
    assert_eq!(prov["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let cfg = with(GAUSSIAN, r#"{"n": 150}"#);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    commands::simulate(&ctx(cfg.clone(), a.path())).unwrap();
    commands::simulate(&ctx(cfg, b.path())).unwrap();
    for f in ["edges.csv", "labels.csv", "provenance.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let c = tempfile::tempdir().unwrap();
    commands::simulate(&ctx(with(GAUSSIAN, r#"{"n": 150, "seed": 12}"#), c.path())).unwrap();
    assert_ne!(
        fs::read(a.path().join("edges.csv")).unwrap(),
        fs::read(c.path().join("edges.csv")).unwrap()
    );
}

#[test]
fn zero_inflated_density_matches_rho() {
    let dir = tempfile::tempdir().unwrap();
    let report = commands::simulate(&ctx(with(PVALUE, "{}"), dir.path())).unwrap();
    let rows = report["rows"].as_f64().unwrap();
    let frac = report["nonzero"].as_f64().unwrap() / rows;
    let se = (0.25_f64 * 0.75 / rows).sqrt();
    assert!((frac - 0.25).abs() < 3.0 * se, "fraction {frac}");
}

#[test]
fn loading_a_simulated_edge_list_recovers_the_graph() {
    let cfg = with(POISSON, r#"{"n": 120}"#);
    let dir = tempfile::tempdir().unwrap();
    commands::simulate(&ctx(cfg.clone(), dir.path())).unwrap();
    let loaded = load_edge_list(&dir.path().join("edges.csv"), Some(120)).unwrap();
    let original = cfg.model.unwrap().sample(120, cfg.seed).unwrap();
    assert_eq!(loaded.graphs[0].adjacency(), original.adjacency());
    assert_eq!(loaded.duplicates, 0);
}

#[test]
fn poisson_sweep_rows() {
    let cfg = ExperimentConfig::from_json(
        r#"{"sweep": {"kind": "poisson",
            "lambda1": {"min": 0.05, "max": 1.5, "steps": 30},
            "lambda2": {"min": 0.5, "max": 0.6, "steps": 2}}}"#,
    )
    .unwrap();
    let (header, rows) = sweep_rows(cfg.sweep.as_ref().unwrap());
    assert_eq!(rows.len(), 60);
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let f = |r: &Vec<String>, name: &str| r[col(name)].parse::<f64>().unwrap();
    let target = rows
        .iter()
        .find(|r| (f(r, "lambda1") - 0.5).abs() < 1e-12 && (f(r, "lambda2") - 0.6).abs() < 1e-12)
        .unwrap();
    assert!((f(target, "ratio") - 1.33).abs() < 0.02);
    assert_eq!(target[col("preferred")], "poisson");
    let diagonal = rows
        .iter()
        .find(|r| (f(r, "lambda1") - 0.5).abs() < 1e-12 && r[1] == "0.5")
        .unwrap();
    assert_eq!(f(diagonal, "c_poisson"), 0.0);
    assert_eq!(f(diagonal, "c_presence"), 0.0);
    assert_eq!(diagonal[col("ratio")], "NaN");
    assert!(!diagonal[col("reason")].is_empty());
    assert_eq!(sweep_rows(cfg.sweep.as_ref().unwrap()).1, rows);
}

#[test]
fn pvalue_sweep_prefers_threshold_over_raw() {
    let cfg = ExperimentConfig::from_json(
        r#"{"sweep": {"kind": "p_value",
            "alpha": {"min": 0.5, "max": 0.5, "steps": 1},
            "rho": {"min": 0.25, "max": 0.25, "steps": 1},
            "tau": {"min": 0.05, "max": 0.05, "steps": 1}}}"#,
    )
    .unwrap();
    let (header, rows) = sweep_rows(cfg.sweep.as_ref().unwrap());
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let get = |name: &str| rows[0][col(name)].parse::<f64>().unwrap();
    assert!(get("c_threshold") > get("c_raw"));
    assert!((get("c_raw") - 5.07e-4).abs() / 5.07e-4 < 0.01);
    let direct = pvalue_cell(0.5, 0.25, 0.2, &[0.05]).unwrap();
    assert_eq!(get("c_threshold"), direct.c_t);
}

#[test]
fn gaussian_pipeline_reports_limit_variances() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with(GAUSSIAN, r#"{"tasks": ["embed", "align", "clt_check", "chernoff"]}"#);
    let outcomes = commands::pipeline(&ctx(cfg, dir.path())).unwrap();
    assert!(outcomes.iter().all(|o| o.ok));
    let clt = read_json(&dir.path().join("clt_check.json"));
    for (c, want) in clt["communities"].as_array().unwrap().iter().zip([1.5, 5.0]) {
        let var = c["covariance"][0][0].as_f64().unwrap();
        assert!((var - want).abs() < 0.2 * want, "variance {var} vs {want}");
    }
    let chernoff = read_json(&dir.path().join("chernoff.json"));
    assert_eq!(chernoff["c"], 0.0);
}

#[test]
fn poisson_pipeline_clusters_better_than_chance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with(
        POISSON,
        r#"{"tasks": ["cluster"], "cluster": {"k": 2, "write_responsibilities": true}}"#,
    );
    commands::pipeline(&ctx(cfg, dir.path())).unwrap();
    let report = read_json(&dir.path().join("cluster.json"));
    assert!(report["ari"].as_f64().unwrap() > 0.0);
    assert_eq!(report["loglik_monotone"], true);
    let resp = fs::read_to_string(dir.path().join("responsibilities.csv")).unwrap();
    assert_eq!(resp.lines().count(), 1001);
}

#[test]
fn transforms_feed_the_embedding() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with(
        PVALUE,
        r#"{"transforms": [{"kind": "p_value_threshold", "tau": 0.05}], "embed": {"method": "manual", "d": 2}}"#,
    );
    assert_eq!(cfg.transforms, vec![EdgeTransform::PValueThreshold { tau: 0.05 }]);
    let report = commands::single(Task::Embed, &ctx(cfg, dir.path())).unwrap();
    assert_eq!(report["d"], 2);
    let eig = read_json(&dir.path().join("eigenvalues.json"));
    assert_eq!(eig["values"].as_array().unwrap().len(), 2);
    let header = fs::read_to_string(dir.path().join("embedding.csv")).unwrap();
    assert!(header.starts_with("node,dim_1,dim_2,label"));
}

fn run_binary(config: &str, args: &[&str]) -> (i32, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    fs::write(&path, config).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_weighted-ase"))
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(args)
        .output()
        .unwrap()
        .status;
    (status.code().unwrap(), dir)
}

#[test]
fn empty_pipeline_exits_cleanly() {
    let (code, dir) = run_binary("{}", &["pipeline"]);
    assert_eq!(code, 0);
    assert_eq!(read_json(&dir.path().join("out/report.json")), serde_json::json!([]));
}

#[test]
fn exit_codes_separate_config_errors_from_task_failures() {
    assert_eq!(run_binary(r#"{"unknown_section": 1}"#, &["pipeline"]).0, 2);
    assert_eq!(run_binary(r#"{"tasks": ["align"]}"#, &["pipeline"]).0, 2);
    let failing = r#"{"model": {"K": 1, "pi": [1.0], "H": [[{"kind": "poisson", "rate": 1.0}]]},
        "n": 20, "embed": {"method": "manual", "d": 3}, "cluster": {"k": 10}, "tasks": ["cluster"]}"#;
    let (code, dir) = run_binary(failing, &["pipeline"]);
    assert_eq!(code, 1);
    let report = read_json(&dir.path().join("out/report.json"));
    assert_eq!(report[0]["ok"], false);
}

#[test]
fn seed_flag_overrides_config() {
    let cfg = r#"{"model": {"K": 1, "pi": [1.0], "H": [[{"kind": "bernoulli", "p": 0.5}]]}, "n": 30, "seed": 1}"#;
    let (code, dir) = run_binary(cfg, &["--seed", "99", "simulate"]);
    assert_eq!(code, 0);
    assert_eq!(read_json(&dir.path().join("out/provenance.json"))["seed"], 99);
}

mod round_trip {
    use proptest::prelude::*;
    use weighted_ase::model::WeightedGraph;
    use weighted_ase_cli::io::{fmt_f64, load_edge_list, write_edge_list};

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn floats_print_to_their_shortest_exact_form(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }

        #[test]
        fn edge_lists_round_trip(weights in prop::collection::vec(-1e6f64..1e6, 28)) {
            let mut a = nalgebra::DMatrix::zeros(8, 8);
            let mut it = weights.iter();
            for i in 0..8 {
                for j in (i + 1)..8 {
                    let w = *it.next().unwrap();
                    a[(i, j)] = w;
                    a[(j, i)] = w;
                }
            }
            let g = WeightedGraph::new(a).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("edges.csv");
            write_edge_list(&path, &g, None).unwrap();
            let back = load_edge_list(&path, Some(8)).unwrap();
            prop_assert_eq!(back.graphs[0].adjacency(), g.adjacency());
        }
    }
}
