use std::path::{Path, PathBuf};

use log::info;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use weighted_ase::align::{oracle_align, two_to_infinity};
use weighted_ase::cluster::{ari, clt_check, fit_gmm, GmmOptions};
use weighted_ase::model::{LatentPositions, WeightedGraph};
use weighted_ase::predict::{evaluation_pairs, predict, spearman_bootstrap, two_day_counts, PredictMode, TwoDayConfig};
use weighted_ase::represent::{poisson_cell, pvalue_cell, transform_chain, transform_graph, EdgeTransform};
use weighted_ase::spectral::{
    eigenvalues_symmetric, embed_low_rank, select_dimension, spectral_embed, DimensionMethod, Embedding,
};
use weighted_ase::theory::{block_embedding, clt_params, size_adjusted_chernoff};

use crate::config::{ExperimentConfig, SweepConfig, Task};
use crate::error::{CliError, Result};
use crate::io::{
    ensure_dir, fmt_f64, load_edge_list, load_edge_lists, load_labels, write_edge_list, write_embedding, write_id_map,
    write_json, write_labels, write_matrix, write_rows, Provenance,
};

/// Everything a command needs: the config, where to write, and the
/// top-level seed.
pub struct Context {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub seed: u64,
}

impl Context {
    pub fn new(config: ExperimentConfig, out: PathBuf, seed: u64) -> Result<Context> {
        ensure_dir(&out)?;
        Ok(Context { config, out, seed })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn provenance(&self, command: &str) -> Result<()> {
        let mut cfg = self.config.clone();
        cfg.seed = self.seed;
        write_json(
            &self.path("provenance.json"),
            &Provenance::new(command, self.seed, &cfg),
        )
    }
}

/// The graph the analysis runs on, after transforms.
struct GraphData {
    graph: WeightedGraph,
    labels: Option<Vec<usize>>,
    /// Latent positions of the transformed model, when analytic
    latent: Option<LatentPositions>,
}

/// Lazily built shared state so pipeline tasks reuse one graph and one
/// embedding.
#[derive(Default)]
struct State {
    data: Option<GraphData>,
    embedding: Option<Embedding>,
}

impl State {
    fn data(&mut self, ctx: &Context) -> Result<&GraphData> {
        if self.data.is_none() {
            self.data = Some(build_graph(ctx)?);
        }
        Ok(self.data.as_ref().expect("just built"))
    }

    fn embedding(&mut self, ctx: &Context) -> Result<&Embedding> {
        if self.embedding.is_none() {
            let method = ctx.config.dimension_method()?;
            let emb = embed_with(self.data(ctx)?.graph.adjacency(), method)?;
            self.embedding = Some(emb);
        }
        Ok(self.embedding.as_ref().expect("just built"))
    }
}

fn build_graph(ctx: &Context) -> Result<GraphData> {
    let cfg = &ctx.config;
    if let Some(input) = &cfg.input {
        let loaded = load_edge_list(&input.edges, input.n)?;
        write_id_map(&ctx.path("node_ids.csv"), &loaded.ids)?;
        let raw = loaded.graphs.into_iter().next().expect("one file");
        let labels = match &input.labels {
            Some(p) => Some(load_labels(p, raw.n())?),
            None => None,
        };
        let graph = transform_chain(&raw, &cfg.transforms)?.graph;
        return Ok(GraphData {
            graph,
            labels,
            latent: None,
        });
    }
    let model = cfg.require_model()?;
    let raw = model.sample(cfg.require_n()?, ctx.seed)?;
    let labels = raw.labels.clone();
    let latent = match (cfg.effective_moments(), &labels) {
        (Ok(m), Some(z)) => block_embedding(&m.b).ok().map(|be| LatentPositions {
            x: DMatrix::from_fn(z.len(), be.dim(), |i, c| be.x[(z[i], c)]),
            p: be.p,
            q: be.q,
        }),
        _ => None,
    };
    let graph = transform_chain(&raw, &cfg.transforms)?.graph;
    Ok(GraphData { graph, labels, latent })
}

fn embed_with(a: &DMatrix<f64>, method: DimensionMethod) -> Result<Embedding> {
    let d = match method {
        DimensionMethod::Manual { d } => d,
        DimensionMethod::LargestGap { .. } => {
            let d = select_dimension(&eigenvalues_symmetric(a)?, method);
            info!("largest-gap rule selected d = {d}");
            d
        }
    };
    Ok(spectral_embed(a, d)?)
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn simulate(ctx: &Context) -> Result<Value> {
    let cfg = &ctx.config;
    let model = cfg.require_model()?;
    let n = cfg.require_n()?;
    let g = model.sample(n, ctx.seed)?;
    write_edge_list(&ctx.path("edges.csv"), &g, None)?;
    write_labels(
        &ctx.path("labels.csv"),
        g.labels.as_deref().expect("sampled graphs carry labels"),
    )?;
    ctx.provenance("simulate")?;
    let rows = n * (n - 1) / 2;
    let nonzero = g.upper_entries().filter(|e| e.2 != 0.0).count();
    Ok(json!({ "n": n, "rows": rows, "nonzero": nonzero }))
}

fn embed_task(ctx: &Context, state: &mut State) -> Result<Value> {
    let emb = state.embedding(ctx)?.clone();
    let data = state.data(ctx)?;
    write_embedding(&ctx.path("embedding.csv"), &emb.x, data.labels.as_deref())?;
    write_json(&ctx.path("eigenvalues.json"), &emb.eigenvalue_file())?;
    Ok(json!({ "d": emb.dim(), "p": emb.p, "q": emb.q, "eigenvalues": emb.eigenvalues }))
}

fn latent_of(data: &GraphData) -> Result<&LatentPositions> {
    data.latent.as_ref().ok_or_else(|| {
        CliError::Config("alignment needs a simulated graph whose transforms keep analytic moments".into())
    })
}

fn align_task(ctx: &Context, state: &mut State) -> Result<Value> {
    let data = state.data(ctx)?;
    let latent = latent_of(data)?.clone();
    let emb_a = spectral_embed(data.graph.adjacency(), latent.dim())?;
    let emb_p = embed_low_rank(&latent.x, latent.p, latent.q)?;
    let out = oracle_align(&emb_a, &emb_p, &latent)?;
    let header: Vec<String> = (1..=latent.dim()).map(|c| format!("dim_{c}")).collect();
    write_matrix(&ctx.path("aligned.csv"), &header, &out.aligned)?;
    let report = json!({
        "d": latent.dim(), "p": latent.p, "q": latent.q,
        "q_n": matrix_rows(&out.q_n.matrix),
        "w": matrix_rows(&out.w.matrix),
        "q_x": matrix_rows(&out.q_x.matrix),
        "q_n_group_defect": out.q_n.group_defect(),
        "two_to_infinity": two_to_infinity(&out.aligned, &latent.x)?,
    });
    write_json(&ctx.path("align.json"), &report)?;
    Ok(report)
}

fn chernoff_task(ctx: &Context) -> Result<Value> {
    let cfg = &ctx.config;
    let moments = cfg.effective_moments()?;
    let pi = cfg.require_model()?.pi();
    let report = size_adjusted_chernoff(&moments, pi, cfg.chernoff.method)?;
    let value = serde_json::to_value(&report).expect("plain data");
    write_json(&ctx.path("chernoff.json"), &value)?;
    Ok(value)
}

fn cluster_task(ctx: &Context, state: &mut State) -> Result<Value> {
    let cfg = &ctx.config;
    let k = cfg.cluster.k.or(cfg.model.as_ref().map(|m| m.k())).unwrap_or(2);
    let emb = state.embedding(ctx)?.clone();
    let opts = GmmOptions {
        tol: cfg.cluster.tol,
        max_iter: cfg.cluster.max_iter,
    };
    let fit = fit_gmm(&emb.x, k, ctx.seed, opts)?;
    let hard = fit.hard_labels();
    write_labels(&ctx.path("cluster_labels.csv"), &hard)?;
    if cfg.cluster.write_responsibilities {
        let header: Vec<String> = (0..k).map(|c| format!("component_{c}")).collect();
        write_matrix(&ctx.path("responsibilities.csv"), &header, &fit.responsibilities)?;
    }
    let truth = state.data(ctx)?.labels.clone();
    let score = truth.as_ref().map(|z| ari(&hard, z)).transpose()?;
    let report = json!({
        "k": k,
        "weights": fit.weights.iter().collect::<Vec<_>>(),
        "means": matrix_rows(&fit.means),
        "covariances": fit.covariances.iter().map(matrix_rows).collect::<Vec<_>>(),
        "loglik": fit.loglik(),
        "loglik_monotone": fit.is_monotone(1e-9),
        "converged": fit.converged,
        "iterations": fit.iterations,
        "reinitialized": fit.reinitialized,
        "ari": score,
    });
    write_json(&ctx.path("cluster.json"), &report)?;
    Ok(report)
}

fn clt_task(ctx: &Context, state: &mut State) -> Result<Value> {
    let cfg = &ctx.config;
    let moments = cfg.effective_moments()?;
    let params = clt_params(&moments, cfg.require_model()?.pi())?;
    let data = state.data(ctx)?;
    let latent = latent_of(data)?.clone();
    let labels = data.labels.clone().expect("simulated graphs carry labels");
    let emb_a = spectral_embed(data.graph.adjacency(), latent.dim())?;
    let emb_p = embed_low_rank(&latent.x, latent.p, latent.q)?;
    let out = oracle_align(&emb_a, &emb_p, &latent)?;
    let report = clt_check(&out.aligned, &latent.x, &labels, &params)?;
    let value = serde_json::to_value(&report).expect("plain data");
    write_json(&ctx.path("clt_check.json"), &value)?;
    Ok(value)
}

#[derive(Serialize)]
struct ModeScore {
    mode: PredictMode,
    spearman: Option<f64>,
    error: Option<String>,
    /// Percentile bootstrap over pairs; a stand-in interval
    bootstrap: Option<weighted_ase::predict::BootstrapInterval>,
}

fn predict_task(ctx: &Context) -> Result<Value> {
    let cfg = &ctx.config;
    let pc = cfg
        .predict
        .as_ref()
        .ok_or_else(|| CliError::Config("predict needs a \"predict\" section".into()))?;
    let (day0, day1, ids, default_d) = match (&pc.day0, &pc.day1) {
        (Some(p0), Some(p1)) => {
            let loaded = load_edge_lists(&[p0.as_path(), p1.as_path()], None)?;
            write_id_map(&ctx.path("node_ids.csv"), &loaded.ids)?;
            let mut gs = loaded.graphs.into_iter();
            (
                gs.next().expect("day 0"),
                gs.next().expect("day 1"),
                Some(loaded.ids),
                None,
            )
        }
        _ => {
            let gen = pc.generator.clone().unwrap_or_else(|| TwoDayConfig {
                n: cfg.n.unwrap_or(800),
                ..TwoDayConfig::default()
            });
            let k = gen.pi.len();
            let data = two_day_counts(&gen, ctx.seed)?;
            (data.day0, data.day1, None, Some(k))
        }
    };
    let method = cfg
        .embed
        .or(default_d.map(|d| DimensionMethod::Manual { d }))
        .unwrap_or(DimensionMethod::LargestGap { max_d: 10 });
    let count_emb = embed_with(day0.adjacency(), method)?;
    let log_day0 = transform_graph(&day0, &EdgeTransform::LogMagnitude)?;
    let log_emb = embed_with(log_day0.adjacency(), method)?;
    let targets = evaluation_pairs(&day1, pc.all_pairs);
    let name = |i: usize| ids.as_ref().map_or_else(|| i.to_string(), |v| v[i].clone());
    let mut scores = Vec::new();
    for mode in [
        PredictMode::RawCount,
        PredictMode::Magnitude,
        PredictMode::HybridCount,
        PredictMode::HybridMagnitude,
    ] {
        let emb = if mode.is_magnitude() { &log_emb } else { &count_emb };
        let set = predict(&day0, emb, mode, &targets)?;
        let rows: Vec<Vec<String>> = set
            .pairs
            .iter()
            .map(|p| vec![name(p.i), name(p.j), fmt_f64(p.predicted), fmt_f64(p.observed)])
            .collect();
        let tag = serde_json::to_value(mode).expect("unit variant");
        let file = format!("predictions_{}.csv", tag.as_str().expect("string tag"));
        write_rows(&ctx.path(&file), &["src", "dst", "predicted", "observed"], &rows)?;
        let (spearman, error) = match set.spearman() {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let bootstrap = match (pc.bootstrap, spearman) {
            (Some(b), Some(_)) => Some(spearman_bootstrap(
                &set.predicted(),
                &set.observed(),
                b,
                0.95,
                ctx.seed,
            )?),
            _ => None,
        };
        scores.push(ModeScore {
            mode,
            spearman,
            error,
            bootstrap,
        });
    }
    let present = targets.iter().filter(|&&(i, j, _)| day0.weight(i, j) > 0.0).count();
    let report = json!({
        "n": day0.n(),
        "pairs": targets.len(),
        "pairs_seen_on_day0": present,
        "d_count": count_emb.dim(),
        "d_magnitude": log_emb.dim(),
        "scores": scores,
    });
    write_json(&ctx.path("predict.json"), &report)?;
    Ok(report)
}

fn num(v: f64) -> String {
    fmt_f64(v)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".into(), fmt_f64)
}

/// Mark cells where the ratio sits on the other side of 1 from a grid
/// neighbour.
fn boundary_flags(ratios: &[Option<f64>], rows: usize, cols: usize) -> Vec<bool> {
    let side = |v: Option<f64>| v.filter(|r| r.is_finite()).map(|r| r > 1.0);
    (0..rows * cols)
        .map(|idx| {
            let (r, c) = (idx / cols, idx % cols);
            let Some(here) = side(ratios[idx]) else { return false };
            let mut neighbours = Vec::new();
            if r > 0 {
                neighbours.push(idx - cols);
            }
            if r + 1 < rows {
                neighbours.push(idx + cols);
            }
            if c > 0 {
                neighbours.push(idx - 1);
            }
            if c + 1 < cols {
                neighbours.push(idx + 1);
            }
            neighbours
                .into_iter()
                .any(|nb| side(ratios[nb]).is_some_and(|s| s != here))
        })
        .collect()
}

pub const POISSON_SWEEP_HEADER: [&str; 8] = [
    "lambda1",
    "lambda2",
    "c_poisson",
    "c_presence",
    "ratio",
    "preferred",
    "boundary",
    "reason",
];

pub const PVALUE_SWEEP_HEADER: [&str; 12] = [
    "alpha",
    "rho",
    "c_raw",
    "c_log",
    "c_threshold",
    "best_tau",
    "ratio_threshold_log",
    "ratio_log_raw",
    "preferred",
    "boundary",
    "reason",
    "pi1",
];

/// Rows of the sweep CSV in grid order (first parameter outer).
pub fn sweep_rows(sweep: &SweepConfig) -> (Vec<&'static str>, Vec<Vec<String>>) {
    match sweep {
        SweepConfig::Poisson { lambda1, lambda2 } => {
            let (xs, ys) = (lambda1.points(), lambda2.points());
            let cells: Vec<(f64, f64)> = xs.iter().flat_map(|&a| ys.iter().map(move |&b| (a, b))).collect();
            let results: Vec<_> = cells.par_iter().map(|&(a, b)| poisson_cell(a, b)).collect();
            let ratios: Vec<Option<f64>> = results.iter().map(|r| r.as_ref().ok().and_then(|c| c.ratio)).collect();
            let flags = boundary_flags(&ratios, xs.len(), ys.len());
            let rows = cells
                .iter()
                .zip(&results)
                .zip(&flags)
                .map(|((&(a, b), res), &flag)| match res {
                    Ok(c) => {
                        let preferred = match c.ratio {
                            Some(r) if r > 1.0 => "poisson",
                            Some(r) if r < 1.0 => "presence",
                            Some(_) => "tie",
                            None => "none",
                        };
                        let reason = if c.ratio.is_none() {
                            "communities coincide: both Chernoff values are zero"
                        } else {
                            ""
                        };
                        vec![
                            num(a),
                            num(b),
                            num(c.c_poisson),
                            num(c.c_presence),
                            opt(c.ratio),
                            preferred.into(),
                            flag.to_string(),
                            reason.into(),
                        ]
                    }
                    Err(e) => vec![
                        num(a),
                        num(b),
                        "NaN".into(),
                        "NaN".into(),
                        "NaN".into(),
                        "none".into(),
                        "false".into(),
                        e.to_string(),
                    ],
                })
                .collect();
            (POISSON_SWEEP_HEADER.to_vec(), rows)
        }
        SweepConfig::PValue { alpha, rho, tau, pi1 } => {
            let (xs, ys, taus) = (alpha.points(), rho.points(), tau.points());
            let cells: Vec<(f64, f64)> = xs.iter().flat_map(|&a| ys.iter().map(move |&b| (a, b))).collect();
            let results: Vec<_> = cells.par_iter().map(|&(a, r)| pvalue_cell(a, r, *pi1, &taus)).collect();
            let ratios: Vec<Option<f64>> = results
                .iter()
                .map(|r| r.as_ref().ok().and_then(|c| c.ratio_t_over_l))
                .collect();
            let flags = boundary_flags(&ratios, xs.len(), ys.len());
            let rows = cells
                .iter()
                .zip(&results)
                .zip(&flags)
                .map(|((&(a, r), res), &flag)| match res {
                    Ok(c) => {
                        let log_raw = if c.c_p > 0.0 { Some(c.c_l / c.c_p) } else { None };
                        let reason = if c.ratio_t_over_l.is_none() {
                            "log Chernoff value is zero"
                        } else {
                            ""
                        };
                        vec![
                            num(a),
                            num(r),
                            num(c.c_p),
                            num(c.c_l),
                            num(c.c_t),
                            num(c.best_tau),
                            opt(c.ratio_t_over_l),
                            opt(log_raw),
                            c.preferred().into(),
                            flag.to_string(),
                            reason.into(),
                            num(*pi1),
                        ]
                    }
                    Err(e) => {
                        let mut row = vec![num(a), num(r)];
                        row.extend(std::iter::repeat_n("NaN".to_string(), 6));
                        row.extend(["none".into(), "false".into(), e.to_string(), num(*pi1)]);
                        row
                    }
                })
                .collect();
            (PVALUE_SWEEP_HEADER.to_vec(), rows)
        }
    }
}

pub fn sweep(ctx: &Context) -> Result<Value> {
    let sweep = ctx
        .config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs a \"sweep\" section".into()))?;
    let (header, rows) = sweep_rows(sweep);
    write_rows(&ctx.path("sweep.csv"), &header, &rows)?;
    let boundary = header.iter().position(|h| *h == "boundary").expect("boundary column");
    let nan = rows.iter().filter(|r| r[2] == "NaN").count();
    let flagged = rows.iter().filter(|r| r[boundary] == "true").count();
    Ok(json!({ "rows": rows.len(), "nan_rows": nan, "boundary_cells": flagged }))
}

fn run_task(task: Task, ctx: &Context, state: &mut State) -> Result<Value> {
    match task {
        Task::Embed => embed_task(ctx, state),
        Task::Align => align_task(ctx, state),
        Task::Chernoff => chernoff_task(ctx),
        Task::Cluster => cluster_task(ctx, state),
        Task::CltCheck => clt_task(ctx, state),
        Task::Predict => predict_task(ctx),
        Task::Sweep => sweep(ctx),
    }
}

/// Run a single task as its own command.
pub fn single(task: Task, ctx: &Context) -> Result<Value> {
    let mut cfg = ctx.config.clone();
    cfg.tasks = vec![task];
    cfg.validate()?;
    let value = run_task(task, ctx, &mut State::default())?;
    ctx.provenance(task.name())?;
    Ok(value)
}

#[derive(Debug, Serialize)]
pub struct TaskOutcome {
    pub task: Task,
    pub ok: bool,
    pub error: Option<String>,
    pub report: Option<Value>,
}

/// Run every configured task in order, collecting failures. Writes
/// `report.json`; fails when any task failed.
pub fn pipeline(ctx: &Context) -> Result<Vec<TaskOutcome>> {
    ctx.config.validate()?;
    let mut state = State::default();
    let mut outcomes = Vec::new();
    for &task in &ctx.config.tasks {
        info!("running {}", task.name());
        let outcome = match run_task(task, ctx, &mut state) {
            Ok(report) => TaskOutcome {
                task,
                ok: true,
                error: None,
                report: Some(report),
            },
            Err(e) => {
                log::error!("{} failed: {e}", task.name());
                TaskOutcome {
                    task,
                    ok: false,
                    error: Some(e.to_string()),
                    report: None,
                }
            }
        };
        outcomes.push(outcome);
    }
    write_json(&ctx.path("report.json"), &outcomes)?;
    ctx.provenance("pipeline")?;
    let failed = outcomes.iter().filter(|o| !o.ok).count();
    if failed > 0 {
        return Err(CliError::TasksFailed(failed));
    }
    Ok(outcomes)
}

/// Default output directory when neither the flag nor the config sets one.
pub fn default_out() -> PathBuf {
    Path::new("out").to_path_buf()
}
