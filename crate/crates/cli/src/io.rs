//! File formats: edge lists `src,dst,weight`, labels `node,label`,
//! embeddings `node,dim_1..dim_d,label`, and JSON reports.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};
use weighted_ase::model::WeightedGraph;

use crate::error::{CliError, Result};

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::parse(path, format!("{other:?}")),
    }
}

/// `Display` for `f64` is the shortest string that parses back to the
/// same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::parse(path, e.to_string()))?;
    w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Every upper-triangle pair, zeros included, so that the file fixes the
/// node count and round-trips exactly.
pub fn write_edge_list(path: &Path, g: &WeightedGraph, ids: Option<&[String]>) -> Result<()> {
    let mut w = csv_writer(path)?;
    let name = |i: usize| ids.map_or_else(|| i.to_string(), |ids| ids[i].clone());
    w.write_record(["src", "dst", "weight"]).map_err(|e| csv_err(path, e))?;
    for (i, j, v) in g.upper_entries() {
        w.write_record([name(i), name(j), fmt_f64(v)])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["node", "label"]).map_err(|e| csv_err(path, e))?;
    for (i, l) in labels.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_embedding(path: &Path, x: &DMatrix<f64>, labels: Option<&[usize]>) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["node".to_string()];
    header.extend((1..=x.ncols()).map(|c| format!("dim_{c}")));
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for i in 0..x.nrows() {
        let mut row = vec![i.to_string()];
        row.extend(x.row(i).iter().map(|&v| fmt_f64(v)));
        if let Some(l) = labels {
            row.push(l[i].to_string());
        }
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_matrix(path: &Path, header: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in m.row_iter() {
        w.write_record(r.iter().map(|&v| fmt_f64(v)))
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Graphs read from edge lists over one shared node-id space.
#[derive(Debug, Clone)]
pub struct LoadedGraphs {
    pub graphs: Vec<WeightedGraph>,
    /// Original id of each dense index
    pub ids: Vec<String>,
    pub duplicates: usize,
    pub self_loops: usize,
}

struct Row {
    src: String,
    dst: String,
    weight: f64,
}

fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["src", "dst", "weight"] {
        return Err(CliError::parse(
            path,
            format!("line 1: expected header src,dst,weight, found {header:?}"),
        ));
    }
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| CliError::parse(path, format!("line {line}: {e}")))?;
        if rec.len() != 3 {
            return Err(CliError::parse(
                path,
                format!("line {line}: expected 3 fields, found {}", rec.len()),
            ));
        }
        let weight: f64 = rec[2]
            .parse()
            .map_err(|_| CliError::parse(path, format!("line {line}: weight {:?} is not a number", &rec[2])))?;
        if !weight.is_finite() {
            return Err(CliError::parse(
                path,
                format!("line {line}: weight {weight} is not finite"),
            ));
        }
        if rec[0].is_empty() || rec[1].is_empty() {
            return Err(CliError::parse(path, format!("line {line}: empty node id")));
        }
        rows.push(Row {
            src: rec[0].to_string(),
            dst: rec[1].to_string(),
            weight,
        });
    }
    Ok(rows)
}

/// Read edge lists into symmetric hollow matrices. Numeric ids are used
/// as indices directly (so `n_hint` can add isolated nodes); other ids are
/// mapped densely in sorted order. Duplicate pairs are summed and
/// self-loops dropped, each with a warning.
pub fn load_edge_lists(paths: &[&Path], n_hint: Option<usize>) -> Result<LoadedGraphs> {
    let tables: Vec<Vec<Row>> = paths.iter().map(|p| read_rows(p)).collect::<Result<_>>()?;
    let all_ids = || tables.iter().flatten().flat_map(|r| [&r.src, &r.dst]);
    let numeric: Option<Vec<usize>> = all_ids().map(|s| s.parse::<usize>().ok()).collect();
    let (index, ids): (HashMap<String, usize>, Vec<String>) = match numeric {
        Some(nums) => {
            let n = nums.iter().map(|&v| v + 1).max().unwrap_or(0).max(n_hint.unwrap_or(0));
            let index = all_ids().map(|s| (s.clone(), s.parse::<usize>().unwrap())).collect();
            (index, (0..n).map(|i| i.to_string()).collect())
        }
        None => {
            let sorted: BTreeMap<String, ()> = all_ids().map(|s| (s.clone(), ())).collect();
            let ids: Vec<String> = sorted.into_keys().collect();
            if let Some(h) = n_hint {
                if h != ids.len() {
                    warn!("n_hint {h} ignored: the edge lists use {} non-numeric ids", ids.len());
                }
            }
            (ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect(), ids)
        }
    };
    let n = ids.len();
    let mut duplicates = 0;
    let mut self_loops = 0;
    let mut graphs = Vec::with_capacity(tables.len());
    for (rows, path) in tables.iter().zip(paths) {
        let mut a = DMatrix::zeros(n, n);
        let mut seen = std::collections::HashSet::new();
        let (mut dup, mut loops) = (0, 0);
        for r in rows {
            let (i, j) = (index[&r.src], index[&r.dst]);
            if i == j {
                loops += 1;
                continue;
            }
            if !seen.insert((i.min(j), i.max(j))) {
                dup += 1;
            }
            a[(i, j)] += r.weight;
            a[(j, i)] = a[(i, j)];
        }
        if loops > 0 {
            warn!("{}: dropped {loops} self-loop row(s)", path.display());
        }
        if dup > 0 {
            warn!("{}: summed {dup} duplicate pair row(s)", path.display());
        }
        duplicates += dup;
        self_loops += loops;
        graphs.push(WeightedGraph::new(a)?);
    }
    Ok(LoadedGraphs {
        graphs,
        ids,
        duplicates,
        self_loops,
    })
}

pub fn load_edge_list(path: &Path, n_hint: Option<usize>) -> Result<LoadedGraphs> {
    load_edge_lists(&[path], n_hint)
}

pub fn write_id_map(path: &Path, ids: &[String]) -> Result<()> {
    let rows: Vec<Vec<String>> = ids
        .iter()
        .enumerate()
        .map(|(i, s)| vec![i.to_string(), s.clone()])
        .collect();
    write_rows(path, &["node", "id"], &rows)
}

/// Labels file `node,label` with 0-based dense node indices.
pub fn load_labels(path: &Path, n: usize) -> Result<Vec<usize>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut labels = vec![None; n];
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| CliError::parse(path, format!("line {line}: {e}")))?;
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| CliError::parse(path, format!("line {line}: {s:?} is not an index")))
        };
        let (node, label) = (parse(rec.get(0).unwrap_or(""))?, parse(rec.get(1).unwrap_or(""))?);
        if node >= n {
            return Err(CliError::parse(
                path,
                format!("line {line}: node {node} out of range for n = {n}"),
            ));
        }
        labels[node] = Some(label);
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| CliError::parse(path, format!("node {i} has no label"))))
        .collect()
}

/// Reproduction record written next to every output.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: String,
    pub version: &'static str,
    pub seed: u64,
    pub config_sha256: String,
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new<T: Serialize>(command: &str, seed: u64, config: &T) -> Provenance {
        let value = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
        let canonical = serde_json::to_string(&value).unwrap_or_default();
        Provenance {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config_sha256: hex::encode(Sha256::digest(canonical.as_bytes())),
            config: value,
        }
    }
}

pub fn ensure_dir(path: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}
