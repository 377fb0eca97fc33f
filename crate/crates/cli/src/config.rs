use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use weighted_ase::model::{BlockModel, BlockMoments};
use weighted_ase::predict::TwoDayConfig;
use weighted_ase::represent::EdgeTransform;
use weighted_ase::spectral::DimensionMethod;
use weighted_ase::theory::{affine_block_moments, signature_of, ChernoffMethod};

use crate::error::{CliError, Result};

/// One experiment, read from JSON. Relative paths are resolved against
/// the directory holding the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: Option<BlockModel>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Applied left to right to every graph before embedding.
    #[serde(default)]
    pub transforms: Vec<EdgeTransform>,
    #[serde(default)]
    pub embed: Option<DimensionMethod>,
    #[serde(default)]
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default)]
    pub chernoff: ChernoffConfig,
    #[serde(default)]
    pub predict: Option<PredictConfig>,
    /// Observed graph to use instead of simulating from `model`.
    #[serde(default)]
    pub input: Option<InputConfig>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Embed,
    Align,
    Chernoff,
    Cluster,
    CltCheck,
    Predict,
    Sweep,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Embed => "embed",
            Task::Align => "align",
            Task::Chernoff => "chernoff",
            Task::Cluster => "cluster",
            Task::CltCheck => "clt_check",
            Task::Predict => "predict",
            Task::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        weighted_ase::represent::linspace(self.min, self.max, self.steps)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.steps == 0 || !(self.min <= self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(CliError::Config(format!(
                "grid {name} must have steps >= 1 and finite min <= max"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepConfig {
    /// Poisson counts against presence indicators, `π = (½, ½)`.
    Poisson { lambda1: Grid, lambda2: Grid },
    /// Raw, log and thresholded p-values; the threshold is maximised over
    /// the `tau` grid in every cell.
    PValue {
        alpha: Grid,
        rho: Grid,
        tau: Grid,
        #[serde(default = "default_pi1")]
        pi1: f64,
    },
}

fn default_pi1() -> f64 {
    0.2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    /// Number of components; defaults to the model's K, else 2.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub write_responsibilities: bool,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    500
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            k: None,
            tol: default_tol(),
            max_iter: default_max_iter(),
            write_responsibilities: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChernoffConfig {
    #[serde(default = "default_method")]
    pub method: ChernoffMethod,
}

fn default_method() -> ChernoffMethod {
    ChernoffMethod::Auto
}

impl Default for ChernoffConfig {
    fn default() -> Self {
        ChernoffConfig {
            method: default_method(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub edges: PathBuf,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    /// Synthetic two-day data; ignored when `day0` and `day1` are given.
    #[serde(default)]
    pub generator: Option<TwoDayConfig>,
    #[serde(default)]
    pub day0: Option<PathBuf>,
    #[serde(default)]
    pub day1: Option<PathBuf>,
    /// Score every pair instead of only pairs seen on day 1.
    #[serde(default)]
    pub all_pairs: bool,
    /// Bootstrap resamples for Spearman intervals (a stand-in: the
    /// reference interval construction is unknown).
    #[serde(default)]
    pub bootstrap: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Read a config and resolve its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(input) = &mut self.input {
            fix(&mut input.edges);
            if let Some(l) = &mut input.labels {
                fix(l);
            }
        }
        if let Some(p) = &mut self.predict {
            if let Some(d) = &mut p.day0 {
                fix(d);
            }
            if let Some(d) = &mut p.day1 {
                fix(d);
            }
        }
        if let Some(o) = &mut self.output {
            fix(o);
        }
    }

    pub fn require_model(&self) -> Result<&BlockModel> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a \"model\" section".into()))
    }

    pub fn require_n(&self) -> Result<usize> {
        match self.n {
            Some(n) if n >= 2 => Ok(n),
            Some(n) => Err(CliError::Config(format!("n = {n} is too small"))),
            None => Err(CliError::Config("this command needs \"n\"".into())),
        }
    }

    /// Block moments of the model after the configured transforms. Only
    /// affine transforms have analytic moments.
    pub fn effective_moments(&self) -> Result<BlockMoments> {
        let mut m = self.require_model()?.block_moments();
        for t in &self.transforms {
            match *t {
                EdgeTransform::Affine { a, b } => m = affine_block_moments(&m, a, b)?,
                ref other => {
                    return Err(CliError::Config(format!(
                        "no analytic block moments after {other:?}; only affine transforms are supported here"
                    )))
                }
            }
        }
        Ok(m)
    }

    /// The configured dimension rule, defaulting to the rank of the
    /// model's block mean matrix.
    pub fn dimension_method(&self) -> Result<DimensionMethod> {
        if let Some(m) = self.embed {
            return Ok(m);
        }
        if self.model.is_some() {
            if let Ok(moments) = self.effective_moments() {
                let (d, _, _) = signature_of(&moments.b, None)?;
                if d > 0 {
                    return Ok(DimensionMethod::Manual { d });
                }
            }
        }
        Ok(DimensionMethod::LargestGap { max_d: 10 })
    }

    /// Reject configs whose tasks reference missing sections.
    pub fn validate(&self) -> Result<()> {
        for t in &self.transforms {
            t.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(DimensionMethod::Manual { d: 0 }) | Some(DimensionMethod::LargestGap { max_d: 0 }) = self.embed {
            return Err(CliError::Config("embedding dimension must be at least 1".into()));
        }
        if let Some(s) = &self.sweep {
            match s {
                SweepConfig::Poisson { lambda1, lambda2 } => {
                    lambda1.validate("lambda1")?;
                    lambda2.validate("lambda2")?;
                }
                SweepConfig::PValue { alpha, rho, tau, pi1 } => {
                    alpha.validate("alpha")?;
                    rho.validate("rho")?;
                    tau.validate("tau")?;
                    if !(*pi1 > 0.0 && *pi1 < 1.0) {
                        return Err(CliError::Config(format!("pi1 = {pi1} must lie in (0, 1)")));
                    }
                }
            }
        }
        if let Some(k) = self.cluster.k {
            if k == 0 {
                return Err(CliError::Config("cluster.k must be at least 1".into()));
            }
        }
        let needs_graph = self
            .tasks
            .iter()
            .any(|t| matches!(t, Task::Embed | Task::Align | Task::Cluster | Task::CltCheck));
        for task in &self.tasks {
            let missing = match task {
                Task::Sweep if self.sweep.is_none() => Some("sweep"),
                Task::Predict if self.predict.is_none() => Some("predict"),
                Task::Chernoff | Task::Align | Task::CltCheck if self.model.is_none() => Some("model"),
                _ => None,
            };
            if let Some(section) = missing {
                return Err(CliError::Config(format!(
                    "task {} needs a \"{section}\" section",
                    task.name()
                )));
            }
        }
        if needs_graph && self.input.is_none() {
            self.require_model()?;
            self.require_n()?;
        }
        if let Some(p) = &self.predict {
            if p.day0.is_some() != p.day1.is_some() {
                return Err(CliError::Config(
                    "predict needs both day0 and day1 files, or neither".into(),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = ExperimentConfig::from_json(
            r#"{
                "model": {"K": 2, "pi": [0.5, 0.5], "H": [
                    [{"kind": "poisson", "rate": 0.5}, {"kind": "poisson", "rate": 0.6}],
                    [{"kind": "poisson", "rate": 0.6}, {"kind": "poisson", "rate": 0.5}]]},
                "n": 100,
                "seed": 7,
                "transforms": [{"kind": "presence_indicator"}],
                "embed": {"method": "manual", "d": 2},
                "tasks": ["embed", "cluster", "sweep"],
                "sweep": {"kind": "poisson",
                          "lambda1": {"min": 0.1, "max": 2, "steps": 3},
                          "lambda2": {"min": 0.1, "max": 2, "steps": 3}},
                "cluster": {"k": 2}
            }"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.tasks.len(), 3);
        assert!(cfg.effective_moments().is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let cfg = ExperimentConfig::from_json(r#"{"tasks": ["sweep"]}"#).unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        let cfg = ExperimentConfig::from_json(
            r#"{"tasks": ["sweep"], "sweep": {"kind": "poisson",
                "lambda1": {"min": 1, "max": 0, "steps": 3},
                "lambda2": {"min": 0, "max": 1, "steps": 3}}}"#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::from_json(r#"{"tasks": ["embed"]}"#).unwrap();
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_json("{}").unwrap().validate().is_ok());
    }
}
