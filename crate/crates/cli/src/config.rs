//! Run configuration: one TOML file, every key optional.
//!
//! Overrides use dotted paths, `--set train.epochs=200`. The value is read
//! as a TOML value and falls back to a bare string, so `--set
//! kernel.kind=model2` and `--set rates.ms=[1024,4096]` both work.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use condist::harness::{DensityConstants, EvalConfig, ExperimentConfig, HistogramSpec, KernelChoice, SchemeFamily};
use condist::neural::DEFAULT_TAU;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub output_dir: PathBuf,
    /// Ground-truth kernel shared by every subcommand.
    pub kernel: KernelChoice,
    pub data: DataSection,
    pub estimate: EstimateSection,
    pub rates: RatesSection,
    pub variance: VarianceSection,
    pub profile: ProfileSection,
    pub project: ProjectSection,
    pub ann: AnnSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            kernel: KernelChoice::IntroUniform,
            data: DataSection::default(),
            estimate: EstimateSection::default(),
            rates: RatesSection::default(),
            variance: VarianceSection::default(),
            profile: ProfileSection::default(),
            project: ProjectSection::default(),
            ann: AnnSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
        }
    }
}

/// Dataset used by `gen`, `estimate`, `error-vs-x` and `train`: loaded
/// from `path` when set, sampled from the kernel otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub m: usize,
    pub seed: u64,
    pub path: Option<PathBuf>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            m: 10_000,
            seed: 0,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSection {
    pub x: Vec<f64>,
    pub scheme: SchemeFamily,
    /// Tie-breaking stream.
    pub seed: u64,
}

impl Default for EstimateSection {
    fn default() -> Self {
        Self {
            x: vec![0.5],
            scheme: SchemeFamily::knn(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesSection {
    pub scheme: SchemeFamily,
    pub ms: Vec<usize>,
    pub seeds: Vec<u64>,
    pub eval: EvalConfig,
}

impl Default for RatesSection {
    fn default() -> Self {
        let base = ExperimentConfig::default();
        Self {
            scheme: base.scheme,
            ms: base.ms,
            seeds: base.seeds,
            eval: base.eval,
        }
    }
}

/// Repeats use seeds `first_seed .. first_seed + repeats`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarianceSection {
    pub scheme: SchemeFamily,
    pub m: usize,
    pub repeats: u64,
    pub first_seed: u64,
    pub eval: EvalConfig,
    pub density: DensityConstants,
}

impl Default for VarianceSection {
    fn default() -> Self {
        Self {
            scheme: SchemeFamily::knn(),
            m: 10_000,
            repeats: 200,
            first_seed: 0,
            eval: EvalConfig::default(),
            density: DensityConstants::default(),
        }
    }
}

/// Estimators compared by `error-vs-x`: any of `truth`, `knn`, `rbox`,
/// `net`. `r` unset means the rate-optimal radius; `net` needs `checkpoint`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    pub estimators: Vec<String>,
    pub grid_points: usize,
    pub k: usize,
    pub r: Option<f64>,
    pub checkpoint: Option<PathBuf>,
    pub seed: u64,
}

impl Default for ProfileSection {
    fn default() -> Self {
        Self {
            estimators: vec!["knn".into(), "rbox".into()],
            grid_points: 101,
            k: 100,
            r: None,
            checkpoint: None,
            seed: 0,
        }
    }
}

/// Model 3 projected errors of the raw k-NN estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectSection {
    pub m: usize,
    pub k: usize,
    pub n_queries: usize,
    pub histogram: HistogramSpec,
    pub data_seed: u64,
    pub seed: u64,
}

impl Default for ProjectSection {
    fn default() -> Self {
        Self {
            m: 1_000_000,
            k: 300,
            n_queries: 10_000,
            histogram: HistogramSpec::default(),
            data_seed: 0,
            seed: 0,
        }
    }
}

/// Δ benchmark on uniform features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnSection {
    pub m: usize,
    pub dim: usize,
    pub k: usize,
    pub depth: usize,
    pub runs: usize,
    pub seed: u64,
}

impl Default for AnnSection {
    fn default() -> Self {
        Self {
            m: 100_000,
            dim: 3,
            k: 300,
            depth: 5,
            runs: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Lipnet,
    Stdnet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Search {
    Rbsp,
    Exact,
}

/// Reference schedules with breakpoints scaled to `epochs` unless
/// `scale_schedule` is false. `n_neuron` unset means `2k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub arch: Arch,
    pub k: usize,
    pub n_batch: usize,
    pub epochs: usize,
    pub scale_schedule: bool,
    pub lr: f64,
    pub l_scale: f64,
    pub tau: f64,
    pub n_neuron: Option<usize>,
    pub n_hidden: usize,
    pub search: Search,
    pub seed: u64,
    /// Continue from this checkpoint up to `epochs` in total.
    pub resume: Option<PathBuf>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            arch: Arch::Lipnet,
            k: 100,
            n_batch: 100,
            epochs: 1500,
            scale_schedule: true,
            lr: 1e-3,
            l_scale: 0.1,
            tau: DEFAULT_TAU,
            n_neuron: None,
            n_hidden: 5,
            search: Search::Rbsp,
            seed: 0,
            resume: None,
        }
    }
}

/// Diagnostics of a trained network on a one-dimensional kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub checkpoint: PathBuf,
    pub grid_points: usize,
    pub lipschitz_pairs: usize,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            checkpoint: PathBuf::from("out/model.ckpt"),
            grid_points: 101,
            lipschitz_pairs: 2000,
            seed: 0,
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets `path` (dot separated) to `raw` inside `table`.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .with_context(|| format!("override `{assignment}` is not of the form key=value"))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("override key `{path}` has an empty segment");
    }
    let (last, parents) = keys.split_last().expect("split yields one segment");
    let mut cur = table;
    for k in parents {
        let entry = cur.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => bail!("override key `{path}`: `{k}` is not a table"),
        };
    }
    cur.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

impl CliConfig {
    /// File contents (if any), then overrides in order, then `output_dir`.
    pub fn load(path: Option<&Path>, overrides: &[String], output_dir: Option<&Path>) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str::<toml::Table>(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: CliConfig = toml::Value::Table(table).try_into().context("invalid configuration")?;
        if let Some(dir) = output_dir {
            cfg.output_dir = dir.to_path_buf();
        }
        Ok(cfg)
    }

    pub fn rates_experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            kernel: self.kernel.clone(),
            scheme: self.rates.scheme.clone(),
            ms: self.rates.ms.clone(),
            seeds: self.rates.seeds.clone(),
            eval: self.rates.eval.clone(),
            density: DensityConstants::default(),
            output_dir: self.output_dir.clone(),
        }
    }

    pub fn variance_experiment(&self) -> ExperimentConfig {
        let v = &self.variance;
        ExperimentConfig {
            kernel: self.kernel.clone(),
            scheme: v.scheme.clone(),
            ms: vec![v.m],
            seeds: (v.first_seed..v.first_seed + v.repeats).collect(),
            eval: v.eval.clone(),
            density: v.density,
            output_dir: self.output_dir.clone(),
        }
    }
}
