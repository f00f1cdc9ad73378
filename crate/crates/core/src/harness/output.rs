//! CSV results and JSON run manifests.
//!
//! Every CSV starts with a header line, even when it has no rows, and
//! rows are rejected before writing if any numeric field is not finite.
//! Reruns with the same config and seeds give byte-identical files, except
//! for the two wall-clock columns of the Δ summary.
//!
//! | file kind | header |
//! |---|---|
//! | rate curve | `m,seed,param,mean_w` |
//! | variance | `scheme,m,param,repeats,mean,variance,bound` |
//! | error vs x | `x,estimator,w` |
//! | projected errors | `query,estimator,w` |
//! | histogram | `estimator,bin,lo,hi,count` |
//! | Δ benchmark runs | `run,delta` |
//! | Δ benchmark summary | `M,d_X,k,depth,seed,delta_mean,delta_p50,delta_p95,wall_ms_exact,wall_ms_anns` |
//! | loss trace | `epoch,loss` |
//! | atoms | `x,atom,coord,value` |
//! | point estimate | `atom,coord,value` |
//! | derivative | `x,avg_abs_derivative` |
//! | samples | `x,y` |

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::ann::{AnnSummaryRow, DeltaRow};
use super::profile::{HistogramRow, ProfileRow, ProjectedErrorRow};
use super::rates::{CurveRow, VarianceRow};
use crate::data::DATASET_FORMAT_VERSION;
use crate::error::{Error, Result};
use crate::neural::CHECKPOINT_FORMAT_VERSION;

/// A serializable result row with a fixed header.
pub trait CsvRow: Serialize {
    const HEADER: &'static [&'static str];

    fn is_finite(&self) -> bool;
}

macro_rules! csv_row {
    ($t:ty, [$($h:literal),+], |$s:ident| $finite:expr) => {
        impl CsvRow for $t {
            const HEADER: &'static [&'static str] = &[$($h),+];

            fn is_finite(&self) -> bool {
                let $s = self;
                $finite
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossRow {
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomRow {
    pub x: f64,
    pub atom: usize,
    pub coord: usize,
    pub value: f64,
}

/// One coordinate of one atom of a point estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub atom: usize,
    pub coord: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeRow {
    pub x: f64,
    pub avg_abs_derivative: f64,
}

/// One sample of a one-dimensional dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRow {
    pub x: f64,
    pub y: f64,
}

csv_row!(CurveRow, ["m", "seed", "param", "mean_w"], |r| r.param.is_finite() && r.mean_w.is_finite());
csv_row!(
    VarianceRow,
    ["scheme", "m", "param", "repeats", "mean", "variance", "bound"],
    |r| [r.param, r.mean, r.variance, r.bound].iter().all(|v| v.is_finite())
);
csv_row!(ProfileRow, ["x", "estimator", "w"], |r| r.x.is_finite() && r.w.is_finite());
csv_row!(ProjectedErrorRow, ["query", "estimator", "w"], |r| r.w.is_finite());
csv_row!(HistogramRow, ["estimator", "bin", "lo", "hi", "count"], |r| r.lo.is_finite() && r.hi.is_finite());
csv_row!(DeltaRow, ["run", "delta"], |r| r.delta.is_finite());
csv_row!(
    AnnSummaryRow,
    ["M", "d_X", "k", "depth", "seed", "delta_mean", "delta_p50", "delta_p95", "wall_ms_exact", "wall_ms_anns"],
    |r| [r.delta_mean, r.delta_p50, r.delta_p95, r.wall_ms_exact, r.wall_ms_anns].iter().all(|v| v.is_finite())
);
csv_row!(LossRow, ["epoch", "loss"], |r| r.loss.is_finite());
csv_row!(AtomRow, ["x", "atom", "coord", "value"], |r| r.x.is_finite() && r.value.is_finite());
csv_row!(EstimateRow, ["atom", "coord", "value"], |r| r.value.is_finite());
csv_row!(DerivativeRow, ["x", "avg_abs_derivative"], |r| r.x.is_finite() && r.avg_abs_derivative.is_finite());
csv_row!(SampleRow, ["x", "y"], |r| r.x.is_finite() && r.y.is_finite());

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Writes `rows` under `R::HEADER`.
pub fn write_csv<R: CsvRow>(path: impl AsRef<Path>, rows: &[R]) -> Result<()> {
    if let Some(i) = rows.iter().position(|r| !r.is_finite()) {
        return Err(Error::invalid(format!("row {i} has a non-finite value")));
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    w.write_record(R::HEADER).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Config echo, seeds and versions of one CLI run. Contains no timestamps
/// so identical runs produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub dataset_format: u32,
    pub checkpoint_format: u32,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize, seeds: Vec<u64>) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            dataset_format: DATASET_FORMAT_VERSION,
            checkpoint_format: CHECKPOINT_FORMAT_VERSION,
            command: command.to_string(),
            config: serde_json::to_value(config).map_err(|e| Error::invalid(e.to_string()))?,
            seeds,
            outputs: Vec::new(),
        })
    }
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &RunManifest) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, manifest).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
