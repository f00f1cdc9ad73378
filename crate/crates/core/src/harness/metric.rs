use ndarray::{Array2, ArrayView1};

use crate::data::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::ot::{cdf_w1, EmpiricalCdf};
use crate::synthetic::KernelSpec;

/// Trapezoid cells used for every CDF integral (4,001 grid points).
pub const CDF_CELLS: usize = 4000;

/// Points per axis of the midpoint grid standing in for the Lebesgue
/// fallback under a projection.
const FALLBACK_GRID: usize = 16;

/// A one-dimensional law compared against the truth.
#[derive(Debug, Clone, PartialEq)]
pub enum Cdf1d {
    /// The true conditional law itself.
    Truth,
    /// Uniformly weighted atoms.
    Atoms(Vec<f64>),
    /// `Uniform([0, 1])`.
    UnitUniform,
}

impl Cdf1d {
    /// One-dimensional view of an estimator output.
    pub fn from_measure(m: &DiscreteMeasure) -> Result<Self> {
        match m {
            DiscreteMeasure::Atoms(a) if a.ncols() == 1 => Ok(Cdf1d::Atoms(a.column(0).to_vec())),
            DiscreteMeasure::LebesgueBox { dim: 1 } => Ok(Cdf1d::UnitUniform),
            _ => Err(Error::invalid("expected a one-dimensional measure")),
        }
    }
}

/// `W(P_x, est)` for a one-dimensional kernel via the CDF integral.
pub fn w1_to_truth(kernel: &KernelSpec, x: f64, est: &Cdf1d) -> Result<f64> {
    let support = kernel.support_1d(x)?;
    let truth = |t: f64| kernel.true_cdf_1d(x, t).expect("kernel checked one-dimensional");
    compare(truth, support, est)
}

/// `W(a·P_x, a·est)` for Model 3 along an ℓ1-normalized direction `a`.
pub fn projected_w1(kernel: &KernelSpec, x: ArrayView1<f64>, a: [f64; 3], est: &Projected) -> Result<f64> {
    let (_, support) = kernel.projected_components(x, a)?;
    let truth = |t: f64| kernel.projected_cdf_3d(x, a, t).expect("kernel checked three-dimensional");
    let est = match est {
        Projected::Truth => Cdf1d::Truth,
        Projected::Measure(DiscreteMeasure::Atoms(p)) => Cdf1d::Atoms(project(p, a)?),
        Projected::Measure(DiscreteMeasure::LebesgueBox { dim: 3 }) => Cdf1d::Atoms(project(&midpoint_grid(), a)?),
        Projected::Measure(_) => return Err(Error::invalid("expected a three-dimensional measure")),
    };
    compare(truth, support, &est)
}

/// A three-dimensional law compared against the projected truth.
#[derive(Debug, Clone, PartialEq)]
pub enum Projected {
    Truth,
    Measure(DiscreteMeasure),
}

fn project(points: &Array2<f64>, a: [f64; 3]) -> Result<Vec<f64>> {
    if points.ncols() != 3 {
        return Err(Error::invalid("projection needs three-dimensional atoms"));
    }
    Ok(points.rows().into_iter().map(|r| r[0] * a[0] + r[1] * a[1] + r[2] * a[2]).collect())
}

fn midpoint_grid() -> Array2<f64> {
    let n = FALLBACK_GRID;
    Array2::from_shape_fn((n * n * n, 3), |(i, d)| {
        let idx = (i / n.pow(d as u32)) % n;
        (idx as f64 + 0.5) / n as f64
    })
}

/// Integrates `|F - G|` over the truth's support widened to cover `est`.
fn compare(truth: impl Fn(f64) -> f64, (lo, hi): (f64, f64), est: &Cdf1d) -> Result<f64> {
    // point-mass truths have an empty support interval
    let hi = if hi > lo { hi } else { lo + 1.0 };
    match est {
        Cdf1d::Truth => cdf_w1(&truth, &truth, lo, hi, CDF_CELLS),
        Cdf1d::Atoms(v) => {
            let f = EmpiricalCdf::new(v)?;
            let vals = f.values();
            let (lo, hi) = (lo.min(vals[0]), hi.max(vals[vals.len() - 1]));
            cdf_w1(&truth, |t| f.eval(t), lo, hi, CDF_CELLS)
        }
        Cdf1d::UnitUniform => cdf_w1(&truth, |t: f64| t.clamp(0.0, 1.0), lo.min(0.0), hi.max(1.0), CDF_CELLS),
    }
}
