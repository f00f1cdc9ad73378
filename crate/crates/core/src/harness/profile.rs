use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::metric::{projected_w1, w1_to_truth, Cdf1d, Projected};
use super::rates::random_l1_direction;
use crate::data::{Dataset, DiscreteMeasure};
use crate::error::{Error, Result};
use crate::estimators::{knn_estimate, rbox_estimate, KnnScheme, RBoxScheme};
use crate::neural::AtomMap;
use crate::rng::{stream, Rng};
use crate::synthetic::KernelSpec;

/// Stream id base for per-estimator tie-breaking in profiles.
const PROFILE_TASK: u64 = 0x9F0F;

/// An estimator evaluated pointwise in the profile experiments.
#[derive(Clone, Copy)]
pub enum PointEstimator<'a> {
    /// The true kernel (zero error by construction).
    Truth,
    Knn { data: &'a Dataset, k: usize },
    RBox { data: &'a Dataset, scheme: RBoxScheme },
    /// A trained network read through its atoms.
    Net(&'a dyn AtomMap),
}

impl PointEstimator<'_> {
    /// `None` for the truth.
    pub fn estimate(&self, x: &[f64], rng: &mut Rng) -> Result<Option<DiscreteMeasure>> {
        Ok(match self {
            PointEstimator::Truth => None,
            PointEstimator::Knn { data, k } => Some(knn_estimate(data, x, &KnnScheme::exact(*k)?, rng)?),
            PointEstimator::RBox { data, scheme } => Some(rbox_estimate(data, x, scheme)?),
            PointEstimator::Net(net) => Some(DiscreteMeasure::atoms(net.atoms(x)?)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub x: f64,
    pub estimator: String,
    pub w: f64,
}

/// `W(P_x, estimate)` at each grid point for each estimator; rows ordered
/// by `x`, then by estimator.
pub fn error_vs_x(
    kernel: &KernelSpec,
    estimators: &[(&str, PointEstimator)],
    grid: &[f64],
    seed: u64,
) -> Result<Vec<ProfileRow>> {
    if kernel.dim_x() != 1 {
        return Err(Error::invalid("error_vs_x needs a one-dimensional kernel"));
    }
    let mut rngs: Vec<Rng> = (0..estimators.len()).map(|i| stream(seed, PROFILE_TASK + i as u64)).collect();
    let mut rows = Vec::with_capacity(grid.len() * estimators.len());
    for &x in grid {
        for ((name, est), rng) in estimators.iter().zip(rngs.iter_mut()) {
            let cdf = match est.estimate(&[x], rng)? {
                None => Cdf1d::Truth,
                Some(m) => Cdf1d::from_measure(&m)?,
            };
            rows.push(ProfileRow {
                x,
                estimator: name.to_string(),
                w: w1_to_truth(kernel, x, &cdf)?,
            });
        }
    }
    Ok(rows)
}

/// Equal-width bins on `[lo, hi]`; values above `hi` land in the last bin
/// and values below `lo` in the first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramSpec {
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self { bins: 20, lo: 0.0, hi: 0.1 }
    }
}

impl HistogramSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 || !(self.hi > self.lo) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::invalid("histogram needs at least one bin and lo < hi"));
        }
        Ok(())
    }

    pub fn bin_of(&self, v: f64) -> usize {
        let t = ((v - self.lo) / (self.hi - self.lo) * self.bins as f64).floor();
        let mut b = if t < 0.0 { 0 } else { (t as usize).min(self.bins - 1) };
        // agree with `edges` when rounding puts v on the wrong side of an edge
        if b > 0 && v < self.edges(b).0 {
            b -= 1;
        } else if b + 1 < self.bins && v >= self.edges(b).1 {
            b += 1;
        }
        b
    }

    pub fn counts(&self, values: &[f64]) -> Vec<usize> {
        let mut c = vec![0; self.bins];
        for &v in values {
            c[self.bin_of(v)] += 1;
        }
        c
    }

    pub fn edges(&self, bin: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.bins as f64;
        (self.lo + bin as f64 * w, self.lo + (bin + 1) as f64 * w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramRow {
    pub estimator: String,
    pub bin: usize,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedErrorRow {
    pub query: usize,
    pub estimator: String,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedHistogram {
    pub errors: Vec<ProjectedErrorRow>,
    pub histogram: Vec<HistogramRow>,
}

/// Model 3 errors along random ℓ1 directions at uniform query points.
/// Every estimator sees the same query points and directions.
pub fn projected_error_histogram(
    kernel: &KernelSpec,
    estimators: &[(&str, PointEstimator)],
    n_queries: usize,
    spec: HistogramSpec,
    rng: &mut Rng,
) -> Result<ProjectedHistogram> {
    if !matches!(kernel, KernelSpec::Model3(_)) {
        return Err(Error::invalid("projected errors need the Model 3 kernel"));
    }
    spec.validate()?;
    let mut errors = Vec::with_capacity(n_queries * estimators.len());
    let mut per_est: Vec<Vec<f64>> = vec![Vec::with_capacity(n_queries); estimators.len()];
    for q in 0..n_queries {
        let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
        let a = random_l1_direction(rng);
        for (i, (name, est)) in estimators.iter().enumerate() {
            let proj = match est.estimate(&x, rng)? {
                None => Projected::Truth,
                Some(m) => Projected::Measure(m),
            };
            let w = projected_w1(kernel, ndarray::aview1(&x), a, &proj)?;
            per_est[i].push(w);
            errors.push(ProjectedErrorRow {
                query: q,
                estimator: name.to_string(),
                w,
            });
        }
    }
    let mut histogram = Vec::with_capacity(spec.bins * estimators.len());
    for ((name, _), values) in estimators.iter().zip(&per_est) {
        for (bin, count) in spec.counts(values).into_iter().enumerate() {
            let (lo, hi) = spec.edges(bin);
            histogram.push(HistogramRow {
                estimator: name.to_string(),
                bin,
                lo,
                hi,
                count,
            });
        }
    }
    Ok(ProjectedHistogram { errors, histogram })
}
