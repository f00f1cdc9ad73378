use std::collections::BTreeMap;

use ndarray::ArrayView2;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::config::{DensityConstants, Resolved, SchemeFamily};
use super::metric::{projected_w1, w1_to_truth, Cdf1d, Projected};
use crate::data::{Dataset, DiscreteMeasure, EvalMeasure};
use crate::error::{Error, Result};
use crate::estimators::{knn_estimate, rbox_estimate, KnnScheme};
use crate::rng::{stream, task_id, Rng};
use crate::synthetic::{sample_dataset, KernelSpec};

/// Stream id for tie-breaking and projection draws inside one cell.
const CELL_TASK: u64 = 1;

/// Draws a direction uniformly on the ℓ1 unit sphere of `R^3`.
pub fn random_l1_direction(rng: &mut Rng) -> [f64; 3] {
    loop {
        let a: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n: f64 = a.iter().map(|v: &f64| v.abs()).sum();
        if n > 0.0 {
            return a.map(|v| v / n);
        }
    }
}

/// Estimator output at one feature point.
pub fn estimate_at(data: &Dataset, x: &[f64], scheme: &Resolved, rng: &mut Rng) -> Result<DiscreteMeasure> {
    match scheme {
        Resolved::Knn(k) => knn_estimate(data, x, &KnnScheme::exact(*k)?, rng),
        Resolved::RBox(s) => rbox_estimate(data, x, s),
    }
}

/// Error of one estimate at `x`: exact CDF integral for one-dimensional
/// kernels, a random ℓ1 projection for Model 3.
pub fn pointwise_error(kernel: &KernelSpec, x: &[f64], est: &DiscreteMeasure, rng: &mut Rng) -> Result<f64> {
    match kernel {
        KernelSpec::Model3(_) => {
            let a = random_l1_direction(rng);
            projected_w1(kernel, ndarray::aview1(x), a, &Projected::Measure(est.clone()))
        }
        _ => w1_to_truth(kernel, x[0], &Cdf1d::from_measure(est)?),
    }
}

/// Mean error over the evaluation points (uniform weights).
pub fn integrated_error(
    kernel: &KernelSpec,
    data: &Dataset,
    scheme: &Resolved,
    points: ArrayView2<f64>,
    rng: &mut Rng,
) -> Result<f64> {
    if points.ncols() != kernel.dim_x() {
        return Err(Error::invalid("evaluation points do not match the kernel's feature dimension"));
    }
    let mut total = 0.0;
    for row in points.rows() {
        let x = row.to_vec();
        let est = estimate_at(data, &x, scheme, rng)?;
        total += pointwise_error(kernel, &x, &est, rng)?;
    }
    Ok(total / points.nrows() as f64)
}

/// One `(M, seed)` cell of a rate curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub m: usize,
    pub seed: u64,
    /// `k` or `r` used for this cell.
    pub param: f64,
    pub mean_w: f64,
}

/// Integrated error for every `(M, seed)`, with the hyperparameter set per
/// `M` by `family`. The dataset of cell `(M, seed)` is `sample_dataset(M, seed)`.
pub fn mean_error_curve(
    kernel: &KernelSpec,
    family: &SchemeFamily,
    ms: &[usize],
    eval: &EvalMeasure,
    seeds: &[u64],
) -> Result<Vec<CurveRow>> {
    let points = eval.points();
    let mut rows = Vec::with_capacity(ms.len() * seeds.len());
    for &m in ms {
        let scheme = family.resolve(m, kernel.dim_x(), kernel.dim_y())?;
        for &seed in seeds {
            let data = sample_dataset(kernel, m, seed)?;
            let mut rng = stream(seed, task_id(m as u64, CELL_TASK));
            rows.push(CurveRow {
                m,
                seed,
                param: scheme.param(),
                mean_w: integrated_error(kernel, &data, &scheme, points.view(), &mut rng)?,
            });
        }
    }
    Ok(rows)
}

/// Least-squares line through `(log M, log error)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 when the errors are constant.
    pub r2: f64,
}

/// Fits the seed-mean error per `M` on log-log axes.
pub fn fit_loglog_slope(rows: &[CurveRow]) -> Result<SlopeFit> {
    let mut by_m: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = by_m.entry(r.m).or_insert((0.0, 0));
        e.0 += r.mean_w;
        e.1 += 1;
    }
    let points: Vec<(f64, f64)> = by_m.iter().map(|(&m, &(s, n))| (m as f64, s / n as f64)).collect();
    fit_loglog(&points)
}

/// Least squares on `(ln x, ln y)`; needs 3 distinct positive `x` values.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::invalid("log-log fit needs positive finite coordinates"));
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::invalid(format!("log-log fit needs 3 distinct x values, got {}", distinct.len())));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(SlopeFit { slope, intercept, r2 })
}

/// Bound on the variance of the integrated k-NN error.
pub fn knn_variance_bound(k: usize) -> f64 {
    1.0 / k as f64
}

/// Bound `4^(d_X+1) C^2 / (c^2 (M + 1))` on the variance of the integrated
/// r-box error.
pub fn rbox_variance_bound(m: usize, dim_x: usize, density: DensityConstants) -> f64 {
    4f64.powi(dim_x as i32 + 1) * density.c_upper.powi(2) / (density.c_lower.powi(2) * (m + 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceRow {
    pub scheme: String,
    pub m: usize,
    pub param: f64,
    pub repeats: usize,
    pub mean: f64,
    pub variance: f64,
    pub bound: f64,
}

/// Sample variance (denominator `n - 1`) of the integrated error across
/// one dataset per seed, next to its theoretical bound.
pub fn variance_check(
    kernel: &KernelSpec,
    family: &SchemeFamily,
    m: usize,
    seeds: &[u64],
    eval: &EvalMeasure,
    density: DensityConstants,
) -> Result<VarianceRow> {
    if seeds.len() < 50 {
        return Err(Error::invalid(format!("variance check needs at least 50 repeats, got {}", seeds.len())));
    }
    let rows = mean_error_curve(kernel, family, &[m], eval, seeds)?;
    let n = rows.len() as f64;
    // shifted by the first value so identical repeats give exactly 0
    let shift = rows[0].mean_w;
    let dev_mean = rows.iter().map(|r| r.mean_w - shift).sum::<f64>() / n;
    let variance = rows.iter().map(|r| (r.mean_w - shift - dev_mean).powi(2)).sum::<f64>() / (n - 1.0);
    let mean = shift + dev_mean;
    let scheme = family.resolve(m, kernel.dim_x(), kernel.dim_y())?;
    let bound = match scheme {
        Resolved::Knn(k) => knn_variance_bound(k),
        Resolved::RBox(_) => rbox_variance_bound(m, kernel.dim_x(), density),
    };
    Ok(VarianceRow {
        scheme: family.name().to_string(),
        m,
        param: scheme.param(),
        repeats: rows.len(),
        mean,
        variance,
        bound,
    })
}
