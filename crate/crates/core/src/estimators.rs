//! The r-box and k-nearest-neighbor raw estimators.

use serde::{Deserialize, Serialize};

use crate::data::{clustered_empirical, Dataset, DiscreteMeasure};
use crate::error::{Error, Result};
use crate::nns::{anns_knn, exact_knn, Norm, RbspPart};
use crate::rng::Rng;

/// Radius of the clamped sup-norm box, `0 < r < 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RBoxScheme {
    r: f64,
}

impl RBoxScheme {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 0.5) {
            return Err(Error::invalid(format!("r-box radius {r} must lie in (0, 1/2)")));
        }
        Ok(Self { r })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Center of the box for query `x`: each coordinate clamped to `[r, 1-r]`.
    pub fn center(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v.clamp(self.r, 1.0 - self.r)).collect()
    }

    /// Indices of samples inside the clamped box around `x`.
    pub fn members(&self, data: &Dataset, x: &[f64]) -> Vec<usize> {
        let c = self.center(x);
        (0..data.len())
            .filter(|&m| Norm::Sup.distance(data.x(m), &c) <= self.r)
            .collect()
    }
}

/// Where k-NN queries are answered.
#[derive(Debug, Clone, Copy)]
pub enum KnnBackend<'a> {
    Exact,
    Partition(&'a [RbspPart]),
}

#[derive(Debug, Clone, Copy)]
pub struct KnnScheme<'a> {
    pub k: usize,
    pub backend: KnnBackend<'a>,
}

impl KnnScheme<'static> {
    pub fn exact(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        Ok(Self {
            k,
            backend: KnnBackend::Exact,
        })
    }
}

/// Empirical measure of targets whose features fall in the clamped r-box
/// around `x`; Lebesgue fallback when the box is empty.
pub fn rbox_estimate(data: &Dataset, x: &[f64], scheme: &RBoxScheme) -> Result<DiscreteMeasure> {
    if x.len() != data.dim_x() {
        return Err(Error::invalid(format!("query dimension {} != {}", x.len(), data.dim_x())));
    }
    clustered_empirical(data, &scheme.members(data, x))
}

/// Empirical measure of the targets of the k nearest features to `x`.
pub fn knn_estimate(data: &Dataset, x: &[f64], scheme: &KnnScheme, rng: &mut Rng) -> Result<DiscreteMeasure> {
    let idx = match scheme.backend {
        KnnBackend::Exact => exact_knn(data, x, scheme.k, rng)?,
        KnnBackend::Partition(parts) => anns_knn(parts, data, x, scheme.k, Norm::Sup, rng)?,
    };
    clustered_empirical(data, &idx)
}

/// Largest double strictly below 1/2.
const BELOW_HALF: f64 = 0.5 - f64::EPSILON / 4.0;

/// Rate-optimal r-box radius `c M^{-1/(d_X+2)}` (`d_Y <= 2`) or
/// `c M^{-1/(d_X+d_Y)}` (`d_Y >= 3`), clamped into `(0, 1/2)`.
pub fn optimal_r(m: usize, dim_x: usize, dim_y: usize, scale: f64) -> Result<f64> {
    check_rate_args(m, scale)?;
    let denom = if dim_y <= 2 { dim_x + 2 } else { dim_x + dim_y } as f64;
    let r = scale * (m as f64).powf(-1.0 / denom);
    Ok(r.clamp(f64::MIN_POSITIVE, BELOW_HALF))
}

/// Rate-optimal neighbor count `c M^{2/(d_X+2)}` (`d_Y <= 2`) or
/// `c M^{d_Y/(d_X+d_Y)}` (`d_Y >= 3`), rounded and clamped into `[1, M]`.
pub fn optimal_k(m: usize, dim_x: usize, dim_y: usize, scale: f64) -> Result<usize> {
    check_rate_args(m, scale)?;
    let exponent = if dim_y <= 2 {
        2.0 / (dim_x + 2) as f64
    } else {
        dim_y as f64 / (dim_x + dim_y) as f64
    };
    let k = (scale * (m as f64).powf(exponent)).round();
    Ok((k as usize).clamp(1, m))
}

fn check_rate_args(m: usize, scale: f64) -> Result<()> {
    if m < 2 {
        return Err(Error::invalid(format!("sample count {m} must be at least 2")));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!("scale {scale} must be positive")));
    }
    Ok(())
}
