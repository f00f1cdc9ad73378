//! Wasserstein-1 between uniformly weighted atom sets and between 1D CDFs.
//!
//! Atom sets are `n x d` arrays, one atom per row, each of weight `1/n`.
//! Ground cost is the ℓ1 distance.

mod assignment;
mod cdf;
mod sinkhorn;

pub use assignment::{exact_assignment_w1, hungarian, sorted_w1_1d};
pub use cdf::{cdf_w1, EmpiricalCdf};
pub use sinkhorn::{sinkhorn_plan, SinkhornConfig, SinkhornOutput};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// `k x n` matrix of ℓ1 distances between source and destination atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(Array2<f64>);

impl CostMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("cost matrix must be nonempty"));
        }
        if values.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::invalid("costs must be finite and nonnegative"));
        }
        Ok(Self(values))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.dim()
    }
}

/// `C_ij = ||src_i - dst_j||_1`.
pub fn l1_cost_matrix(src: ArrayView2<f64>, dst: ArrayView2<f64>) -> Result<CostMatrix> {
    if src.ncols() != dst.ncols() {
        return Err(Error::invalid(format!(
            "atom dimensions differ: {} vs {}",
            src.ncols(),
            dst.ncols()
        )));
    }
    let c = Array2::from_shape_fn((src.nrows(), dst.nrows()), |(i, j)| {
        src.row(i).iter().zip(dst.row(j)).map(|(a, b)| (a - b).abs()).sum()
    });
    CostMatrix::new(c)
}

/// Nonnegative coupling between a `k`-atom and an `n`-atom measure.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan(Array2<f64>);

impl TransportPlan {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::invalid("plan entries must be finite and nonnegative"));
        }
        Ok(Self(values))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.dim()
    }

    /// `sum_ij T_ij C_ij`.
    pub fn cost(&self, c: &CostMatrix) -> f64 {
        (&self.0 * &c.0).sum()
    }

    /// Largest deviation of row sums from `1/k` and column sums from `1/n`.
    pub fn marginal_residual(&self) -> f64 {
        let (k, n) = self.0.dim();
        let row = self
            .0
            .rows()
            .into_iter()
            .map(|r| (r.sum() - 1.0 / k as f64).abs())
            .fold(0.0, f64::max);
        let col = self
            .0
            .columns()
            .into_iter()
            .map(|c| (c.sum() - 1.0 / n as f64).abs())
            .fold(0.0, f64::max);
        row.max(col)
    }
}

/// Mix of the row-argmax and column-argmax hard reductions of a square plan.
///
/// The row reduction puts `1/k` on each row's largest entry, the column
/// reduction on each column's; ties go to the lowest index. Returns
/// `gamma * rows + (1 - gamma) * cols`.
pub fn sparsify_plan(plan: &TransportPlan, gamma: f64) -> Result<TransportPlan> {
    let (k, n) = plan.shape();
    if k != n {
        return Err(Error::invalid(format!("sparsification needs a square plan, got {k} x {n}")));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma = {gamma} must lie in [0, 1]")));
    }
    let mass = 1.0 / k as f64;
    let t = plan.view();
    let mut out = Array2::zeros((k, n));
    for i in 0..k {
        let j = argmax(t.row(i).iter().copied());
        out[[i, j]] += gamma * mass;
    }
    for j in 0..n {
        let i = argmax(t.column(j).iter().copied());
        out[[i, j]] += (1.0 - gamma) * mass;
    }
    Ok(TransportPlan(out))
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Gradient of `sum_ij T_ij ||src_i - dst_j||_1` in the destination atoms
/// with the plan held fixed; `sign(0) = 0`.
pub fn atom_gradient(plan: &TransportPlan, src: ArrayView2<f64>, dst: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (k, n) = plan.shape();
    if src.nrows() != k || dst.nrows() != n || src.ncols() != dst.ncols() {
        return Err(Error::invalid(format!(
            "plan {k} x {n} does not match atoms {} x {} and {} x {}",
            src.nrows(),
            src.ncols(),
            dst.nrows(),
            dst.ncols()
        )));
    }
    let t = plan.view();
    let mut grad = Array2::zeros(dst.raw_dim());
    for j in 0..n {
        for i in 0..k {
            let w = t[[i, j]];
            if w == 0.0 {
                continue;
            }
            for d in 0..dst.ncols() {
                grad[[j, d]] += w * sign(dst[[j, d]] - src[[i, d]]);
            }
        }
    }
    Ok(grad)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
