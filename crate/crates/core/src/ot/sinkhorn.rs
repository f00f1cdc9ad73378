use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};

use super::{CostMatrix, TransportPlan};
use crate::error::{Error, Result};

/// Floor for the normalizing constant when every row has a zero maximum.
const MIN_COST_SCALE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub n_iter: usize,
    /// Divide costs by `min_i max_j C_ij` before exponentiating.
    pub normalize: bool,
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon = {} must be positive", self.epsilon)));
        }
        if self.n_iter == 0 {
            return Err(Error::invalid("Sinkhorn needs at least one iteration"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornOutput {
    pub plan: TransportPlan,
    /// `sum_ij T_ij C_ij` under the unnormalized costs.
    pub cost: f64,
    pub residual: f64,
}

/// Fixed-iteration Sinkhorn scaling with uniform marginals.
///
/// Starting from `u = 1/k`, `v = 1/n`, alternates `u = (1/k) / (K v)` and
/// `v = (1/n) / (K^T u)`, then returns `diag(u) K diag(v)`.
pub fn sinkhorn_plan(cost: &CostMatrix, cfg: &SinkhornConfig) -> Result<SinkhornOutput> {
    cfg.validate()?;
    let c = cost.view();
    let (k, n) = c.dim();
    let scale = if cfg.normalize {
        c.rows()
            .into_iter()
            .map(|r| r.iter().cloned().fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min)
            .max(MIN_COST_SCALE)
    } else {
        1.0
    };
    let denom = scale * cfg.epsilon;
    let kernel: Array2<f64> = c.mapv(|v| (-v / denom).exp());

    let a = 1.0 / k as f64;
    let b = 1.0 / n as f64;
    let mut u = Array1::from_elem(k, a);
    let mut v = Array1::from_elem(n, b);
    for it in 0..cfg.n_iter {
        let kv = kernel.dot(&v);
        u = check_scaling(kv.mapv(|s| a / s), "row scaling", it)?;
        let ktu = kernel.t().dot(&u);
        v = check_scaling(ktu.mapv(|s| b / s), "column scaling", it)?;
    }
    let mut plan = kernel;
    Zip::indexed(&mut plan).for_each(|(i, j), t| *t *= u[i] * v[j]);
    let plan = TransportPlan(plan);
    let residual = plan.marginal_residual();
    let cost = plan.cost(cost);
    if !cost.is_finite() {
        return Err(Error::numeric("sinkhorn", cfg.n_iter, "non-finite transport cost"));
    }
    Ok(SinkhornOutput { plan, cost, residual })
}

fn check_scaling(s: Array1<f64>, what: &str, it: usize) -> Result<Array1<f64>> {
    if s.iter().all(|v| v.is_finite()) {
        Ok(s)
    } else {
        Err(Error::numeric(
            "sinkhorn",
            it,
            format!("{what} is not finite (kernel underflow)"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::{exact_assignment_w1, l1_cost_matrix};
    use crate::rng::stream;
    use ndarray::array;
    use rand::Rng as _;

    fn cfg(epsilon: f64, n_iter: usize) -> SinkhornConfig {
        SinkhornConfig {
            epsilon,
            n_iter,
            normalize: true,
        }
    }

    #[test]
    fn forced_coupling() {
        let c = CostMatrix::new(array![[0.7]]).unwrap();
        let out = sinkhorn_plan(&c, &cfg(0.1, 3)).unwrap();
        assert_eq!(out.plan.view(), array![[1.0]]);
        assert_eq!(out.cost, 0.7);
    }

    #[test]
    fn swap_costs_near_zero() {
        let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let out = sinkhorn_plan(&c, &cfg(0.01, 200)).unwrap();
        assert!(out.cost <= 0.05, "cost {}", out.cost);
    }

    #[test]
    fn residual_small_on_random_costs() {
        let mut rng = stream(3, 0);
        for _ in 0..20 {
            let c = CostMatrix::new(Array2::from_shape_fn((8, 8), |_| rng.random::<f64>())).unwrap();
            let out = sinkhorn_plan(&c, &cfg(1.0, 10)).unwrap();
            assert!(out.residual <= 1e-6, "residual {}", out.residual);
        }
    }

    #[test]
    fn regularized_cost_dominates_optimum() {
        let mut rng = stream(4, 0);
        for _ in 0..20 {
            let src = Array2::from_shape_fn((8, 2), |_| rng.random::<f64>());
            let dst = Array2::from_shape_fn((8, 2), |_| rng.random::<f64>());
            let c = l1_cost_matrix(src.view(), dst.view()).unwrap();
            let out = sinkhorn_plan(&c, &cfg(0.01, 500)).unwrap();
            let (exact, _) = exact_assignment_w1(src.view(), dst.view()).unwrap();
            assert!(exact <= out.cost * 1.05 + 1e-12);
            assert!(out.cost >= exact - 1e-9 - out.residual * 16.0);
        }
    }

    #[test]
    fn underflow_is_reported() {
        let c = CostMatrix::new(array![[0.0, 1e6], [1e6, 1e6]]).unwrap();
        let err = sinkhorn_plan(
            &c,
            &SinkhornConfig {
                epsilon: 1e-3,
                n_iter: 5,
                normalize: false,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::NumericFailure { step: 0, .. }), "{err}");
    }

    #[test]
    fn zero_costs_use_floor() {
        let c = CostMatrix::new(Array2::zeros((3, 3))).unwrap();
        let out = sinkhorn_plan(&c, &cfg(0.05, 5)).unwrap();
        assert!(out.residual < 1e-15);
        assert_eq!(out.cost, 0.0);
    }

    #[test]
    fn rejects_bad_config() {
        let c = CostMatrix::new(array![[1.0]]).unwrap();
        assert!(sinkhorn_plan(&c, &cfg(0.0, 5)).is_err());
        assert!(sinkhorn_plan(&c, &cfg(1.0, 0)).is_err());
    }
}
