use ndarray::{Array1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default momentum of the normalizer updates during training: the weight
/// kept on the previous estimate, so each fresh estimate enters with
/// weight `1e-3`.
pub const DEFAULT_TAU: f64 = 1.0 - 1e-3;

/// Running estimate of `2 / sigma_max(W)^2` and the top right singular
/// direction of a square weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerIterState {
    pub h: f64,
    pub u: Array1<f64>,
    pub tau: f64,
}

impl PowerIterState {
    /// State after `iters` plain power iterations (momentum 0) from `u0`.
    pub fn warm_start(w: ArrayView2<f64>, u0: Array1<f64>, iters: usize, tau: f64) -> Result<Self> {
        let norm = l2(&u0);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("initial power-iteration vector must be nonzero"));
        }
        let mut state = Self {
            h: 1.0,
            u: u0 / norm,
            tau: 0.0,
        };
        for step in 0..iters.max(1) {
            power_iter_update(w, &mut state).map_err(|e| relabel(e, step))?;
        }
        state.tau = tau;
        Ok(state)
    }
}

fn relabel(e: Error, step: usize) -> Error {
    match e {
        Error::NumericFailure { component, detail, .. } => Error::NumericFailure { component, step, detail },
        other => other,
    }
}

fn l2(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// One power-iteration step with momentum.
///
/// `v = W u / |W u|`, `u' = W^T v / |W^T v|`, `h = 2 / (sum(W u' * v))^2`,
/// then `h <- tau h + (1 - tau) h_new` and `u <- tau u + (1 - tau) u'`,
/// renormalized to unit length.
pub fn power_iter_update(w: ArrayView2<f64>, state: &mut PowerIterState) -> Result<()> {
    if w.ncols() != state.u.len() {
        return Err(Error::invalid(format!(
            "power iteration vector has length {}, matrix has {} columns",
            state.u.len(),
            w.ncols()
        )));
    }
    let wu = w.dot(&state.u);
    let n1 = l2(&wu);
    if !(n1 > 0.0 && n1.is_finite()) {
        return Err(Error::numeric("power iteration", 0, "W u vanished"));
    }
    let v = wu / n1;
    let wtv = w.t().dot(&v);
    let n2 = l2(&wtv);
    if !(n2 > 0.0 && n2.is_finite()) {
        return Err(Error::numeric("power iteration", 0, "W^T v vanished"));
    }
    let u = wtv / n2;
    let sigma = w.dot(&u).dot(&v);
    let h = 2.0 / (sigma * sigma);
    if !h.is_finite() {
        return Err(Error::numeric("power iteration", 0, "singular value estimate is zero"));
    }
    let tau = state.tau;
    state.h = tau * state.h + (1.0 - tau) * h;
    let blended = &state.u * tau + &u * (1.0 - tau);
    let nb = l2(&blended);
    state.u = if nb > 0.0 { blended / nb } else { u };
    Ok(())
}

/// Momentum-tracked row ℓ1 norms of a weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowNormState {
    pub values: Array1<f64>,
    pub tau: f64,
}

impl RowNormState {
    pub fn exact(w: ArrayView2<f64>, tau: f64) -> Self {
        Self {
            values: row_l1(w),
            tau,
        }
    }

    pub fn update(&mut self, w: ArrayView2<f64>) -> Result<()> {
        let fresh = row_l1(w);
        if fresh.len() != self.values.len() {
            return Err(Error::invalid("row-norm state does not match matrix"));
        }
        if fresh.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("row norms", 0, "non-finite weight row"));
        }
        self.values = &self.values * self.tau + &fresh * (1.0 - self.tau);
        Ok(())
    }

    /// `min(1, 1 / r)` per row; rows with zero tracked norm get 1.
    pub fn scale(&self) -> Array1<f64> {
        self.values.mapv(|r| if r > 1.0 { 1.0 / r } else { 1.0 })
    }
}

fn row_l1(w: ArrayView2<f64>) -> Array1<f64> {
    w.map_axis(Axis(1), |r| r.iter().map(|v| v.abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use ndarray::{array, Array2};
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn diagonal_fixed_point() {
        let w = array![[2.0, 0.0], [0.0, 1.0]];
        let mut s = PowerIterState {
            h: 7.0,
            u: array![1.0, 0.0],
            tau: 0.0,
        };
        power_iter_update(w.view(), &mut s).unwrap();
        assert_eq!(s.h, 0.5);
        assert_eq!(s.u, array![1.0, 0.0]);
    }

    #[test]
    fn identity_gives_two() {
        let w = Array2::<f64>::eye(3);
        let mut s = PowerIterState {
            h: 1.0,
            u: array![0.6, 0.0, 0.8],
            tau: 0.0,
        };
        power_iter_update(w.view(), &mut s).unwrap();
        assert!((s.h - 2.0).abs() < 1e-15);
    }

    #[test]
    fn momentum_blend() {
        let w = Array2::<f64>::eye(2);
        let mut s = PowerIterState {
            h: 4.0,
            u: array![1.0, 0.0],
            tau: 0.25,
        };
        power_iter_update(w.view(), &mut s).unwrap();
        assert!((s.h - (0.25 * 4.0 + 0.75 * 2.0)).abs() < 1e-15);
        assert!((l2(&s.u) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_matrix_fails() {
        let mut s = PowerIterState {
            h: 1.0,
            u: array![1.0, 0.0],
            tau: 0.0,
        };
        assert!(matches!(
            power_iter_update(Array2::zeros((2, 2)).view(), &mut s),
            Err(Error::NumericFailure { .. })
        ));
    }

    #[test]
    fn converges_to_spectral_norm() {
        let mut rng = stream(9, 0);
        let w = Array2::from_shape_fn((12, 12), |_| StandardNormal.sample(&mut rng));
        let u0 = Array1::from_shape_fn(12, |_| StandardNormal.sample(&mut rng));
        let mut s = PowerIterState::warm_start(w.view(), u0, 2000, 1e-3).unwrap();
        for _ in 0..1000 {
            power_iter_update(w.view(), &mut s).unwrap();
        }
        let sigma = nalgebra::DMatrix::from_fn(12, 12, |i, j| w[[i, j]]).singular_values().max();
        assert!((s.h * sigma * sigma - 2.0).abs() < 1e-9);
    }

    #[test]
    fn row_norms() {
        let w = array![[1.0, -2.0], [0.25, 0.25]];
        let mut s = RowNormState::exact(w.view(), 0.5);
        assert_eq!(s.values, array![3.0, 0.5]);
        assert_eq!(s.scale(), array![1.0 / 3.0, 1.0]);
        s.update(Array2::zeros((2, 2)).view()).unwrap();
        assert_eq!(s.values, array![1.5, 0.25]);
    }
}
