use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Affine map `x -> W x + b` with `W: out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    /// Weights and biases drawn from `U[-a, a]` with `a = n_in^{-1/2}`.
    pub fn fan_in_uniform(n_out: usize, n_in: usize, rng: &mut Rng) -> Self {
        let a = 1.0 / (n_in as f64).sqrt();
        Self {
            w: Array2::from_shape_fn((n_out, n_in), |_| rng.random_range(-a..=a)),
            b: Array1::from_shape_fn(n_out, |_| rng.random_range(-a..=a)),
        }
    }

    /// Weights from `U[-1/n_in, 1/n_in]`, so every row has ℓ1 norm below 1,
    /// and biases from `U[-1, 1]`.
    pub fn output_init(n_out: usize, n_in: usize, rng: &mut Rng) -> Self {
        let a = 1.0 / n_in as f64;
        Self {
            w: Array2::from_shape_fn((n_out, n_in), |_| rng.random_range(-a..=a)),
            b: Array1::from_shape_fn(n_out, |_| rng.random_range(-1.0..=1.0)),
        }
    }

    pub fn zeros(n_out: usize, n_in: usize) -> Self {
        Self {
            w: Array2::zeros((n_out, n_in)),
            b: Array1::zeros(n_out),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.w.nrows(), self.w.ncols())
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + self.b.len()
    }

    /// Rows of `x` mapped through the layer: `x W^T + b`.
    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(self.b.iter()).all(|v| v.is_finite())
    }
}

/// A map from feature points to `n_atom` equally weighted atoms in `R^{d_Y}`.
pub trait AtomMap {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn n_atom(&self) -> usize;

    /// Atoms at each row of `xs`, flattened as `[atom][coord]` per row.
    fn atoms_batch(&self, xs: ArrayView2<f64>) -> Result<Array2<f64>>;

    /// `n_atom x d_Y` atoms at one point.
    fn atoms(&self, x: &[f64]) -> Result<Array2<f64>> {
        let xs = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::invalid(e.to_string()))?;
        let flat = self.atoms_batch(xs)?;
        let flat = flat.row(0).to_owned();
        Ok(flat
            .into_shape_with_order((self.n_atom(), self.dim_y()))
            .expect("atom count times dimension matches output width"))
    }
}

/// A trainable atom network with hand-written reverse mode.
///
/// Trainable tensors are exposed as a list of [`Dense`] blocks so the
/// optimizer and checkpoint code stay architecture agnostic.
pub trait AtomNet: AtomMap {
    type Cache;

    fn forward(&self, xs: ArrayView2<f64>) -> Result<(Array2<f64>, Self::Cache)>;

    /// Gradients of `sum(grad_out * output)` with normalizers held fixed.
    fn backward(&self, cache: &Self::Cache, grad_out: ArrayView2<f64>) -> Result<Vec<Dense>>;

    fn layers(&self) -> &[Dense];
    fn layers_mut(&mut self) -> &mut [Dense];

    /// Refresh non-trainable state after a parameter update.
    fn update_normalizers(&mut self) -> Result<()>;
}

pub(crate) fn check_input(xs: ArrayView2<f64>, dim_x: usize) -> Result<()> {
    if xs.ncols() != dim_x {
        return Err(Error::invalid(format!("input has {} columns, network expects {dim_x}", xs.ncols())));
    }
    Ok(())
}

pub(crate) fn check_output(out: &Array2<f64>, component: &str) -> Result<()> {
    if out.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::numeric(component, 0, "non-finite network output"))
    }
}
