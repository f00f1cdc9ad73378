//! Synthetic kernels with known conditional laws.
//!
//! Feature points are always stored in the unit box. Model 3 draws its
//! features from `[-1/2, 1/2]^3`; its samples are stored shifted by `+1/2`
//! and every method here takes the stored coordinate.

use std::f64::consts::{PI, SQRT_2};

use ndarray::{Array2, ArrayView1};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Standard normal CDF; absolute error below 1e-15.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Frozen random coefficients of Model 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model3Params {
    pub seed: u64,
    pub a: [[f64; 3]; 3],
    pub a_alt: [[f64; 3]; 3],
    /// `v[i][j]` is the row vector giving `Σ_x[i][j] = v[i][j] · x`.
    pub v: [[[f64; 3]; 3]; 3],
    pub v_alt: [[[f64; 3]; 3]; 3],
}

/// Draws `A`, `A'`, `{v_ij}`, `{v'_ij}` from the standard normal, in that
/// order, from a ChaCha8 generator keyed by `seed`.
pub fn frozen_model3_params(seed: u64) -> Model3Params {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut mat = || [[normal(), normal(), normal()], [normal(), normal(), normal()], [normal(), normal(), normal()]];
    let a = mat();
    let a_alt = mat();
    let mut vecs = || {
        let mut out = [[[0.0; 3]; 3]; 3];
        for row in out.iter_mut() {
            for cell in row.iter_mut() {
                *cell = [normal(), normal(), normal()];
            }
        }
        out
    };
    let v = vecs();
    let v_alt = vecs();
    Model3Params { seed, a, a_alt, v, v_alt }
}

impl Model3Params {
    /// Mean `cos(A x)` and scale matrix `cos(Σ_x)` of one mixture component,
    /// `x` in centered coordinates.
    fn component(&self, alt: bool, x: [f64; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
        let (a, v) = if alt { (&self.a_alt, &self.v_alt) } else { (&self.a, &self.v) };
        let mut mean = [0.0; 3];
        let mut scale = [[0.0; 3]; 3];
        for i in 0..3 {
            mean[i] = dot3(a[i], x).cos();
            for j in 0..3 {
                scale[i][j] = dot3(v[i][j], x).cos();
            }
        }
        (mean, scale)
    }
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// A ground-truth kernel `x -> P_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `P_x = Uniform([x, x + 1/2])`, `X ~ Uniform([0, 1])`.
    IntroUniform,
    /// Symmetric two-Gaussian mixture with `x`-dependent mean and scale.
    Model1,
    /// `Y = 0.5 * 1_{[0, threshold)}(X) + 0.5 U`.
    Model2 { threshold: f64 },
    /// Three-dimensional Gaussian mixture with frozen random coefficients.
    Model3(Box<Model3Params>),
}

impl KernelSpec {
    pub fn model2() -> Self {
        KernelSpec::Model2 { threshold: 1.0 }
    }

    pub fn model3(seed: u64) -> Self {
        KernelSpec::Model3(Box::new(frozen_model3_params(seed)))
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::IntroUniform => "intro_uniform",
            KernelSpec::Model1 => "model1",
            KernelSpec::Model2 { .. } => "model2",
            KernelSpec::Model3(_) => "model3",
        }
    }

    pub fn dim_x(&self) -> usize {
        match self {
            KernelSpec::Model3(_) => 3,
            _ => 1,
        }
    }

    pub fn dim_y(&self) -> usize {
        self.dim_x()
    }

    /// Lipschitz constant of `x -> P_x` under `W` and the sup-norm, when known.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        match self {
            KernelSpec::IntroUniform => Some(1.0),
            _ => None,
        }
    }

    /// Draws one target given the stored feature point.
    pub fn sample_target(&self, x: ArrayView1<f64>, rng: &mut Rng) -> Vec<f64> {
        match self {
            KernelSpec::IntroUniform => vec![x[0] + 0.5 * rng.random::<f64>()],
            KernelSpec::Model1 => {
                let (mu, sigma) = model1_params(x[0]);
                let z: f64 = StandardNormal.sample(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                vec![sign * (mu + sigma * z)]
            }
            KernelSpec::Model2 { threshold } => {
                let lo = model2_lower(x[0], *threshold);
                vec![lo + 0.5 * rng.random::<f64>()]
            }
            KernelSpec::Model3(p) => {
                let alt = !rng.random::<bool>();
                let (mean, scale) = p.component(alt, centered(x));
                let w: [f64; 3] = [
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                ];
                (0..3).map(|i| mean[i] + 0.1 * dot3(scale[i], w)).collect()
            }
        }
    }

    /// Exact CDF of `Y | X = x` at `t` for the one-dimensional kernels.
    pub fn true_cdf_1d(&self, x: f64, t: f64) -> Result<f64> {
        match self {
            KernelSpec::IntroUniform => Ok(uniform_cdf(x, x + 0.5, t)),
            KernelSpec::Model1 => {
                let (mu, sigma) = model1_params(x);
                if sigma == 0.0 {
                    Ok(0.5 * step(t, mu) + 0.5 * step(t, -mu))
                } else {
                    Ok(0.5 * normal_cdf((t - mu) / sigma) + 0.5 * normal_cdf((t + mu) / sigma))
                }
            }
            KernelSpec::Model2 { threshold } => {
                let lo = model2_lower(x, *threshold);
                Ok(uniform_cdf(lo, lo + 0.5, t))
            }
            KernelSpec::Model3(_) => Err(Error::invalid("true_cdf_1d needs a one-dimensional target kernel")),
        }
    }

    /// Interval carrying all (or all but a negligible tail of) the mass of
    /// `P_x` for the one-dimensional kernels.
    pub fn support_1d(&self, x: f64) -> Result<(f64, f64)> {
        match self {
            KernelSpec::IntroUniform => Ok((x, x + 0.5)),
            KernelSpec::Model1 => {
                let (mu, sigma) = model1_params(x);
                Ok((-mu - 8.0 * sigma, mu + 8.0 * sigma))
            }
            KernelSpec::Model2 { .. } => Ok((0.0, 1.0)),
            KernelSpec::Model3(_) => Err(Error::invalid("support_1d needs a one-dimensional target kernel")),
        }
    }

    /// CDF of `a · Y | X = x` for Model 3; `a` must have unit ℓ1 norm.
    pub fn projected_cdf_3d(&self, x: ArrayView1<f64>, a: [f64; 3], t: f64) -> Result<f64> {
        let (comps, _) = self.projected_components(x, a)?;
        Ok(comps.iter().map(|&(m, s)| 0.5 * gaussian_or_step(t, m, s)).sum())
    }

    /// Means and standard deviations of the two projected components, plus
    /// an interval that holds essentially all of their mass.
    pub fn projected_components(&self, x: ArrayView1<f64>, a: [f64; 3]) -> Result<([(f64, f64); 2], (f64, f64))> {
        let KernelSpec::Model3(p) = self else {
            return Err(Error::invalid("projected_cdf_3d needs the Model 3 kernel"));
        };
        let norm1: f64 = a.iter().map(|v| v.abs()).sum();
        if (norm1 - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("projection vector has l1 norm {norm1}, expected 1")));
        }
        if x.len() != 3 {
            return Err(Error::invalid("Model 3 feature points are three-dimensional"));
        }
        let xc = centered(x);
        let mut comps = [(0.0, 0.0); 2];
        for (slot, alt) in comps.iter_mut().zip([false, true]) {
            let (mean, scale) = p.component(alt, xc);
            let m = dot3(a, mean);
            // cos(Σ_x)^T a
            let col: Vec<f64> = (0..3).map(|j| (0..3).map(|i| scale[i][j] * a[i]).sum()).collect();
            let s = 0.1 * col.iter().map(|c| c * c).sum::<f64>().sqrt();
            *slot = (m, s);
        }
        let lo = comps.iter().map(|(m, s)| m - 8.0 * s).fold(f64::INFINITY, f64::min);
        let hi = comps.iter().map(|(m, s)| m + 8.0 * s).fold(f64::NEG_INFINITY, f64::max);
        Ok((comps, (lo, hi)))
    }
}

fn centered(x: ArrayView1<f64>) -> [f64; 3] {
    [x[0] - 0.5, x[1] - 0.5, x[2] - 0.5]
}

/// Mean and scale of the Model 1 components at `x`.
pub fn model1_params(x: f64) -> (f64, f64) {
    let c = (2.0 * PI * x).cos();
    (0.1 * (1.0 + c) + 0.5, 0.12 * (1.0 - c).abs())
}

fn model2_lower(x: f64, threshold: f64) -> f64 {
    if (0.0..threshold).contains(&x) {
        0.5
    } else {
        0.0
    }
}

fn uniform_cdf(lo: f64, hi: f64, t: f64) -> f64 {
    ((t - lo) / (hi - lo)).clamp(0.0, 1.0)
}

fn step(t: f64, at: f64) -> f64 {
    if t >= at {
        1.0
    } else {
        0.0
    }
}

fn gaussian_or_step(t: f64, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        step(t, mean)
    } else {
        normal_cdf((t - mean) / sd)
    }
}

/// `m` i.i.d. draws of `(X, Y)`; deterministic given `seed`.
pub fn sample_dataset(kernel: &KernelSpec, m: usize, seed: u64) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut rng = rng::stream(seed, 0);
    let (dx, dy) = (kernel.dim_x(), kernel.dim_y());
    let mut xs = Array2::zeros((m, dx));
    let mut ys = Array2::zeros((m, dy));
    for i in 0..m {
        for d in 0..dx {
            xs[[i, d]] = rng.random::<f64>();
        }
        let y = kernel.sample_target(xs.row(i), &mut rng);
        for d in 0..dy {
            ys[[i, d]] = y[d];
        }
    }
    Dataset::new(xs, ys, seed)
}
