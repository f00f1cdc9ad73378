use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::EvalMeasure;
use crate::error::{Error, Result};
use crate::estimators::{optimal_k, optimal_r, RBoxScheme};
use crate::rng::stream;
use crate::synthetic::KernelSpec;

/// Stream id reserved for drawing Monte Carlo evaluation points.
const EVAL_TASK: u64 = 0xE7A1;

/// Human-editable kernel selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelChoice {
    IntroUniform,
    Model1,
    Model2 {
        #[serde(default = "unit")]
        threshold: f64,
    },
    /// Model 3 with coefficients frozen by `seed`.
    Model3 {
        #[serde(default)]
        seed: u64,
    },
}

fn unit() -> f64 {
    1.0
}

impl KernelChoice {
    pub fn spec(&self) -> KernelSpec {
        match self {
            KernelChoice::IntroUniform => KernelSpec::IntroUniform,
            KernelChoice::Model1 => KernelSpec::Model1,
            KernelChoice::Model2 { threshold } => KernelSpec::Model2 { threshold: *threshold },
            KernelChoice::Model3 { seed } => KernelSpec::model3(*seed),
        }
    }
}

/// Estimator family with its hyperparameter either fixed or set per `M`
/// by the rate-optimal rule `scale * M^(...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeFamily {
    Knn {
        #[serde(default)]
        k: Option<usize>,
        #[serde(default = "unit")]
        scale: f64,
    },
    #[serde(rename = "rbox")]
    RBox {
        #[serde(default)]
        r: Option<f64>,
        #[serde(default = "unit")]
        scale: f64,
    },
}

/// A family member with its hyperparameter fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolved {
    Knn(usize),
    RBox(RBoxScheme),
}

impl Resolved {
    /// `k` or `r` as a number.
    pub fn param(&self) -> f64 {
        match self {
            Resolved::Knn(k) => *k as f64,
            Resolved::RBox(s) => s.r(),
        }
    }
}

impl SchemeFamily {
    pub fn knn() -> Self {
        SchemeFamily::Knn { k: None, scale: 1.0 }
    }

    pub fn rbox() -> Self {
        SchemeFamily::RBox { r: None, scale: 1.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SchemeFamily::Knn { .. } => "knn",
            SchemeFamily::RBox { .. } => "rbox",
        }
    }

    pub fn resolve(&self, m: usize, dim_x: usize, dim_y: usize) -> Result<Resolved> {
        match self {
            SchemeFamily::Knn { k: Some(k), .. } => {
                if *k == 0 || *k > m {
                    return Err(Error::invalid(format!("k = {k} must lie in [1, {m}]")));
                }
                Ok(Resolved::Knn(*k))
            }
            SchemeFamily::Knn { k: None, scale } => Ok(Resolved::Knn(optimal_k(m, dim_x, dim_y, *scale)?)),
            SchemeFamily::RBox { r: Some(r), .. } => Ok(Resolved::RBox(RBoxScheme::new(*r)?)),
            SchemeFamily::RBox { r: None, scale } => Ok(Resolved::RBox(RBoxScheme::new(optimal_r(m, dim_x, dim_y, *scale)?)?)),
        }
    }
}

/// Realization of the averaging measure over the feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Grid points for `d_X = 1`.
    pub grid_points: usize,
    /// Uniform draws for `d_X > 1`.
    pub monte_carlo_points: usize,
    pub monte_carlo_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            grid_points: 201,
            monte_carlo_points: 2000,
            monte_carlo_seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn measure(&self, dim_x: usize) -> Result<EvalMeasure> {
        if dim_x == 1 {
            EvalMeasure::grid(1, self.grid_points)
        } else {
            EvalMeasure::monte_carlo(dim_x, self.monte_carlo_points, &mut stream(self.monte_carlo_seed, EVAL_TASK))
        }
    }
}

/// Constants of the r-box variance bound: a lower bound on the feature
/// density and the domination constant of the averaging measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityConstants {
    pub c_lower: f64,
    pub c_upper: f64,
}

impl Default for DensityConstants {
    fn default() -> Self {
        Self {
            c_lower: 1.0,
            c_upper: 1.0,
        }
    }
}

/// Settings shared by the rate, variance and profile experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: KernelChoice,
    pub scheme: SchemeFamily,
    /// Sample sizes.
    pub ms: Vec<usize>,
    pub seeds: Vec<u64>,
    pub eval: EvalConfig,
    pub density: DensityConstants,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kernel: KernelChoice::IntroUniform,
            scheme: SchemeFamily::knn(),
            ms: vec![1024, 2048, 4096, 8192, 16384, 32768, 65536],
            seeds: (0..10).collect(),
            eval: EvalConfig::default(),
            density: DensityConstants::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ms.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid("sample size and seed lists must be nonempty"));
        }
        if self.ms.iter().any(|&m| m < 2) {
            return Err(Error::invalid("every sample size must be at least 2"));
        }
        if self.eval.grid_points < 2 || self.eval.monte_carlo_points == 0 {
            return Err(Error::invalid("evaluation measure needs at least 2 grid points and 1 draw"));
        }
        let d = self.density;
        if !(d.c_lower > 0.0 && d.c_upper > 0.0 && d.c_lower.is_finite() && d.c_upper.is_finite()) {
            return Err(Error::invalid("density constants must be positive"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::invalid("output directory must be set"));
        }
        Ok(())
    }

    /// Creates the output directory if needed and returns it.
    pub fn prepare_output_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.output_dir)?;
        if !self.output_dir.is_dir() {
            return Err(Error::invalid(format!("{} is not a directory", self.output_dir.display())));
        }
        Ok(&self.output_dir)
    }
}
