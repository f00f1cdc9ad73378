//! Conditional distribution estimation from i.i.d. samples.
//!
//! The crate covers the full pipeline:
//!
//! * [`data`]: datasets, uniformly weighted discrete measures and the
//!   clustered empirical measure with its Lebesgue fallback.
//! * [`synthetic`]: ground-truth kernels with samplers and analytic CDFs.
//! * [`nns`]: exact k-nearest-neighbor search and the randomized binary
//!   space partitioning (RBSP) approximate search.
//! * [`estimators`]: the r-box and k-NN raw estimators and rate-optimal
//!   hyperparameters.
//! * [`ot`]: Wasserstein-1 tooling (closed forms, CDF quadrature, Sinkhorn,
//!   exact assignment).
//! * [`neural`]: the Lipschitz-regular atom network, its training loop and
//!   diagnostics.
//! * [`harness`]: experiment drivers used by the CLI and the acceptance suite.

mod binio;
pub mod data;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod neural;
pub mod nns;
pub mod ot;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};
