//! Experiment drivers: rate curves, variance checks, per-x error
//! profiles, projected-error histograms, partition search benchmarks and
//! the worst-case bound, plus CSV and manifest output.
//!
//! Errors are `W` distances to the analytic truth. One-dimensional laws
//! are compared through their CDFs on a 4,001-point trapezoid grid;
//! Model 3 laws are compared along random ℓ1-normalized directions.

mod ann;
mod bound;
mod config;
mod metric;
mod output;
mod profile;
mod rates;

pub use ann::{anns_benchmark, quantile, uniform_features, AnnBenchmark, AnnSummaryRow, DeltaRow};
pub use bound::{query_coverage_w1, sup_w_bound};
pub use config::{DensityConstants, EvalConfig, ExperimentConfig, KernelChoice, Resolved, SchemeFamily};
pub use metric::{projected_w1, w1_to_truth, Cdf1d, Projected, CDF_CELLS};
pub use output::{
    write_csv, write_manifest, AtomRow, CsvRow, DerivativeRow, EstimateRow, LossRow, RunManifest, SampleRow,
};
pub use profile::{
    error_vs_x, projected_error_histogram, HistogramRow, HistogramSpec, PointEstimator, ProfileRow, ProjectedErrorRow,
    ProjectedHistogram,
};
pub use rates::{
    estimate_at, fit_loglog, fit_loglog_slope, integrated_error, knn_variance_bound, mean_error_curve, pointwise_error,
    random_l1_direction, rbox_variance_bound, variance_check, CurveRow, SlopeFit, VarianceRow,
};
