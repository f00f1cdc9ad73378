use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::Rng as _;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nns::{anns_knn, knn_among, part_queries, rbsp_partition, Norm, RbspParams};
use crate::rng::{stream, Rng};

/// `m` features drawn uniformly from `[0,1]^dim` with a zero target.
pub fn uniform_features(m: usize, dim: usize, seed: u64) -> Result<Dataset> {
    let mut rng = stream(seed, 0);
    let xs = Array2::from_shape_fn((m, dim), |_| rng.random::<f64>());
    Dataset::new(xs, Array2::zeros((m, 1)), seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub run: usize,
    pub delta: f64,
}

/// Per-run Δ values plus total search wall time.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnBenchmark {
    pub runs: Vec<DeltaRow>,
    pub wall_ms_exact: f64,
    pub wall_ms_anns: f64,
}

/// `runs` independent Δ measurements on fixed data. Each run builds a
/// fresh partition and averages over `queries_per_part` queries per part.
/// Δ values equal [`crate::nns::anns_delta`] on the same stream.
pub fn anns_benchmark(data: &Dataset, params: &RbspParams, k: usize, runs: usize, rng: &mut Rng) -> Result<AnnBenchmark> {
    let all: Vec<usize> = (0..data.len()).collect();
    let (mut exact_time, mut anns_time) = (Duration::ZERO, Duration::ZERO);
    let mut rows = Vec::with_capacity(runs);
    for run in 0..runs {
        let parts = rbsp_partition(data, params, rng)?;
        let queries = part_queries(&parts, params.queries_per_part, rng);
        if queries.is_empty() {
            return Err(Error::invalid("benchmark run produced no queries"));
        }
        let mut total = 0.0;
        for q in &queries {
            let t = Instant::now();
            let approx = anns_knn(&parts, data, q, k, Norm::L1, rng)?;
            anns_time += t.elapsed();
            let t = Instant::now();
            let exact = knn_among(data, &all, q, k, Norm::L1, rng)?;
            exact_time += t.elapsed();
            total += mean_l1(data, &approx, q) - mean_l1(data, &exact, q);
        }
        rows.push(DeltaRow {
            run,
            delta: total / queries.len() as f64,
        });
    }
    Ok(AnnBenchmark {
        runs: rows,
        wall_ms_exact: exact_time.as_secs_f64() * 1e3,
        wall_ms_anns: anns_time.as_secs_f64() * 1e3,
    })
}

fn mean_l1(data: &Dataset, idx: &[usize], query: &[f64]) -> f64 {
    idx.iter().map(|&m| Norm::L1.distance(data.x(m), query)).sum::<f64>() / idx.len() as f64
}

/// Linear-interpolation quantile of `values` at `p` in `[0, 1]`.
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("quantile needs values and p in [0, 1]"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    Ok(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

/// One summary line of a Δ benchmark.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnSummaryRow {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "d_X")]
    pub d_x: usize,
    pub k: usize,
    pub depth: usize,
    pub seed: u64,
    pub delta_mean: f64,
    pub delta_p50: f64,
    pub delta_p95: f64,
    pub wall_ms_exact: f64,
    pub wall_ms_anns: f64,
}

impl AnnSummaryRow {
    pub fn new(data: &Dataset, params: &RbspParams, k: usize, seed: u64, bench: &AnnBenchmark) -> Result<Self> {
        let deltas: Vec<f64> = bench.runs.iter().map(|r| r.delta).collect();
        Ok(Self {
            m: data.len(),
            d_x: data.dim_x(),
            k,
            depth: params.depth,
            seed,
            delta_mean: deltas.iter().sum::<f64>() / deltas.len().max(1) as f64,
            delta_p50: quantile(&deltas, 0.5)?,
            delta_p95: quantile(&deltas, 0.95)?,
            wall_ms_exact: bench.wall_ms_exact,
            wall_ms_anns: bench.wall_ms_anns,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nns::anns_delta;

    #[test]
    fn depth_zero_is_exact() {
        let data = uniform_features(2000, 2, 0).unwrap();
        let params = RbspParams {
            depth: 0,
            ..RbspParams::for_k(50)
        };
        let b = anns_benchmark(&data, &params, 50, 3, &mut stream(0, 1)).unwrap();
        assert!(b.runs.iter().all(|r| r.delta == 0.0));
    }

    #[test]
    fn delta_nonnegative() {
        let data = uniform_features(4000, 3, 1).unwrap();
        let b = anns_benchmark(&data, &RbspParams::for_k(40), 40, 4, &mut stream(1, 1)).unwrap();
        assert!(b.runs.iter().all(|r| r.delta >= -1e-12));
    }

    #[test]
    fn matches_anns_delta_on_same_stream() {
        let data = uniform_features(3000, 2, 2).unwrap();
        let params = RbspParams::for_k(30);
        let b = anns_benchmark(&data, &params, 30, 2, &mut stream(2, 1)).unwrap();
        let mut rng = stream(2, 1);
        for row in &b.runs {
            let parts = rbsp_partition(&data, &params, &mut rng).unwrap();
            let qs = part_queries(&parts, params.queries_per_part, &mut rng);
            assert_eq!(row.delta, anns_delta(&data, &parts, &qs, 30, &mut rng).unwrap());
        }
    }

    #[test]
    fn quantile_interpolates() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(quantile(&v, 1.0).unwrap(), 4.0);
        assert_eq!(quantile(&v, 0.5).unwrap(), 2.5);
        assert!(quantile(&[], 0.5).is_err());
        assert!(quantile(&v, 1.5).is_err());
    }
}
