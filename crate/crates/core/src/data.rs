//! Samples, discrete measures and evaluation measures.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;

use crate::binio::{expect_eof, read_array, read_block, read_exact, write_f64s};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// `M` feature/target pairs with per-axis sorted index arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    xs: Array2<f64>,
    ys: Array2<f64>,
    sorted_idx: Vec<Vec<usize>>,
    seed: u64,
}

impl Dataset {
    /// Builds a dataset; feature coordinates must lie in `[0, 1]`.
    pub fn new(xs: Array2<f64>, ys: Array2<f64>, seed: u64) -> Result<Self> {
        if xs.nrows() != ys.nrows() {
            return Err(Error::invalid(format!(
                "feature rows ({}) and target rows ({}) differ",
                xs.nrows(),
                ys.nrows()
            )));
        }
        if xs.nrows() == 0 || xs.ncols() == 0 || ys.ncols() == 0 {
            return Err(Error::invalid("dataset must have at least one sample and nonzero dimensions"));
        }
        if let Some(bad) = xs.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("feature coordinate {bad} outside [0, 1]")));
        }
        if ys.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite target coordinate"));
        }
        let sorted_idx = (0..xs.ncols())
            .map(|d| {
                let col = xs.column(d);
                let mut idx: Vec<usize> = (0..xs.nrows()).collect();
                idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Ok(Self { xs, ys, sorted_idx, seed })
    }

    pub fn len(&self) -> usize {
        self.xs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.nrows() == 0
    }

    pub fn dim_x(&self) -> usize {
        self.xs.ncols()
    }

    pub fn dim_y(&self) -> usize {
        self.ys.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn xs(&self) -> ArrayView2<'_, f64> {
        self.xs.view()
    }

    pub fn ys(&self) -> ArrayView2<'_, f64> {
        self.ys.view()
    }

    pub fn x(&self, m: usize) -> ArrayView1<'_, f64> {
        self.xs.row(m)
    }

    pub fn y(&self, m: usize) -> ArrayView1<'_, f64> {
        self.ys.row(m)
    }

    /// Indices ordered by increasing feature coordinate along `axis`.
    pub fn sorted_idx(&self, axis: usize) -> &[usize] {
        &self.sorted_idx[axis]
    }
}

/// A uniformly weighted atom list, or the Lebesgue measure on the unit box
/// used when a cluster is empty.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscreteMeasure {
    /// One atom per row, each with weight `1/n`.
    Atoms(Array2<f64>),
    LebesgueBox { dim: usize },
}

impl DiscreteMeasure {
    pub fn atoms(points: Array2<f64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::invalid("atom list must be nonempty"));
        }
        Ok(DiscreteMeasure::Atoms(points))
    }

    pub fn dim(&self) -> usize {
        match self {
            DiscreteMeasure::Atoms(p) => p.ncols(),
            DiscreteMeasure::LebesgueBox { dim } => *dim,
        }
    }

    /// Number of atoms, `None` for the Lebesgue fallback.
    pub fn n_atoms(&self) -> Option<usize> {
        match self {
            DiscreteMeasure::Atoms(p) => Some(p.nrows()),
            DiscreteMeasure::LebesgueBox { .. } => None,
        }
    }

    pub fn weight(&self) -> Option<f64> {
        self.n_atoms().map(|n| 1.0 / n as f64)
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            DiscreteMeasure::Atoms(p) => p.mean_axis(Axis(0)).expect("nonempty").to_vec(),
            DiscreteMeasure::LebesgueBox { dim } => vec![0.5; *dim],
        }
    }
}

/// Empirical measure of the targets indexed by `members`; the Lebesgue
/// measure on `[0,1]^{d_Y}` when `members` is empty. Duplicates stay as
/// repeated atoms.
pub fn clustered_empirical(data: &Dataset, members: &[usize]) -> Result<DiscreteMeasure> {
    if members.is_empty() {
        return Ok(DiscreteMeasure::LebesgueBox { dim: data.dim_y() });
    }
    if let Some(&bad) = members.iter().find(|&&m| m >= data.len()) {
        return Err(Error::invalid(format!("member index {bad} out of range for {} samples", data.len())));
    }
    Ok(DiscreteMeasure::Atoms(data.ys.select(Axis(0), members)))
}

/// Discretization of the Lebesgue measure on `[0,1]^d` used to average
/// errors over the feature space.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalMeasure {
    /// Tensor grid with `per_axis` equispaced points (endpoints included).
    Grid { dim: usize, per_axis: usize },
    /// Uniform Monte Carlo draws, one per row.
    MonteCarlo(Array2<f64>),
}

impl EvalMeasure {
    pub fn grid(dim: usize, per_axis: usize) -> Result<Self> {
        if dim == 0 || per_axis < 2 {
            return Err(Error::invalid("grid needs dim >= 1 and at least 2 points per axis"));
        }
        Ok(EvalMeasure::Grid { dim, per_axis })
    }

    pub fn monte_carlo(dim: usize, n: usize, rng: &mut Rng) -> Result<Self> {
        if dim == 0 || n == 0 {
            return Err(Error::invalid("Monte Carlo measure needs dim >= 1 and n >= 1"));
        }
        Ok(EvalMeasure::MonteCarlo(Array2::from_shape_fn((n, dim), |_| rng.random::<f64>())))
    }

    /// Support points, one per row; each carries weight `1 / n_points`.
    pub fn points(&self) -> Array2<f64> {
        match self {
            EvalMeasure::Grid { dim, per_axis } => {
                let n = per_axis.pow(*dim as u32);
                let step = 1.0 / (*per_axis - 1) as f64;
                Array2::from_shape_fn((n, *dim), |(i, d)| {
                    let idx = (i / per_axis.pow(d as u32)) % per_axis;
                    (idx as f64 * step).min(1.0)
                })
            }
            EvalMeasure::MonteCarlo(p) => p.clone(),
        }
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.points().nrows() as f64
    }
}

const MAGIC: &[u8; 8] = b"CDSTDATA";
pub const DATASET_FORMAT_VERSION: u32 = 1;

/// Writes the dataset: magic, version, `M`, `d_X`, `d_Y`, seed, then
/// row-major little-endian `f64` features followed by targets.
pub fn save_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&DATASET_FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(data.len() as u64).to_le_bytes())?;
    w.write_all(&(data.dim_x() as u32).to_le_bytes())?;
    w.write_all(&(data.dim_y() as u32).to_le_bytes())?;
    w.write_all(&data.seed.to_le_bytes())?;
    write_f64s(&mut w, data.xs.iter().chain(data.ys.iter()))?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::format("bad magic: not a dataset file"));
    }
    let version = u32::from_le_bytes(read_array(&mut r, "version")?);
    if version != DATASET_FORMAT_VERSION {
        return Err(Error::format(format!(
            "version mismatch: expected {DATASET_FORMAT_VERSION}, found {version}"
        )));
    }
    let m = u64::from_le_bytes(read_array(&mut r, "sample count")?) as usize;
    let dx = u32::from_le_bytes(read_array(&mut r, "d_X")?) as usize;
    let dy = u32::from_le_bytes(read_array(&mut r, "d_Y")?) as usize;
    let seed = u64::from_le_bytes(read_array(&mut r, "seed")?);
    if m == 0 || dx == 0 || dy == 0 {
        return Err(Error::format(format!("bad shape: M={m}, d_X={dx}, d_Y={dy}")));
    }
    let xs = read_block(&mut r, m, dx, "features")?;
    let ys = read_block(&mut r, m, dy, "targets")?;
    expect_eof(&mut r, "target block")?;
    Dataset::new(xs, ys, seed).map_err(|e| Error::format(format!("invalid contents: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn small() -> Dataset {
        Dataset::new(
            array![[0.5], [0.1], [0.9], [0.3]],
            array![[0.4], [0.2], [0.8], [0.7]],
            42,
        )
        .unwrap()
    }

    #[test]
    fn empty_members_fall_back_to_lebesgue() {
        let m = clustered_empirical(&small(), &[]).unwrap();
        assert_eq!(m, DiscreteMeasure::LebesgueBox { dim: 1 });
    }

    #[test]
    fn single_and_pair_members() {
        let d = small();
        let one = clustered_empirical(&d, &[3]).unwrap();
        assert_eq!(one, DiscreteMeasure::Atoms(array![[0.7]]));
        assert_eq!(one.weight(), Some(1.0));
        let two = clustered_empirical(&d, &[1, 2]).unwrap();
        assert_eq!(two, DiscreteMeasure::Atoms(array![[0.2], [0.8]]));
        assert_eq!(two.weight(), Some(0.5));
    }

    #[test]
    fn duplicates_are_kept() {
        let m = clustered_empirical(&small(), &[1, 1]).unwrap();
        assert_eq!(m.n_atoms(), Some(2));
    }

    #[test]
    fn out_of_range_member() {
        assert!(matches!(clustered_empirical(&small(), &[4]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rejects_features_outside_unit_box() {
        assert!(Dataset::new(array![[1.5]], array![[0.0]], 0).is_err());
        assert!(Dataset::new(array![[0.5], [0.2]], array![[0.0]], 0).is_err());
    }

    #[test]
    fn grid_points_cover_unit_box() {
        let g = EvalMeasure::grid(2, 3).unwrap().points();
        assert_eq!(g.nrows(), 9);
        assert_eq!(g.row(0).to_vec(), vec![0.0, 0.0]);
        assert_eq!(g.row(8).to_vec(), vec![1.0, 1.0]);
        assert_eq!(g.row(1).to_vec(), vec![0.5, 0.0]);
    }

    proptest! {
        #[test]
        fn sorted_idx_orders_each_axis(vals in prop::collection::vec(0.0f64..=1.0, 6..60)) {
            let m = vals.len() / 3;
            let xs = Array2::from_shape_vec((m, 3), vals[..m * 3].to_vec()).unwrap();
            let d = Dataset::new(xs, Array2::zeros((m, 1)), 0).unwrap();
            for axis in 0..3 {
                let idx = d.sorted_idx(axis);
                let mut seen = idx.to_vec();
                seen.sort_unstable();
                prop_assert_eq!(seen, (0..m).collect::<Vec<_>>());
                for w in idx.windows(2) {
                    prop_assert!(d.x(w[0])[axis] <= d.x(w[1])[axis]);
                }
            }
        }

        #[test]
        fn full_cluster_mean_matches_arithmetic_mean(ys in prop::collection::vec(-5.0f64..5.0, 1..50)) {
            let m = ys.len();
            let xs = Array2::from_elem((m, 1), 0.5);
            let d = Dataset::new(xs, Array2::from_shape_vec((m, 1), ys.clone()).unwrap(), 0).unwrap();
            let all: Vec<usize> = (0..m).collect();
            let mean = clustered_empirical(&d, &all).unwrap().mean()[0];
            let expected = ys.iter().sum::<f64>() / m as f64;
            prop_assert!((mean - expected).abs() <= 1e-12);
        }

        #[test]
        fn member_order_only_permutes_atoms(perm_seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let d = small();
            let mut members = vec![0, 1, 2, 3, 1];
            let base = clustered_empirical(&d, &members).unwrap();
            members.shuffle(&mut crate::rng::stream(perm_seed, 0));
            let shuffled = clustered_empirical(&d, &members).unwrap();
            let sorted = |m: &DiscreteMeasure| match m {
                DiscreteMeasure::Atoms(p) => {
                    let mut v = p.column(0).to_vec();
                    v.sort_by(f64::total_cmp);
                    v
                }
                _ => unreachable!(),
            };
            prop_assert_eq!(sorted(&base), sorted(&shuffled));
        }
    }
}
