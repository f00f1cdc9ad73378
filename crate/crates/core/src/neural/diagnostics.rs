use ndarray::{Array2, ArrayView2};

use super::net::{AtomMap, AtomNet};
use crate::error::{Error, Result};
use crate::ot::exact_assignment_w1;

/// `max W(P_x, P_x') / |x - x'|_inf` over probe pairs, with exact W1
/// between the atom sets. Coincident pairs are skipped; no valid pair gives 0.
pub fn empirical_lipschitz<N: AtomMap + ?Sized>(net: &N, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    let mut best: f64 = 0.0;
    for (a, b) in pairs {
        if a.len() != net.dim_x() || b.len() != net.dim_x() {
            return Err(Error::invalid("probe dimension does not match the network"));
        }
        if a.iter().chain(b).any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("probe points must lie in the unit box"));
        }
        let dist = a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        if dist == 0.0 {
            continue;
        }
        let (w, _) = exact_assignment_w1(net.atoms(a)?.view(), net.atoms(b)?.view())?;
        best = best.max(w / dist);
    }
    Ok(best)
}

/// Per grid point, the mean over atoms and coordinates of the absolute
/// finite-difference derivative in `x`. Central differences inside the
/// grid, one-sided at the ends. Requires `d_X = 1` and an increasing grid.
pub fn avg_abs_derivative<N: AtomMap + ?Sized>(net: &N, grid: &[f64]) -> Result<Vec<f64>> {
    if net.dim_x() != 1 {
        return Err(Error::invalid("derivative profile needs a one-dimensional feature space"));
    }
    if grid.len() < 3 {
        return Err(Error::invalid(format!("grid of {} points is too coarse", grid.len())));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("grid must be strictly increasing"));
    }
    let xs = ArrayView2::from_shape((grid.len(), 1), grid).expect("column view of the grid");
    let out = net.atoms_batch(xs)?;
    let n = grid.len();
    Ok((0..n)
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let dx = grid[hi] - grid[lo];
            let diff = &out.row(hi) - &out.row(lo);
            diff.iter().map(|d| d.abs()).sum::<f64>() / (dx * diff.len() as f64)
        })
        .collect())
}

/// Largest relative discrepancy between `backward` and central finite
/// differences of `sum(probe * output)` over every parameter.
///
/// Each entry is `|fd - an| / max(|fd| + |an|, floor)`; the floor keeps
/// parameters with vanishing gradients from dividing rounding noise by zero.
pub fn gradient_check<N: AtomNet + Clone>(
    net: &N,
    xs: ArrayView2<f64>,
    probe: ArrayView2<f64>,
    step: f64,
    floor: f64,
) -> Result<f64> {
    let (_, cache) = net.forward(xs)?;
    let grads = net.backward(&cache, probe)?;
    let objective = |n: &N| -> Result<f64> { Ok((n.forward(xs)?.0 * &probe).sum()) };
    let mut work = net.clone();
    let mut worst: f64 = 0.0;
    for li in 0..net.layers().len() {
        let n_w = net.layers()[li].w.len();
        let n_total = n_w + net.layers()[li].b.len();
        for idx in 0..n_total {
            let orig = *param_mut(&mut work, li, idx);
            *param_mut(&mut work, li, idx) = orig + step;
            let up = objective(&work)?;
            *param_mut(&mut work, li, idx) = orig - step;
            let down = objective(&work)?;
            *param_mut(&mut work, li, idx) = orig;
            let fd = (up - down) / (2.0 * step);
            let an = if idx < n_w {
                let c = grads[li].w.ncols();
                grads[li].w[[idx / c, idx % c]]
            } else {
                grads[li].b[idx - n_w]
            };
            worst = worst.max((fd - an).abs() / (fd.abs() + an.abs()).max(floor));
        }
    }
    Ok(worst)
}

/// Weight entries first (row-major), then biases.
fn param_mut<N: AtomNet>(net: &mut N, layer: usize, idx: usize) -> &mut f64 {
    let l = &mut net.layers_mut()[layer];
    let n_w = l.w.len();
    if idx < n_w {
        let c = l.w.ncols();
        &mut l.w[[idx / c, idx % c]]
    } else {
        &mut l.b[idx - n_w]
    }
}

/// Atoms of `net` at each grid point as rows of `n_atom * d_Y` values.
pub fn atom_table<N: AtomMap + ?Sized>(net: &N, grid: ArrayView2<f64>) -> Result<Array2<f64>> {
    net.atoms_batch(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{LipNet, LipNetConfig};
    use crate::rng::stream;
    use ndarray::Array2;

    /// Atoms `x + j / 10`, one coordinate.
    struct Shift;

    impl AtomMap for Shift {
        fn dim_x(&self) -> usize {
            1
        }
        fn dim_y(&self) -> usize {
            1
        }
        fn n_atom(&self) -> usize {
            4
        }
        fn atoms_batch(&self, xs: ArrayView2<f64>) -> Result<Array2<f64>> {
            Ok(Array2::from_shape_fn((xs.nrows(), 4), |(r, j)| xs[[r, 0]] + j as f64 / 10.0))
        }
    }

    struct Constant;

    impl AtomMap for Constant {
        fn dim_x(&self) -> usize {
            1
        }
        fn dim_y(&self) -> usize {
            1
        }
        fn n_atom(&self) -> usize {
            3
        }
        fn atoms_batch(&self, xs: ArrayView2<f64>) -> Result<Array2<f64>> {
            Ok(Array2::from_shape_fn((xs.nrows(), 3), |(_, j)| j as f64))
        }
    }

    fn pairs() -> Vec<(Vec<f64>, Vec<f64>)> {
        vec![(vec![0.1], vec![0.4]), (vec![0.5], vec![0.5]), (vec![0.9], vec![0.0])]
    }

    #[test]
    fn lipschitz_of_toys() {
        assert_eq!(empirical_lipschitz(&Constant, &pairs()).unwrap(), 0.0);
        assert!((empirical_lipschitz(&Shift, &pairs()).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(empirical_lipschitz(&Shift, &[(vec![0.3], vec![0.3])]).unwrap(), 0.0);
        assert!(empirical_lipschitz(&Shift, &[(vec![1.3], vec![0.3])]).is_err());
    }

    #[test]
    fn lipschitz_monotone_in_probe_set() {
        let net = LipNet::new(LipNetConfig::for_k(1, 1, 4), &mut stream(0, 0)).unwrap();
        let all: Vec<_> = (0..10).map(|i| (vec![i as f64 / 10.0], vec![(i as f64 / 10.0 + 0.37) % 1.0])).collect();
        let sub = empirical_lipschitz(&net, &all[..4]).unwrap();
        let sup = empirical_lipschitz(&net, &all).unwrap();
        assert!(sup >= sub);
    }

    #[test]
    fn derivative_of_toys() {
        let grid: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        assert!(avg_abs_derivative(&Constant, &grid).unwrap().iter().all(|v| *v == 0.0));
        assert!(avg_abs_derivative(&Shift, &grid).unwrap().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(avg_abs_derivative(&Shift, &grid[..2]).is_err());
    }

    #[test]
    fn gradient_check_on_lipnet() {
        let net = LipNet::new(LipNetConfig::for_k(1, 1, 3), &mut stream(1, 0)).unwrap();
        let xs = Array2::from_shape_vec((2, 1), vec![0.2, 0.7]).unwrap();
        let probe = Array2::from_shape_fn((2, 3), |(i, j)| (i + j) as f64 - 1.5);
        let err = gradient_check(&net, xs.view(), probe.view(), 1e-6, 1e-8).unwrap();
        assert!(err < 1e-4, "{err}");
    }
}
