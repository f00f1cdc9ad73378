use ndarray::ArrayView2;

use super::l1_cost_matrix;
use crate::error::{Error, Result};

/// Minimum-cost perfect matching of a square cost matrix.
///
/// Returns `assign` with row `i` matched to column `assign[i]`. O(n^3).
pub fn hungarian(cost: ArrayView2<f64>) -> Result<Vec<usize>> {
    let (n, m) = cost.dim();
    if n != m {
        return Err(Error::invalid(format!("assignment needs a square matrix, got {n} x {m}")));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("assignment costs must be finite"));
    }
    // 1-based potentials; column 0 is a virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[row_of[j] - 1] = j - 1;
    }
    Ok(assign)
}

/// Exact W1 between two equal-size uniform atom sets under ℓ1 cost.
///
/// Returns the distance and the optimal matching.
pub fn exact_assignment_w1(src: ArrayView2<f64>, dst: ArrayView2<f64>) -> Result<(f64, Vec<usize>)> {
    if src.nrows() != dst.nrows() {
        return Err(Error::invalid(format!(
            "exact assignment needs equal atom counts, got {} and {}",
            src.nrows(),
            dst.nrows()
        )));
    }
    let c = l1_cost_matrix(src, dst)?;
    let assign = hungarian(c.view())?;
    let total: f64 = assign.iter().enumerate().map(|(i, &j)| c.view()[[i, j]]).sum();
    Ok((total / src.nrows() as f64, assign))
}

/// W1 between two uniform empirical measures on the real line, by matching
/// quantile functions. Sizes may differ.
pub fn sorted_w1_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("1D W1 needs nonempty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("1D W1 samples must be finite"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        let s: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        return Ok(s / a.len() as f64);
    }
    // Walk the merged quantile breakpoints i/na and j/nb with integer arithmetic.
    let (na, nb) = (a.len(), b.len());
    let denom = (na * nb) as f64;
    let (mut i, mut j, mut q) = (0, 0, 0usize);
    let mut total = 0.0;
    while i < na && j < nb {
        let next_a = (i + 1) * nb;
        let next_b = (j + 1) * na;
        let next = next_a.min(next_b);
        total += (next - q) as f64 * (a[i] - b[j]).abs();
        q = next;
        if next_a == next {
            i += 1;
        }
        if next_b == next {
            j += 1;
        }
    }
    Ok(total / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use ndarray::{array, Array2};
    use rand::Rng as _;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..n {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn permutation_oracle_count() {
        assert_eq!(permutations(6).len(), 720);
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let mut rng = stream(5, 0);
        let perms = permutations(6);
        for _ in 0..50 {
            let c = Array2::from_shape_fn((6, 6), |_| rng.random::<f64>());
            let best = perms
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| c[[i, j]]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            let a = hungarian(c.view()).unwrap();
            let got: f64 = a.iter().enumerate().map(|(i, &j)| c[[i, j]]).sum();
            assert!((got - best).abs() < 1e-12, "{got} vs {best}");
            let mut seen = a.clone();
            seen.sort();
            assert_eq!(seen, (0..6).collect::<Vec<_>>());
        }
    }

    #[test]
    fn hungarian_small_cases() {
        assert_eq!(hungarian(array![[4.0, 1.0], [2.0, 8.0]].view()).unwrap(), vec![1, 0]);
        assert_eq!(hungarian(Array2::<f64>::zeros((0, 0)).view()).unwrap(), Vec::<usize>::new());
        assert!(hungarian(Array2::<f64>::zeros((2, 3)).view()).is_err());
    }

    #[test]
    fn exact_w1_examples() {
        let (w, _) = exact_assignment_w1(array![[0.0], [1.0]].view(), array![[1.0], [0.0]].view()).unwrap();
        assert_eq!(w, 0.0);
        let (w, _) = exact_assignment_w1(array![[0.0, 0.0]].view(), array![[0.5, 0.25]].view()).unwrap();
        assert_eq!(w, 0.75);
        assert!(exact_assignment_w1(array![[0.0]].view(), array![[0.0], [1.0]].view()).is_err());
    }

    #[test]
    fn sorted_1d_matches_assignment() {
        let mut rng = stream(6, 0);
        for _ in 0..30 {
            let a: Vec<f64> = (0..9).map(|_| rng.random()).collect();
            let b: Vec<f64> = (0..9).map(|_| rng.random()).collect();
            let col = |v: &[f64]| Array2::from_shape_vec((v.len(), 1), v.to_vec()).unwrap();
            let (exact, _) = exact_assignment_w1(col(&a).view(), col(&b).view()).unwrap();
            assert!((sorted_w1_1d(&a, &b).unwrap() - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn sorted_1d_unequal_sizes() {
        // quantiles of {0, 1} vs {0.5}: |0 - 0.5| on [0, 1/2], |1 - 0.5| on [1/2, 1]
        assert!((sorted_w1_1d(&[0.0, 1.0], &[0.5]).unwrap() - 0.5).abs() < 1e-15);
        // {0,0,3} vs {0,3}: quantiles differ on [1/2, 2/3] by 3
        assert!((sorted_w1_1d(&[0.0, 0.0, 3.0], &[0.0, 3.0]).unwrap() - 0.5).abs() < 1e-15);
        // replicated samples give the same measure
        let a = [0.1, 0.7, 0.4];
        let a2 = [0.1, 0.1, 0.7, 0.7, 0.4, 0.4];
        let b = [0.3, 0.9];
        assert!((sorted_w1_1d(&a, &b).unwrap() - sorted_w1_1d(&a2, &b).unwrap()).abs() < 1e-15);
        assert!(sorted_w1_1d(&[], &b).is_err());
    }
}
