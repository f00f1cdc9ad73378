use crate::error::{Error, Result};

/// Worst-case error implied by an integrated error for Lipschitz kernel
/// and estimator: `(d+1)^(1/(d+1)) (L + L_net)^(d/(d+1)) err^(1/(d+1))`.
pub fn sup_w_bound(int_err: f64, l: f64, l_net: f64, dim_x: usize) -> Result<f64> {
    if [int_err, l, l_net].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::invalid("bound inputs must be finite and nonnegative"));
    }
    if dim_x == 0 {
        return Err(Error::invalid("feature dimension must be positive"));
    }
    let d = dim_x as f64;
    let p = 1.0 / (d + 1.0);
    Ok((d + 1.0).powf(p) * (l + l_net).powf(d * p) * int_err.powf(p))
}

/// `W(Uniform[0,1], empirical measure of the queries)`, evaluated in closed
/// form as `∫ |t - G(t)| dt` over the pieces where `G` is constant.
pub fn query_coverage_w1(queries: &[f64]) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::invalid("query set is empty"));
    }
    if queries.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(Error::invalid("queries must lie in [0, 1]"));
    }
    let mut q = queries.to_vec();
    q.sort_by(f64::total_cmp);
    let n = q.len() as f64;
    // ∫_a^b |t - c| dt
    let piece = |a: f64, b: f64, c: f64| -> f64 {
        let f = |t: f64| 0.5 * (t - c) * (t - c).abs();
        f(b) - f(a)
    };
    let mut total = piece(0.0, q[0], 0.0);
    for i in 0..q.len() {
        let hi = if i + 1 < q.len() { q[i + 1] } else { 1.0 };
        total += piece(q[i], hi, (i + 1) as f64 / n);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bound_arithmetic() {
        assert_eq!(sup_w_bound(0.0, 1.0, 2.0, 1).unwrap(), 0.0);
        assert!((sup_w_bound(0.25, 1.0, 1.0, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!(sup_w_bound(-1.0, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn coverage_reference_values() {
        assert!((query_coverage_w1(&[0.5]).unwrap() - 0.25).abs() < 1e-15);
        assert!((query_coverage_w1(&[0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(query_coverage_w1(&[]).is_err());
    }

    #[test]
    fn coverage_shrinks_on_dyadic_midpoints() {
        let mut last = f64::INFINITY;
        for j in 0..10 {
            let n = 1usize << j;
            let q: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
            let w = query_coverage_w1(&q).unwrap();
            // midpoints give exactly 1 / (4N)
            assert!((w - 0.25 / n as f64).abs() < 1e-15);
            assert!(w < last);
            last = w;
        }
    }

    proptest! {
        #[test]
        fn bound_monotone(e in 0.0..1.0f64, l in 0.0..3.0f64, ln in 0.0..3.0f64, de in 0.0..0.5f64, d in 1usize..4) {
            let b = sup_w_bound(e, l, ln, d).unwrap();
            prop_assert!(sup_w_bound(e + de, l, ln, d).unwrap() >= b);
            prop_assert!(sup_w_bound(e, l + de, ln, d).unwrap() >= b);
            prop_assert!(sup_w_bound(e, l, ln + de, d).unwrap() >= b);
        }

        #[test]
        fn coverage_matches_quadrature(qs in proptest::collection::vec(0.0..1.0f64, 1..20)) {
            let exact = query_coverage_w1(&qs).unwrap();
            let f = crate::ot::EmpiricalCdf::new(&qs).unwrap();
            let quad = crate::ot::cdf_w1(|t| t, |t| f.eval(t), 0.0, 1.0, 20000).unwrap();
            prop_assert!((exact - quad).abs() < 1e-3);
        }
    }
}
