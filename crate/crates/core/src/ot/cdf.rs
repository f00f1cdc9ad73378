use crate::error::{Error, Result};

/// Step CDF of a finite sample, each point of weight `1/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empirical CDF needs at least one value"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("empirical CDF values must be finite"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    /// Fraction of values `<= t`.
    pub fn eval(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= t) as f64 / self.sorted.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }
}

/// `int_lo^hi |F(t) - G(t)| dt` by the trapezoid rule on `n` equal cells.
pub fn cdf_w1(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!("integration range [{lo}, {hi}] is empty or not finite")));
    }
    if n == 0 {
        return Err(Error::invalid("integration needs at least one cell"));
    }
    let h = (hi - lo) / n as f64;
    let gap = |i: usize| {
        let t = if i == n { hi } else { lo + i as f64 * h };
        (f(t) - g(t)).abs()
    };
    let interior: f64 = (1..n).map(gap).sum();
    Ok(h * (interior + 0.5 * (gap(0) + gap(n))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::sorted_w1_1d;

    #[test]
    fn empirical_cdf_steps() {
        let f = EmpiricalCdf::new(&[0.5, 0.1, 0.5, 0.9]).unwrap();
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(0.1), 0.25);
        assert_eq!(f.eval(0.5), 0.75);
        assert_eq!(f.eval(1.0), 1.0);
        assert!(EmpiricalCdf::new(&[]).is_err());
    }

    #[test]
    fn identical_cdfs_give_zero() {
        let f = |t: f64| t.clamp(0.0, 1.0);
        assert_eq!(cdf_w1(f, f, 0.0, 1.0, 100).unwrap(), 0.0);
    }

    #[test]
    fn shifted_uniforms() {
        // U[0,1] vs U[0.25,1.25]: W1 = 0.25
        let f = |t: f64| t.clamp(0.0, 1.0);
        let g = |t: f64| (t - 0.25).clamp(0.0, 1.0);
        let w = cdf_w1(f, g, -1.0, 2.0, 3000).unwrap();
        assert!((w - 0.25).abs() < 1e-12, "{w}");
    }

    #[test]
    fn converges_to_sorted_w1_for_step_functions() {
        let a = [0.13, 0.42, 0.77];
        let b = [0.05, 0.61, 0.62];
        let fa = EmpiricalCdf::new(&a).unwrap();
        let fb = EmpiricalCdf::new(&b).unwrap();
        let exact = sorted_w1_1d(&a, &b).unwrap();
        let w = cdf_w1(|t| fa.eval(t), |t| fb.eval(t), 0.0, 1.0, 200_000).unwrap();
        assert!((w - exact).abs() < 1e-4, "{w} vs {exact}");
    }

    #[test]
    fn rejects_bad_range() {
        let f = |t: f64| t;
        assert!(cdf_w1(f, f, 1.0, 1.0, 10).is_err());
        assert!(cdf_w1(f, f, 0.0, 1.0, 0).is_err());
    }
}
