use condist::data::DiscreteMeasure;
use condist::harness::{w1_to_truth, Cdf1d};
use condist::rng::stream;
use condist::synthetic::KernelSpec;
use ndarray::{array, Array1};

const N: usize = 20_000;
// DKW: P(KS > 0.02) <= 2 exp(-2 N 0.02^2) ~ 2e-7.
const KS_TOL: f64 = 0.02;

fn ks_1d(kernel: &KernelSpec, x: f64, seed: u64) -> f64 {
    let mut rng = stream(seed, 0);
    let xv = Array1::from(vec![x]);
    let mut ys: Vec<f64> = (0..N).map(|_| kernel.sample_target(xv.view(), &mut rng)[0]).collect();
    ks(&mut ys, |t| kernel.true_cdf_1d(x, t).unwrap())
}

/// Largest gap between `cdf` and the right-continuous empirical CDF at the
/// sample points; exact for laws with atoms.
fn ks(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    samples
        .iter()
        .map(|&y| {
            let below = samples.partition_point(|&s| s <= y);
            (cdf(y) - below as f64 / N as f64).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn samplers_match_closed_form_cdfs() {
    let kernels = [KernelSpec::IntroUniform, KernelSpec::Model1, KernelSpec::model2(), KernelSpec::Model2 { threshold: 0.5 }];
    for (s, kernel) in kernels.iter().enumerate() {
        for (j, x) in [0.0, 0.3, 0.49, 0.51, 0.97].into_iter().enumerate() {
            let ks = ks_1d(kernel, x, (10 * s + j) as u64);
            assert!(ks < KS_TOL, "{} at x={x}: KS {ks}", kernel.name());
        }
    }
}

#[test]
fn model3_projection_matches_monte_carlo() {
    let kernel = KernelSpec::model3(0);
    let mut rng = stream(77, 0);
    for (x, a) in [
        (array![0.5, 0.5, 0.5], [1.0, 0.0, 0.0]),
        (array![0.1, 0.8, 0.3], [0.2, -0.5, 0.3]),
        (array![0.9, 0.05, 0.6], [-1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
    ] {
        let mut proj: Vec<f64> = (0..N)
            .map(|_| {
                let y = kernel.sample_target(x.view(), &mut rng);
                a[0] * y[0] + a[1] * y[1] + a[2] * y[2]
            })
            .collect();
        let ks = ks(&mut proj, |t| kernel.projected_cdf_3d(x.view(), a, t).unwrap());
        assert!(ks < KS_TOL, "x={x} a={a:?}: KS {ks}");
    }
}

#[test]
fn w1_to_truth_matches_closed_form_point_mass() {
    // E|U - c| for U ~ Uniform[a, b] is ((c - a)^2 + (b - c)^2) / (2 (b - a)).
    let kernel = KernelSpec::IntroUniform;
    for (x, c) in [(0.2, 0.3), (0.0, 0.25), (0.7, 1.2), (0.5, 2.0)] {
        let (a, b) = (x, x + 0.5);
        let expected = if c >= b {
            c - (a + b) / 2.0
        } else {
            ((c - a) * (c - a) + (b - c) * (b - c)) / (2.0 * (b - a))
        };
        let est = Cdf1d::from_measure(&DiscreteMeasure::atoms(array![[c]]).unwrap()).unwrap();
        let got = w1_to_truth(&kernel, x, &est).unwrap();
        assert!((got - expected).abs() < 1e-3, "x={x} c={c}: {got} vs {expected}");
    }
}

#[test]
fn w1_to_truth_of_quantile_atoms_is_small() {
    // n atoms at the midpoint quantiles of Uniform[x, x + 1/2] sit at W = 1 / (8 n).
    let kernel = KernelSpec::IntroUniform;
    let n = 50;
    let x = 0.4;
    let atoms = ndarray::Array2::from_shape_fn((n, 1), |(i, _)| x + 0.5 * (i as f64 + 0.5) / n as f64);
    let est = Cdf1d::from_measure(&DiscreteMeasure::atoms(atoms).unwrap()).unwrap();
    let got = w1_to_truth(&kernel, x, &est).unwrap();
    assert!((got - 1.0 / (8.0 * n as f64)).abs() < 2e-4, "{got}");
}
