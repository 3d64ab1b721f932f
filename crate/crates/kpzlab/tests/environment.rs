use statrs::distribution::{ContinuousCDF, InverseGamma};

use kpzlab::environment::*;
use kpzlab::montecarlo::Summary;

#[test]
fn brownian_increments_have_variance_dx() {
    let env = sample_brownian(1, 0.0, 0.01, 100_001, RngSpec::new(1, 0)).unwrap();
    let inc: Vec<f64> = (1..env.num_points()).map(|i| env.value(i, 1) - env.value(i - 1, 1)).collect();
    let s = Summary::of(&inc).unwrap();
    assert!((s.variance - 0.01).abs() < 3e-4, "{}", s.variance);
    assert!(s.mean.abs() < 3.0 * s.std_error());
    // Increments over disjoint intervals are uncorrelated.
    let n = inc.len() - 1;
    let (a, b) = (&inc[..n], &inc[1..]);
    let (ma, mb) = (a.iter().sum::<f64>() / n as f64, b.iter().sum::<f64>() / n as f64);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n as f64;
    let sd = |v: &[f64], m: f64| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64).sqrt();
    assert!((cov / (sd(a, ma) * sd(b, mb))).abs() < 0.02);
}

#[test]
fn brownian_is_anchored_and_reproducible() {
    let a = sample_brownian(3, -1.0, 0.1, 21, RngSpec::new(5, 2)).unwrap();
    let b = sample_brownian(3, -1.0, 0.1, 21, RngSpec::new(5, 2)).unwrap();
    assert_eq!(a, b);
    for k in 1..=3 {
        assert_eq!(a.value(10, k), 0.0);
    }
    assert_ne!(a, sample_brownian(3, -1.0, 0.1, 21, RngSpec::new(5, 3)).unwrap());
    assert!(sample_brownian(1, 0.0, 0.1, 1, RngSpec::new(0, 0)).is_err());
    assert!(sample_brownian(1, 0.0, -0.1, 5, RngSpec::new(0, 0)).is_err());
}

fn inverse_gamma_weights(theta: f64, count: usize, seed: u64) -> Vec<f64> {
    let env = sample_inverse_gamma_lattice(theta, count, 1, RngSpec::new(seed, 0)).unwrap();
    assert_eq!(env.value(0, 1), 0.0);
    (1..=count).map(|i| env.increment(i, 1).exp()).collect()
}

#[test]
fn inverse_gamma_weights_match_the_analytic_cdf() {
    for (j, theta) in [1.5, 3.0, 8.0].into_iter().enumerate() {
        let mut w = inverse_gamma_weights(theta, 100_000, j as u64);
        w.sort_by(f64::total_cmp);
        let law = InverseGamma::new(theta, 1.0).unwrap();
        let n = w.len() as f64;
        let ks = w
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = law.cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "theta {theta}: KS {ks}");
    }
    let w = inverse_gamma_weights(3.0, 100_000, 9);
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    assert!((mean - 0.5).abs() < 0.02);
    assert!(sample_inverse_gamma_lattice(0.0, 5, 1, RngSpec::new(0, 0)).is_err());
}

#[test]
fn lattice_is_reproducible_and_pinned() {
    let a = sample_inverse_gamma_lattice(2.0, 8, 3, RngSpec::new(4, 4)).unwrap();
    assert_eq!(a, sample_inverse_gamma_lattice(2.0, 8, 3, RngSpec::new(4, 4)).unwrap());
    for k in 1..=3 {
        assert_eq!(a.value(0, k), 0.0);
    }
    assert_eq!(a.delta(), 1.0);
}

#[test]
fn deterministic_fixtures() {
    let z = constant_environment(0.0, 0.0, 0.1, 5, 2).unwrap();
    assert!(z.level(1).iter().chain(z.level(2)).all(|&v| v == 0.0));
    let l = linear_environment(&[0.0, 1.0], 0.0, 0.5, 3).unwrap();
    assert_eq!(l.level(2), &[0.0, 0.5, 1.0]);
    let c = constant_environment(2.0, 0.0, 0.5, 3, 2).unwrap();
    let sum = l.add(&c).unwrap();
    assert_eq!(sum.level(2), &[2.0, 2.5, 3.0]);
    assert_eq!(sum.level(1), &[2.0, 2.0, 2.0]);
}
