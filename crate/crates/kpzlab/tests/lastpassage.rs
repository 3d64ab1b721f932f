use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kpzlab::environment::{constant_environment, sample_brownian, Grid, GridEnvironment, LatticeEnvironment, RngSpec};
use kpzlab::lastpassage::*;
use kpzlab::Error;

fn env_strategy() -> impl Strategy<Value = GridEnvironment> {
    (2usize..=6, 1usize..=4).prop_flat_map(|(n, k)| {
        prop::collection::vec(-2.0f64..2.0, n * k).prop_map(move |v| {
            GridEnvironment::new(Grid::uniform(0.0, 0.25, n).unwrap(), k, v).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dp_equals_brute_force(env in env_strategy(), a in 0usize..6, b in 0usize..6) {
        let n = env.num_points();
        let kk = env.num_levels();
        let (x1, x2) = ((a % n).min(b % n), (a % n).max(b % n));
        let q1 = Point::new(x1, kk);
        let q2 = Point::new(x2, 1);
        let dp = lpp_value(&env, q1, q2).unwrap();
        let bf = lpp_brute_force(&env, q1, q2).unwrap();
        prop_assert!((dp - bf).abs() < 1e-10);
        let path = lpp_argmax_path(&env, q1, q2).unwrap();
        prop_assert!((path_length(&env, &path).unwrap() - dp).abs() < 1e-10);
    }

    #[test]
    fn single_path_family_is_last_passage(env in env_strategy()) {
        let n = env.num_points();
        let kk = env.num_levels();
        let a = multi_path_lpp(&env, 1, Point::new(0, kk), Point::new(n - 1, 1)).unwrap();
        let b = lpp_value(&env, Point::new(0, kk), Point::new(n - 1, 1)).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn path_length_examples() {
    let env = GridEnvironment::from_fn(Grid::uniform(0.0, 0.5, 3).unwrap(), 2, |x, k| if k == 1 { x } else { 0.0 }).unwrap();
    let p = GeodesicPath::new(2, 1, vec![0, 0, 2]).unwrap();
    assert_eq!(path_length(&env, &p).unwrap(), 1.0);
    assert_eq!(lpp_value(&env, Point::new(0, 2), Point::new(2, 1)).unwrap(), 1.0);
    let same = lpp_value(&env, Point::new(1, 1), Point::new(2, 1)).unwrap();
    assert_eq!(same, 0.5);
    let zero = constant_environment(0.0, 0.0, 0.1, 5, 3).unwrap();
    assert_eq!(lpp_value(&zero, Point::new(0, 3), Point::new(4, 1)).unwrap(), 0.0);
    assert!(matches!(lpp_value(&env, Point::new(2, 1), Point::new(0, 2)), Err(Error::Order(_))));
}

#[test]
fn multi_path_examples() {
    let env = GridEnvironment::from_fn(Grid::uniform(0.0, 0.5, 3).unwrap(), 2, |x, k| if k == 2 { x } else { 0.0 }).unwrap();
    assert_eq!(multi_path_lpp(&env, 2, Point::new(0, 2), Point::new(2, 1)).unwrap(), 1.0);
    assert!(matches!(multi_path_lpp(&env, 3, Point::new(0, 2), Point::new(2, 1)), Err(Error::Config(_))));
}

/// Trapezoid rule written out for a path from `(0, 2)` to `(y, 1)`.
fn two_level_trapezoid(env: &GridEnvironment, y: usize) -> f64 {
    let g = |i: usize| (env.value(i, 2) - env.value(0, 2) + env.value(y, 1) - env.value(i, 1)).exp();
    let mut s = 0.0;
    for i in 0..y {
        s += 0.5 * (env.x(i + 1) - env.x(i)) * (g(i) + g(i + 1));
    }
    s.ln()
}

#[test]
fn polymer_matches_explicit_quadrature() {
    let env = sample_brownian(2, 0.0, 0.3, 3, RngSpec::new(12, 0)).unwrap();
    for y in 1..3 {
        let f = polymer_free_energy(&env, Point::new(0, 2), Point::new(y, 1), std::f64::consts::E).unwrap();
        assert!((f - two_level_trapezoid(&env, y)).abs() < 1e-12);
    }
    let zero = constant_environment(0.0, 0.0, 0.1, 11, 2).unwrap();
    for y in 1..11 {
        let f = polymer_free_energy(&zero, Point::new(0, 2), Point::new(y, 1), std::f64::consts::E).unwrap();
        assert!((f - zero.x(y).ln()).abs() < 1e-12);
    }
}

#[test]
fn polymer_approaches_last_passage_at_low_temperature() {
    let env = sample_brownian(3, 0.0, 0.01, 101, RngSpec::new(5, 5)).unwrap();
    let (q1, q2) = (Point::new(0, 3), Point::new(100, 1));
    let lpp = lpp_value(&env, q1, q2).unwrap();
    let mut last_gap = f64::INFINITY;
    for beta in [4.0f64, 8.0, 16.0] {
        let f = polymer_free_energy(&env, q1, q2, beta.exp()).unwrap();
        // The path space is a simplex of volume at most (1 + y - x)^2.
        assert!(f <= lpp + 2.0 * (2.0f64).ln() / beta + 1e-9);
        let gap = (f - lpp).abs();
        assert!(gap < last_gap);
        last_gap = gap;
    }
}

/// Every up-right lattice path from `(x1, k1)` to `(x2, k2)` as vertex lists.
fn lattice_paths(x1: usize, k1: usize, x2: usize, k2: usize) -> Vec<Vec<(usize, usize)>> {
    if k1 == k2 {
        return vec![(x1..=x2).map(|x| (x, k1)).collect()];
    }
    let mut out = Vec::new();
    for z in x1..=x2 {
        for rest in lattice_paths(z, k1 - 1, x2, k2) {
            let mut p: Vec<(usize, usize)> = (x1..=z).map(|x| (x, k1)).collect();
            p.extend(rest);
            out.push(p);
        }
    }
    out
}

fn random_lattice(seed: u64, width: usize, levels: usize) -> LatticeEnvironment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inc = (0..levels).map(|_| (0..width).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    LatticeEnvironment::from_increments(0.0, 1.0, inc).unwrap()
}

#[test]
fn lattice_partition_matches_enumeration() {
    for seed in 0..10 {
        let env = random_lattice(seed, 5, 5);
        let paths = lattice_paths(1, 5, 5, 1);
        let weights: Vec<f64> = paths.iter().map(|p| p.iter().map(|&(x, k)| env.increment(x, k)).sum()).collect();
        let m = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = m + weights.iter().map(|w| (w - m).exp()).sum::<f64>().ln();
        let dp = lattice_partition_dp(&env, Point::new(1, 5), Point::new(5, 1)).unwrap();
        assert!((dp - log_sum).abs() < 1e-10);
        let best = lattice_lpp(&env, Point::new(1, 5), Point::new(5, 1)).unwrap();
        assert!((best - m).abs() < 1e-12);
        assert!(dp >= best);
    }
    let zero = LatticeEnvironment::from_increments(0.0, 1.0, vec![vec![0.0; 4]; 3]).unwrap();
    let count = lattice_paths(1, 3, 4, 1).len() as f64;
    let dp = lattice_partition_dp(&zero, Point::new(1, 3), Point::new(4, 1)).unwrap();
    assert!((dp - count.ln()).abs() < 1e-12);
    let one = random_lattice(3, 1, 1);
    assert_eq!(lattice_partition_dp(&one, Point::new(1, 1), Point::new(1, 1)).unwrap(), one.increment(1, 1));
}

#[test]
fn inequality_sweeps() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for inst in 0..50 {
        let kk = 1 + inst % 5;
        let env = sample_brownian(kk, 0.0, 0.05, 30, RngSpec::new(inst as u64, 7)).unwrap();
        for _ in 0..100 {
            let mut xs: Vec<usize> = (0..4).map(|_| rng.random_range(0..30)).collect();
            xs.sort();
            let mut ks: Vec<usize> = (0..3).map(|_| rng.random_range(1..=kk)).collect();
            ks.sort();
            let tri = check_triangle(
                &env,
                Point::new(xs[0], ks[2]),
                Point::new(xs[1], ks[1]),
                Point::new(xs[2], ks[0]),
            )
            .unwrap();
            assert!(tri >= -1e-9);
            let quad = check_quadrangle(&env, xs[0], xs[1], xs[2], xs[3], ks[0], ks[2]).unwrap();
            assert!(quad >= -1e-9);
            assert!(check_quadrangle(&env, xs[0], xs[0], xs[2], xs[3], ks[0], ks[2]).unwrap().abs() < 1e-12);
        }
    }
    assert!(check_quadrangle(&constant_environment(0.0, 0.0, 0.1, 5, 2).unwrap(), 3, 1, 2, 4, 1, 2).is_err());
}

/// Raising the increment of level `k` at `z` (every value from `z` on) never
/// lowers a passage time, and raises it by the full amount when an optimal
/// path collects that increment.
#[test]
fn raising_an_increment_on_an_optimal_path() {
    let env = sample_brownian(3, 0.0, 0.1, 15, RngSpec::new(1, 1)).unwrap();
    let (q1, q2) = (Point::new(0, 3), Point::new(14, 1));
    let before = lpp_value(&env, q1, q2).unwrap();
    let path = lpp_argmax_path(&env, q1, q2).unwrap();
    for k in 1..=3 {
        for z in 1..15 {
            let mut levels: Vec<Vec<f64>> = (1..=3).map(|k| env.level(k).to_vec()).collect();
            levels[k - 1][z..].iter_mut().for_each(|v| *v += 0.3);
            let bumped = GridEnvironment::from_levels(env.grid().clone(), levels).unwrap();
            let after = lpp_value(&bumped, q1, q2).unwrap();
            let (a, b) = path.segment(k);
            let collected = a < z && z <= b;
            assert!(after >= before + if collected { 0.3 } else { 0.0 } - 1e-12);
        }
    }
}

#[test]
fn lattice_multi_path_fills_the_strip() {
    let env = random_lattice(4, 3, 2);
    // Two disjoint paths in a 3 x 2 strip starting at (1, 2), (2, 2) and
    // ending at (2, 1), (3, 1).
    let total = lattice_multi_path(&env, 2, Point::new(1, 2), Point::new(3, 1), true).unwrap();
    let mut best = f64::NEG_INFINITY;
    for a in lattice_paths(1, 2, 2, 1) {
        for b in lattice_paths(2, 2, 3, 1) {
            if a.iter().all(|v| !b.contains(v)) {
                let w: f64 = a.iter().chain(&b).map(|&(x, k)| env.increment(x, k)).sum();
                best = best.max(w);
            }
        }
    }
    assert!((total - best).abs() < 1e-12);
}
