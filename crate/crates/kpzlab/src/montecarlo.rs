//! Replica orchestration and statistics.
//!
//! Replica `i` of an experiment draws from stream `i` of the base seed, and
//! results are collected in replica order, so every summary is a pure
//! function of the spec whatever the number of worker threads.

use std::io::Write;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::actionfield::ActionField;
use crate::environment::{fmt_f64, sample_brownian, GridEnvironment, RngSpec};
use crate::lastpassage::{lpp_value, Point};
use crate::representations::{
    brownian_representation, build_representation, change_of_variables, scale_to_fixed_point, Model, RepSpec,
    ScalingParams,
};
use crate::{Error, Result};

const TW_TABLE: &str = include_str!("../../../data/tw_gue.csv");

/// Map `f` over `0..count` on the rayon pool, in index order.
#[cfg(feature = "parallel")]
pub fn par_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

/// Map `f` over `0..count`; without the `parallel` feature this is
/// [`seq_map`].
#[cfg(not(feature = "parallel"))]
pub fn par_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    seq_map(count, f)
}

/// Map `f` over `0..count` on the calling thread.
pub fn seq_map<T, F: Fn(usize) -> T>(count: usize, f: F) -> Vec<T> {
    (0..count).map(f).collect()
}

/// Run `f` for replicas `0..count`, replica `i` receiving stream `i` of
/// `seed`. The first failing replica aborts the run.
pub fn run_replicas<F>(count: usize, seed: u64, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(RngSpec) -> Result<Vec<f64>> + Sync + Send,
{
    par_map(count, |i| f(RngSpec::new(seed, i as u64)))
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Precondition(format!("replica {i}: {e}"))))
        .collect()
}

/// Sum by recursive halving, independent of how the values were produced.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Summary statistics of one observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(v: &[f64]) -> Result<Summary> {
        if v.is_empty() {
            return Err(Error::Parameter("no samples".into()));
        }
        let n = v.len() as f64;
        let mean = pairwise_sum(v) / n;
        let d2: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
        let d3: Vec<f64> = v.iter().map(|x| (x - mean).powi(3)).collect();
        let m2 = pairwise_sum(&d2) / n;
        let m3 = pairwise_sum(&d3) / n;
        let variance = if v.len() > 1 { m2 * n / (n - 1.0) } else { 0.0 };
        let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Summary { count: v.len(), mean, variance, skewness, min, max })
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        (self.variance / self.count as f64).sqrt()
    }
}

/// Empirical CDF as sorted `(value, F(value))` pairs, ties merged.
pub fn ecdf(v: &[f64]) -> Vec<(f64, f64)> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(s.len());
    for (i, x) in s.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = f,
            _ => out.push((*x, f)),
        }
    }
    out
}

/// Lag-1 sample autocorrelation.
pub fn lag1_autocorrelation(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mean = pairwise_sum(v) / v.len() as f64;
    let den: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    let num: Vec<f64> = v.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).collect();
    let d = pairwise_sum(&den);
    if d == 0.0 {
        0.0
    } else {
        pairwise_sum(&num) / d
    }
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Parameter("both samples must be nonempty".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// The GUE Tracy-Widom distribution as a tabulated CDF.
#[derive(Clone, Debug, PartialEq)]
pub struct TwReference {
    values: Vec<f64>,
    cdf: Vec<f64>,
    pub source: String,
}

impl TwReference {
    /// Parse a `value,cdf` table sorted by value with a nondecreasing CDF.
    pub fn parse(text: &str, source: &str) -> Result<TwReference> {
        #[derive(Deserialize)]
        struct Row {
            value: f64,
            cdf: f64,
        }
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let (mut values, mut cdf) = (Vec::new(), Vec::new());
        for row in r.deserialize() {
            let row: Row = row?;
            values.push(row.value);
            cdf.push(row.cdf);
        }
        if values.len() < 2
            || values.windows(2).any(|w| w[1] <= w[0])
            || cdf.windows(2).any(|w| w[1] < w[0])
            || cdf.iter().any(|c| !(0.0..=1.0).contains(c))
        {
            return Err(Error::Data("TW table must be sorted with a nondecreasing CDF in [0, 1]".into()));
        }
        Ok(TwReference { values, cdf, source: source.into() })
    }

    /// The bundled table.
    pub fn bundled() -> TwReference {
        Self::parse(TW_TABLE, "data/tw_gue.csv").expect("bundled TW table is valid")
    }

    /// Piecewise-linear CDF, 0 left and 1 right of the table.
    pub fn cdf(&self, s: f64) -> f64 {
        let i = self.values.partition_point(|&v| v <= s);
        if i == 0 {
            return 0.0;
        }
        if i == self.values.len() {
            return 1.0;
        }
        let (x0, x1) = (self.values[i - 1], self.values[i]);
        let t = (s - x0) / (x1 - x0);
        self.cdf[i - 1] + t * (self.cdf[i] - self.cdf[i - 1])
    }

    /// Inverse of the piecewise-linear CDF, for `u` in `(0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < u);
        if i == 0 {
            return self.values[0];
        }
        if i == self.cdf.len() {
            return *self.values.last().unwrap();
        }
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = (u - c0) / (c1 - c0);
        self.values[i - 1] + t * (self.values[i] - self.values[i - 1])
    }

    /// Draw by inverse CDF.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.quantile(u.clamp(1e-12, 1.0 - 1e-12))
    }
}

/// Kolmogorov-Smirnov distance between the samples and the reference CDF.
pub fn ks_distance(samples: &[f64], reference: &TwReference) -> Result<f64> {
    if samples.len() < 100 {
        return Err(Error::Parameter(format!("need at least 100 samples, got {}", samples.len())));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = reference.cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

/// Growth diagnostic of `T(., 1)` around the parabola `-y^2 + 2 x y`:
/// the minimum of `(T(y,1) + y^2) / y` over grid `y` in `[y_min, y_max]` and
/// the minimum of `(T(y,1) + y^2) / (-y)` over `y` in `[-y_max, -y_min]`.
/// For the parabola itself these are `2x` and `-2x`.
pub fn growth_diagnostic(field: &ActionField, window: (f64, f64)) -> Result<(f64, f64)> {
    let (lo, hi) = window;
    if !(0.0 < lo && lo < hi) {
        return Err(Error::Parameter("window must satisfy 0 < y_min < y_max".into()));
    }
    let xs = field.grid().xs();
    if -hi < xs[0] - 1e-12 || hi > xs[xs.len() - 1] + 1e-12 {
        return Err(Error::Domain("growth window leaves the grid".into()));
    }
    let t = field.level(1);
    let mut right = (f64::INFINITY, 0);
    let mut left = (f64::INFINITY, 0);
    for (i, &y) in xs.iter().enumerate() {
        let v = t[i] + y * y;
        if (lo..=hi).contains(&y) {
            right = (right.0.min(v / y), right.1 + 1);
        } else if (-hi..=-lo).contains(&y) {
            left = (left.0.min(v / -y), left.1 + 1);
        }
    }
    if right.1 < 10 || left.1 < 10 {
        return Err(Error::Parameter(format!("need 10 grid points per side, got {} and {}", left.1, right.1)));
    }
    Ok((right.0, left.0))
}

/// What an experiment samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub model: Model,
    #[serde(default)]
    pub rep: RepSpec,
    pub num_replicas: usize,
    pub seed: u64,
    /// Points `(x, y)` at which `Z(x, y, 1)` is recorded.
    pub probes: Vec<(f64, f64)>,
    /// Record the fixed-point rescaled representation instead of the raw one.
    #[serde(default)]
    pub scaled: bool,
    /// Triples and quadruples sampled by the per-replica axiom checks.
    #[serde(default = "default_checks")]
    pub checks: usize,
}

fn default_checks() -> usize {
    crate::representations::VALIDATION_SAMPLES
}

/// Per-replica observables and their summaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    /// `values[i][p]` is probe `p` of replica `i`.
    pub values: Vec<Vec<f64>>,
    pub summaries: Vec<Summary>,
    pub lag1: Vec<f64>,
}

impl ExperimentResult {
    /// Column `p` over replicas.
    pub fn column(&self, p: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[p]).collect()
    }

    /// CSV table `replica,x,y,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replica", "x", "y", "value"])?;
        for (i, row) in self.values.iter().enumerate() {
            for (p, v) in row.iter().enumerate() {
                let (x, y) = self.spec.probes[p];
                w.write_record([i.to_string(), fmt_f64(x), fmt_f64(y), fmt_f64(*v)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Run every replica of `spec`. Each replica builds (and so validates) a
/// representation; any failure fails the experiment.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    if spec.num_replicas == 0 {
        return Err(Error::Config("num_replicas: must be at least 1".into()));
    }
    if spec.probes.is_empty() {
        return Err(Error::Config("probes: need at least one probe".into()));
    }
    let mut rep_spec = spec.rep.clone();
    rep_spec.validate()?;
    rep_spec.checks = spec.checks;
    let values = run_replicas(spec.num_replicas, spec.seed, |rng| {
        let mut rep = build_representation(spec.model, &rep_spec, rng)?;
        if spec.scaled {
            rep = scale_to_fixed_point(spec.model, &rep, rep_spec.t, rep_spec.theta)?;
        }
        spec.probes.iter().map(|&(x, y)| rep.sheet(x, y)).collect()
    })?;
    let columns: Vec<Vec<f64>> = (0..spec.probes.len()).map(|p| values.iter().map(|r| r[p]).collect()).collect();
    let summaries = columns.iter().map(|c| Summary::of(c)).collect::<Result<_>>()?;
    let lag1 = columns.iter().map(|c| lag1_autocorrelation(c)).collect();
    Ok(ExperimentResult { spec: spec.clone(), values, summaries, lag1 })
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal `a`
/// and off-diagonal `b`, by Sturm-count bisection.
pub fn tridiagonal_max_eigenvalue(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    // Gershgorin bounds.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { b[i - 1].abs() } else { 0.0 } + if i + 1 < n { b[i].abs() } else { 0.0 };
        lo = lo.min(a[i] - r);
        hi = hi.max(a[i] + r);
    }
    // Number of eigenvalues below x.
    let below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..n {
            let off = if i > 0 { b[i - 1] * b[i - 1] } else { 0.0 };
            d = a[i] - x - if i > 0 { off / d } else { 0.0 };
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// A sample of `B((0, n) -> (1, 1))` for independent standard Brownian
/// motions, through its equality in law with the top eigenvalue of an
/// `n x n` GUE matrix in tridiagonal form.
pub fn sample_bl_passage_exact<R: Rng>(n: usize, rng: &mut R) -> f64 {
    let a: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let b: Vec<f64> = (1..n)
        .map(|i| {
            let dof = 2.0 * (n - i) as f64;
            let c: f64 = ChiSquared::new(dof).unwrap().sample(rng);
            (c / 2.0).sqrt()
        })
        .collect();
    tridiagonal_max_eigenvalue(&a, &b)
}

/// `S^{BL -> FP}_n(0, 0) = n^{1/6} B((0, n) -> (1, 1)) - 2 n^{2/3}` from the
/// exact sampler.
pub fn sample_bl_fp_origin<R: Rng>(n: usize, rng: &mut R) -> f64 {
    let nf = n as f64;
    nf.powf(1.0 / 6.0) * sample_bl_passage_exact(n, rng) - 2.0 * nf.powf(2.0 / 3.0)
}

/// `S^{BL -> FP}_n(0, 0)` from a Brownian environment sampled on `[0, 1]`
/// with step `dx`, by the last passage recursion.
pub fn sample_bl_fp_origin_grid(n: usize, dx: f64, rng: RngSpec) -> Result<f64> {
    let points = (1.0 / dx).round() as usize + 1;
    let env = sample_brownian(n, 0.0, dx, points, rng)?;
    let b = lpp_value(&env, Point::new(0, n), Point::new(points - 1, 1))?;
    let nf = n as f64;
    Ok(nf.powf(1.0 / 6.0) * b - 2.0 * nf.powf(2.0 / 3.0))
}

/// Settings of the symmetry diagnostic for the Brownian representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetrySpec {
    pub n: usize,
    pub dx: f64,
    pub length: f64,
    /// Shift `alpha`: the representation is `Z(x, y + alpha, k)`.
    pub alpha: f64,
    pub num_replicas: usize,
    pub seed: u64,
    /// `(x, y)` compared with `(0, y - x)`.
    pub pair: (f64, f64),
    /// Positions `x` at which `Z(x, 0, 1)` is compared with `Z(0, -x, 1)`.
    pub sym2_points: Vec<f64>,
    /// Quadratic drift `c y^2` added to every source level. Nonzero values
    /// break translation invariance and serve as a negative control.
    pub drift: f64,
}

impl Default for SymmetrySpec {
    fn default() -> Self {
        SymmetrySpec {
            n: 3,
            dx: 0.05,
            length: 1.5,
            alpha: 1.0,
            num_replicas: 5000,
            seed: 7,
            pair: (0.3, 0.5),
            sym2_points: vec![0.25, 0.5, 0.75],
            drift: 0.0,
        }
    }
}

/// KS distances of the two symmetry diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub sym1: f64,
    /// `(x, distance)` per point.
    pub sym2: Vec<(f64, f64)>,
}

impl SymmetryReport {
    pub fn worst(&self) -> f64 {
        self.sym2.iter().map(|p| p.1).fold(self.sym1, f64::max)
    }
}

/// Compare `Z(x, y, 1)` with `Z(0, y - x, 1)` and `Z(x, 0, 1)` with
/// `Z(0, -x, 1)` in law, on Brownian representations shifted by `alpha`.
pub fn symmetry_diagnostic(spec: &SymmetrySpec) -> Result<SymmetryReport> {
    if spec.num_replicas < 2000 {
        return Err(Error::Parameter(format!("need at least 2000 replicas, got {}", spec.num_replicas)));
    }
    let (x, y) = spec.pair;
    let shift = ScalingParams::new(1.0, 1.0, spec.alpha, 0.0, vec![0.0])?;
    let points = (spec.length / spec.dx).round() as usize + 1;
    let rows = run_replicas(spec.num_replicas, spec.seed, |rng| {
        let mut src = sample_brownian(spec.n, 0.0, spec.dx, points, rng)?;
        if spec.drift != 0.0 {
            let drift = GridEnvironment::from_fn(src.grid().clone(), spec.n, |y, _| spec.drift * y * y)?;
            src = src.add(&drift)?;
        }
        let rep = change_of_variables(&brownian_representation(&src)?, &shift)?;
        let mut out = vec![rep.sheet(x, y)?, rep.sheet(0.0, y - x)?];
        for &p in &spec.sym2_points {
            out.push(rep.sheet(p, 0.0)?);
            out.push(rep.sheet(0.0, -p)?);
        }
        Ok(out)
    })?;
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let sym1 = ks_two_sample(&col(0), &col(1))?;
    let sym2 = spec
        .sym2_points
        .iter()
        .enumerate()
        .map(|(j, &p)| Ok((p, ks_two_sample(&col(2 + 2 * j), &col(3 + 2 * j))?)))
        .collect::<Result<_>>()?;
    Ok(SymmetryReport { sym1, sym2 })
}
