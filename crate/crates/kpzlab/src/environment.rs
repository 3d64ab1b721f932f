//! Environments `A(y, k)` on which the recursions run.
//!
//! A [`GridEnvironment`] samples a continuous environment at sorted abscissae
//! and is read piecewise-linearly between them. Every supremum over `z` in the
//! action recursion is then attained at a grid point, so grid dynamic
//! programming is exact for the interpolated model. A [`LatticeEnvironment`]
//! stores a discrete environment on an evenly spaced lattice.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::numerics::nearest_index;
use crate::{Error, Result};

/// Seed and stream of a reproducible random source.
///
/// Streams with the same seed and different ids are independent; the same
/// pair always produces the same numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngSpec { seed, stream_id }
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        RngSpec { stream_id, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Strictly increasing abscissae shared by environments and action fields.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    xs: Vec<f64>,
    step: Option<f64>,
}

impl Grid {
    /// The grid `x0 + i * dx` for `i < num_points`.
    pub fn uniform(x0: f64, dx: f64, num_points: usize) -> Result<Grid> {
        if !(dx > 0.0) || !dx.is_finite() || !x0.is_finite() {
            return Err(Error::Parameter(format!("grid step must be positive, got {dx}")));
        }
        if num_points < 2 {
            return Err(Error::Parameter(format!("a grid needs at least 2 points, got {num_points}")));
        }
        let xs = (0..num_points).map(|i| x0 + i as f64 * dx).collect();
        Ok(Grid { xs, step: Some(dx) })
    }

    /// A grid with arbitrary strictly increasing abscissae.
    pub fn from_points(xs: Vec<f64>) -> Result<Grid> {
        if xs.len() < 2 {
            return Err(Error::Parameter(format!("a grid needs at least 2 points, got {}", xs.len())));
        }
        if xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("grid abscissae must be finite and strictly increasing".into()));
        }
        Ok(Grid { xs, step: None })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.xs[i]
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    /// Grid step when the grid was built uniform.
    pub fn step(&self) -> Option<f64> {
        self.step
    }

    pub fn nearest(&self, x: f64) -> usize {
        nearest_index(&self.xs, x)
    }

    /// Index of the grid point equal to `x` up to a relative tolerance.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let i = self.nearest(x);
        let scale = 1.0 + x.abs().max(self.xs[self.xs.len() - 1] - self.xs[0]);
        ((self.xs[i] - x).abs() <= 1e-9 * scale).then_some(i)
    }

    /// Image of the grid under `x -> (x - shift) / scale`.
    pub fn affine_image(&self, shift: f64, scale: f64) -> Grid {
        let xs = self.xs.iter().map(|x| (x - shift) / scale).collect();
        Grid { xs, step: self.step.map(|s| s / scale) }
    }

    /// The grid with its first `count` points removed.
    pub fn drop_front(&self, count: usize) -> Result<Grid> {
        let xs = self.xs[count.min(self.xs.len())..].to_vec();
        let step = self.step;
        Grid::from_points(xs).map(|g| Grid { step, ..g })
    }
}

/// A continuous environment sampled on a grid, levels `1..=num_levels`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridEnvironment {
    grid: Grid,
    num_levels: usize,
    /// Level-major storage: `values[(k - 1) * n + i] = A(x_i, k)`.
    values: Vec<f64>,
}

impl GridEnvironment {
    pub fn new(grid: Grid, num_levels: usize, values: Vec<f64>) -> Result<Self> {
        if num_levels == 0 {
            return Err(Error::Parameter("an environment needs at least one level".into()));
        }
        if values.len() != grid.len() * num_levels {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                grid.len() * num_levels,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("environment values must be finite".into()));
        }
        Ok(GridEnvironment { grid, num_levels, values })
    }

    /// Build from one vector per level, level 1 first.
    pub fn from_levels(grid: Grid, levels: Vec<Vec<f64>>) -> Result<Self> {
        let num_levels = levels.len();
        if levels.iter().any(|l| l.len() != grid.len()) {
            return Err(Error::Shape("every level must match the grid".into()));
        }
        Self::new(grid, num_levels, levels.concat())
    }

    pub fn from_fn(grid: Grid, num_levels: usize, f: impl Fn(f64, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * num_levels);
        for k in 1..=num_levels {
            values.extend(grid.xs().iter().map(|&x| f(x, k)));
        }
        Self::new(grid, num_levels, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn num_points(&self) -> usize {
        self.grid.len()
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    pub fn x(&self, i: usize) -> f64 {
        self.grid.x(i)
    }

    #[inline]
    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.values[(k - 1) * self.grid.len() + i]
    }

    /// The samples of level `k`.
    pub fn level(&self, k: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[(k - 1) * n..k * n]
    }

    /// Piecewise-linear interpolation of level `k` at `x`, held constant
    /// outside the grid.
    pub fn interpolate(&self, x: f64, k: usize) -> f64 {
        let (xs, v) = (self.grid.xs(), self.level(k));
        let j = xs.partition_point(|&p| p <= x);
        if j == 0 {
            return v[0];
        }
        if j == xs.len() {
            return v[j - 1];
        }
        let t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
        v[j - 1] + t * (v[j] - v[j - 1])
    }

    /// Pointwise sum of two environments on the same grid.
    pub fn add(&self, other: &GridEnvironment) -> Result<GridEnvironment> {
        if self.grid != other.grid || self.num_levels != other.num_levels {
            return Err(Error::Shape("environments differ in grid or levels".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Self::new(self.grid.clone(), self.num_levels, values)
    }

    /// Keep levels `1..=num_levels`.
    pub fn truncate_levels(&self, num_levels: usize) -> Result<GridEnvironment> {
        if num_levels == 0 || num_levels > self.num_levels {
            return Err(Error::Parameter(format!("cannot keep {num_levels} of {} levels", self.num_levels)));
        }
        let n = self.grid.len();
        Self::new(self.grid.clone(), num_levels, self.values[..n * num_levels].to_vec())
    }

    /// Reinterpret a uniform grid environment as a lattice environment.
    pub fn to_lattice(&self) -> Result<LatticeEnvironment> {
        let delta = self
            .grid
            .step()
            .ok_or_else(|| Error::Domain("only uniform grids convert to lattices".into()))?;
        LatticeEnvironment::new(self.grid.x(0), delta, self.num_points(), self.num_levels, self.values.clone())
    }

    /// CSV dump `x,level,value`, level-major.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "level", "value"])?;
        for k in 1..=self.num_levels {
            for i in 0..self.num_points() {
                w.write_record([fmt_f64(self.x(i)), k.to_string(), fmt_f64(self.value(i, k))])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// A discrete environment on the lattice `x0 + i * delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeEnvironment {
    x0: f64,
    delta: f64,
    num_points: usize,
    num_levels: usize,
    values: Vec<f64>,
}

impl LatticeEnvironment {
    pub fn new(x0: f64, delta: f64, num_points: usize, num_levels: usize, values: Vec<f64>) -> Result<Self> {
        if !(delta > 0.0) || num_points == 0 || num_levels == 0 {
            return Err(Error::Parameter("lattice needs delta > 0 and nonempty dimensions".into()));
        }
        if values.len() != num_points * num_levels {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                num_points * num_levels,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("environment values must be finite".into()));
        }
        Ok(LatticeEnvironment { x0, delta, num_points, num_levels, values })
    }

    /// Build from cumulative values per level, level 1 first.
    pub fn from_levels(x0: f64, delta: f64, levels: Vec<Vec<f64>>) -> Result<Self> {
        let num_levels = levels.len();
        let num_points = levels.first().map_or(0, Vec::len);
        if levels.iter().any(|l| l.len() != num_points) {
            return Err(Error::Shape("every level must have the same length".into()));
        }
        Self::new(x0, delta, num_points, num_levels, levels.concat())
    }

    /// Build from per-vertex increments `d(i, k)` for `i >= 1`; the cumulative
    /// values start at 0 for `i = 0`.
    pub fn from_increments(x0: f64, delta: f64, increments: Vec<Vec<f64>>) -> Result<Self> {
        let levels = increments
            .into_iter()
            .map(|inc| {
                let mut acc = 0.0;
                std::iter::once(0.0)
                    .chain(inc.into_iter().map(|d| {
                        acc += d;
                        acc
                    }))
                    .collect()
            })
            .collect();
        Self::from_levels(x0, delta, levels)
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.delta
    }

    #[inline]
    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.values[(k - 1) * self.num_points + i]
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.values[(k - 1) * self.num_points..k * self.num_points]
    }

    /// The vertex weight `A(x_i, k) - A(x_{i-1}, k)`, defined for `i >= 1`.
    #[inline]
    pub fn increment(&self, i: usize, k: usize) -> f64 {
        self.value(i, k) - self.value(i - 1, k)
    }

    pub fn grid(&self) -> Grid {
        Grid::uniform(self.x0, self.delta, self.num_points.max(2)).expect("valid lattice")
    }

    /// CSV dump `i,level,value`, level-major.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "level", "value"])?;
        for k in 1..=self.num_levels {
            for i in 0..self.num_points {
                w.write_record([i.to_string(), k.to_string(), fmt_f64(self.value(i, k))])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Independent Brownian levels with diffusion one on the grid
/// `x0 + i * dx`, each pinned to 0 at the grid point nearest the origin.
pub fn sample_brownian(num_levels: usize, x0: f64, dx: f64, num_points: usize, rng: RngSpec) -> Result<GridEnvironment> {
    let grid = Grid::uniform(x0, dx, num_points)?;
    if num_levels == 0 {
        return Err(Error::Parameter("need at least one level".into()));
    }
    let mut r = rng.rng();
    let anchor = grid.nearest(0.0);
    let sd = dx.sqrt();
    let mut values = Vec::with_capacity(num_points * num_levels);
    for _ in 0..num_levels {
        let mut walk = Vec::with_capacity(num_points);
        let mut acc = 0.0;
        walk.push(0.0);
        for _ in 1..num_points {
            let z: f64 = StandardNormal.sample(&mut r);
            acc += sd * z;
            walk.push(acc);
        }
        let shift = walk[anchor];
        values.extend(walk.into_iter().map(|v| v - shift));
    }
    GridEnvironment::new(grid, num_levels, values)
}

/// Log-gamma lattice: `D(0, k) = 0` and i.i.d. increments `log W` with `W`
/// inverse-gamma(theta), for `i = 1..=width`.
pub fn sample_inverse_gamma_lattice(theta: f64, width: usize, num_levels: usize, rng: RngSpec) -> Result<LatticeEnvironment> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::Parameter(format!("theta must be positive, got {theta}")));
    }
    if num_levels == 0 {
        return Err(Error::Parameter("need at least one level".into()));
    }
    let gamma = Gamma::new(theta, 1.0).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut r = rng.rng();
    let increments = (0..num_levels)
        .map(|_| (0..width).map(|_| -gamma.sample(&mut r).ln()).collect())
        .collect();
    LatticeEnvironment::from_increments(0.0, 1.0, increments)
}

/// `A(y, k) = c` on every level.
pub fn constant_environment(c: f64, x0: f64, dx: f64, num_points: usize, num_levels: usize) -> Result<GridEnvironment> {
    GridEnvironment::from_fn(Grid::uniform(x0, dx, num_points)?, num_levels, |_, _| c)
}

/// `A(y, k) = slopes[k - 1] * y`.
pub fn linear_environment(slopes: &[f64], x0: f64, dx: f64, num_points: usize) -> Result<GridEnvironment> {
    GridEnvironment::from_fn(Grid::uniform(x0, dx, num_points)?, slopes.len(), |x, k| slopes[k - 1] * x)
}

/// Shortest round-trip formatting, with `-inf` for minus infinity.
pub fn fmt_f64(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_is_pinned_and_reproducible() {
        let a = sample_brownian(3, -1.0, 0.1, 21, RngSpec::new(7, 2)).unwrap();
        let b = sample_brownian(3, -1.0, 0.1, 21, RngSpec::new(7, 2)).unwrap();
        assert_eq!(a, b);
        let anchor = a.grid().nearest(0.0);
        for k in 1..=3 {
            assert_eq!(a.value(anchor, k), 0.0);
        }
        let c = sample_brownian(3, -1.0, 0.1, 21, RngSpec::new(7, 3)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn brownian_rejects_bad_dimensions() {
        assert!(sample_brownian(1, 0.0, 0.0, 10, RngSpec::new(0, 0)).is_err());
        assert!(sample_brownian(1, 0.0, 0.1, 1, RngSpec::new(0, 0)).is_err());
        assert!(sample_brownian(0, 0.0, 0.1, 5, RngSpec::new(0, 0)).is_err());
    }

    #[test]
    fn lattice_starts_at_zero() {
        let d = sample_inverse_gamma_lattice(2.0, 5, 3, RngSpec::new(1, 0)).unwrap();
        for k in 1..=3 {
            assert_eq!(d.value(0, k), 0.0);
        }
        assert_eq!(d.num_points(), 6);
        assert_eq!(d.delta(), 1.0);
        assert!(sample_inverse_gamma_lattice(0.0, 5, 3, RngSpec::new(1, 0)).is_err());
        assert_eq!(d, sample_inverse_gamma_lattice(2.0, 5, 3, RngSpec::new(1, 0)).unwrap());
    }

    #[test]
    fn fixtures() {
        let z = constant_environment(0.0, 0.0, 0.5, 3, 2).unwrap();
        assert!(z.level(1).iter().chain(z.level(2)).all(|&v| v == 0.0));
        let l = linear_environment(&[0.0, 1.0], 0.0, 0.5, 3).unwrap();
        assert_eq!(l.level(2), &[0.0, 0.5, 1.0]);
        let c = constant_environment(2.0, 0.0, 0.5, 3, 2).unwrap();
        let s = l.add(&c).unwrap();
        assert_eq!(s.level(2), &[2.0, 2.5, 3.0]);
    }

    #[test]
    fn csv_dump_is_level_major() {
        let l = linear_environment(&[0.0, 1.0], 0.0, 0.5, 2).unwrap();
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "x,level,value\n0.0,1,0.0\n0.5,1,0.0\n0.0,2,0.0\n0.5,2,0.5\n");
    }

    #[test]
    fn index_of_tolerates_rounding() {
        let g = Grid::uniform(0.0, 0.1, 11).unwrap();
        assert_eq!(g.index_of(0.3), Some(3));
        assert_eq!(g.index_of(0.35), None);
    }
}
