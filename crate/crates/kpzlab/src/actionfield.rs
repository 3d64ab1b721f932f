//! Actions and their recursions.
//!
//! A max-plus action satisfies, for `x < y` and every level `k`,
//!
//! ```text
//! T(y,k) = (T(x,k) + A(y,k) - A(x,k)) v sup_{z in [x,y]} (T(z,k+1) + A(y,k) - A(z,k))
//! ```
//!
//! so each level is the Skorokhod reflection of `A(., k)` off the level below.
//! The polymer version replaces the maximum by an integral of `w^T`, and the
//! discrete versions step one lattice site at a time.
//!
//! Fields cover levels `1..=K` of an environment. The barrier seen by level
//! `K` is an optional external slice (`below`); without it the barrier is
//! `NEG_INF`.

use std::io::Write;

use rand::Rng;

use crate::environment::{fmt_f64, Grid, GridEnvironment, LatticeEnvironment};
use crate::lastpassage::{lpp_table, Point};
use crate::numerics::{ext_diff, log_cumtrapz, logaddexp};
use crate::{Error, Result, NEG_INF};

/// Which recursion a field satisfies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActionKind {
    MaxPlus,
    Polymer { w: f64 },
    Discrete { delta: f64 },
    DiscretePolymer { w: f64, delta: f64 },
}

/// Values `T(y, k)` on a grid and levels `1..=K`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionField {
    grid: Grid,
    num_levels: usize,
    values: Vec<f64>,
    below: Option<Vec<f64>>,
    kind: ActionKind,
    /// Stored left and right limits at each grid point, when the field is not
    /// continuous. `None` means both limits equal the values.
    limits: Option<(Vec<f64>, Vec<f64>)>,
}

fn check_values(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::Parameter("action values must be finite or NEG_INF".into()));
    }
    Ok(())
}

impl ActionField {
    pub fn new(grid: Grid, num_levels: usize, values: Vec<f64>, kind: ActionKind) -> Result<Self> {
        if num_levels == 0 || values.len() != grid.len() * num_levels {
            return Err(Error::Shape(format!(
                "expected {} x {} values, got {}",
                grid.len(),
                num_levels,
                values.len()
            )));
        }
        check_values(&values)?;
        Ok(ActionField { grid, num_levels, values, below: None, kind, limits: None })
    }

    /// Attach the barrier seen by the deepest level.
    pub fn with_below(mut self, below: Vec<f64>) -> Result<Self> {
        if below.len() != self.grid.len() {
            return Err(Error::Shape("boundary slice must match the grid".into()));
        }
        check_values(&below)?;
        self.below = Some(below);
        Ok(self)
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

    pub fn kind(&self) -> ActionKind {
        self.kind
    }

    #[inline]
    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.values[(k - 1) * self.grid.len() + i]
    }

    pub fn at(&self, q: Point) -> f64 {
        self.value(q.x, q.k)
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[(k - 1) * n..k * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn below(&self) -> Option<&[f64]> {
        self.below.as_deref()
    }

    /// `T(x_i, k + 1)`, reading the external boundary below the deepest level.
    #[inline]
    pub fn barrier_value(&self, i: usize, k: usize) -> f64 {
        if k < self.num_levels {
            self.value(i, k + 1)
        } else {
            self.below.as_ref().map_or(NEG_INF, |b| b[i])
        }
    }

    /// Set a single value while keeping the one-sided limits of the old field.
    /// This is how an isolated point discontinuity is represented.
    pub fn with_point_value(mut self, i: usize, k: usize, v: f64) -> Result<Self> {
        check_values(&[v])?;
        if self.limits.is_none() {
            self.limits = Some((self.values.clone(), self.values.clone()));
        }
        let n = self.grid.len();
        self.values[(k - 1) * n + i] = v;
        Ok(self)
    }

    /// Apply `f(x, y, level)` to every finite value; `NEG_INF` is kept.
    pub(crate) fn map_values(&self, grid: Grid, kind: ActionKind, f: impl Fn(usize, usize, f64) -> f64) -> Result<Self> {
        let n = self.grid.len();
        let mut values = self.values.clone();
        for k in 1..=self.num_levels {
            for i in 0..n {
                let v = &mut values[(k - 1) * n + i];
                if *v != NEG_INF {
                    *v = f(i, k, *v);
                }
            }
        }
        let mut out = ActionField::new(grid, self.num_levels, values, kind)?;
        if let Some(b) = &self.below {
            let k = self.num_levels + 1;
            out.below = Some(b.iter().enumerate().map(|(i, &v)| if v == NEG_INF { v } else { f(i, k, v) }).collect());
        }
        Ok(out)
    }

    /// CSV dump `x,level,value` with `-inf` for `NEG_INF`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "level", "value"])?;
        for k in 1..=self.num_levels {
            for i in 0..self.num_points() {
                w.write_record([fmt_f64(self.grid.x(i)), k.to_string(), fmt_f64(self.value(i, k))])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// One level of the max-plus recursion: reflect `driver` off `barrier`
/// starting from `init` at the left edge.
///
/// `T(x_0) = init v barrier(x_0)` and for `y > x_0`
/// `T(y) = A(y) + max(init - A(x_0), max_{z <= y} (barrier(z) - A(z)))`.
pub fn skorokhod_reflect(driver: &[f64], barrier: Option<&[f64]>, init: f64) -> Result<Vec<f64>> {
    if let Some(b) = barrier {
        if b.len() != driver.len() {
            return Err(Error::Domain("driver and barrier live on different grids".into()));
        }
    }
    if driver.is_empty() {
        return Ok(Vec::new());
    }
    let mut run = init - driver[0];
    let mut out = Vec::with_capacity(driver.len());
    for (i, &a) in driver.iter().enumerate() {
        if let Some(b) = barrier {
            run = run.max(b[i] - a);
        }
        out.push(a + run);
    }
    Ok(out)
}

fn check_inits(env_levels: usize, left_inits: &[f64], below: Option<&[f64]>, n: usize) -> Result<()> {
    if left_inits.len() != env_levels {
        return Err(Error::Shape(format!("need {env_levels} left inits, got {}", left_inits.len())));
    }
    if below.is_some_and(|b| b.len() != n) {
        return Err(Error::Shape("boundary slice must match the grid".into()));
    }
    check_values(left_inits)
}

/// Evolve the max-plus recursion from the deepest level up.
///
/// `below` is the barrier beneath level `K` (`None` for `NEG_INF`) and
/// `left_inits[k - 1]` is the value at the left edge on level `k`.
pub fn evolve_action(env: &GridEnvironment, below: Option<&[f64]>, left_inits: &[f64]) -> Result<ActionField> {
    let n = env.num_points();
    let kk = env.num_levels();
    check_inits(kk, left_inits, below, n)?;
    let mut values = vec![0.0; n * kk];
    for k in (1..=kk).rev() {
        let level = {
            let barrier = if k == kk { below } else { Some(&values[k * n..(k + 1) * n]) };
            skorokhod_reflect(env.level(k), barrier, left_inits[k - 1])?
        };
        values[(k - 1) * n..k * n].copy_from_slice(&level);
    }
    let f = ActionField::new(env.grid().clone(), kk, values, ActionKind::MaxPlus)?;
    match below {
        Some(b) => f.with_below(b.to_vec()),
        None => Ok(f),
    }
}

/// The field `T(p) = A(q0 -> p)` for `q0 <= p` and `NEG_INF` otherwise.
pub fn action_from_point(env: &GridEnvironment, q0: Point) -> Result<ActionField> {
    if q0.x >= env.num_points() || q0.k == 0 || q0.k > env.num_levels() {
        return Err(Error::Domain(format!("{q0:?} is not on the grid")));
    }
    let t = lpp_table(env, q0, env.num_points() - 1);
    ActionField::new(env.grid().clone(), env.num_levels(), t, ActionKind::MaxPlus)
}

/// The `w`-polymer field `T(p) = log_w` of the path integral from `q0` to
/// `p`, with `NEG_INF` where `q0` does not precede `p`. On levels above `q0`
/// the value at `x = q0.x` is `NEG_INF` since no path has positive length.
pub fn polymer_from_point(env: &GridEnvironment, q0: Point, w: f64) -> Result<ActionField> {
    if q0.x >= env.num_points() || q0.k == 0 || q0.k > env.num_levels() {
        return Err(Error::Domain(format!("{q0:?} is not on the grid")));
    }
    let beta = check_w(w)?;
    let n = env.num_points();
    let xs = &env.grid().xs()[q0.x..];
    let mut values = vec![NEG_INF; n * env.num_levels()];
    let a = &env.level(q0.k)[q0.x..];
    let mut t: Vec<f64> = a.iter().map(|v| v - a[0]).collect();
    values[(q0.k - 1) * n + q0.x..q0.k * n].copy_from_slice(&t);
    for k in (1..q0.k).rev() {
        let a = &env.level(k)[q0.x..];
        let g: Vec<f64> = t.iter().zip(a).map(|(t, a)| beta * (t - a)).collect();
        let cum = log_cumtrapz(xs, &g);
        t = cum.iter().zip(a).map(|(c, a)| if *c == NEG_INF { NEG_INF } else { a + c / beta }).collect();
        values[(k - 1) * n + q0.x..k * n].copy_from_slice(&t);
    }
    ActionField::new(env.grid().clone(), env.num_levels(), values, ActionKind::Polymer { w })
}

/// The discrete `w`-polymer field from the lattice point `q0`: the `log_w`
/// sum over lattice paths from `q0` of `w` to the path weight, where a path
/// collects the increment of every vertex it visits, `q0` included.
pub fn discrete_polymer_from_point(env: &LatticeEnvironment, q0: Point, w: f64) -> Result<ActionField> {
    if q0.x == 0 || q0.x >= env.num_points() || q0.k == 0 || q0.k > env.num_levels() {
        return Err(Error::Domain(format!("{q0:?} is not an interior lattice point")));
    }
    let beta = check_w(w)?;
    let n = env.num_points();
    let kk = env.num_levels();
    let mut values = vec![NEG_INF; n * kk];
    for k in (1..=q0.k).rev() {
        for i in q0.x..n {
            let v = if i == q0.x && k == q0.k {
                env.increment(i, k)
            } else {
                let left = if i > q0.x { values[(k - 1) * n + i - 1] } else { NEG_INF };
                let barrier = if k < q0.k { values[k * n + i] } else { NEG_INF };
                discrete_polymer_step(left, barrier, env.increment(i, k), beta)
            };
            values[(k - 1) * n + i] = v;
        }
    }
    ActionField::new(env.grid(), kk, values, ActionKind::DiscretePolymer { w, delta: env.delta() })
}

/// Pointwise maximum of max-plus fields on a common grid.
pub fn sup_of_actions(fields: &[ActionField]) -> Result<ActionField> {
    let first = fields.first().ok_or_else(|| Error::Shape("need at least one field".into()))?;
    for f in fields {
        if f.kind != ActionKind::MaxPlus {
            return Err(Error::Kind("sup_of_actions needs max-plus fields".into()));
        }
        if f.grid != first.grid || f.num_levels != first.num_levels {
            return Err(Error::Shape("fields live on different grids".into()));
        }
    }
    let max_vec = |get: &dyn Fn(&ActionField) -> Option<Vec<f64>>, len: usize| -> Option<Vec<f64>> {
        let parts: Vec<Option<Vec<f64>>> = fields.iter().map(get).collect();
        if parts.iter().all(Option::is_none) {
            return None;
        }
        let mut out = vec![NEG_INF; len];
        for p in parts.into_iter().flatten() {
            for (o, v) in out.iter_mut().zip(p) {
                *o = o.max(v);
            }
        }
        Some(out)
    };
    let len = first.values.len();
    let values = max_vec(&|f| Some(f.values.clone()), len).unwrap();
    let mut out = ActionField::new(first.grid.clone(), first.num_levels, values, ActionKind::MaxPlus)?;
    out.below = max_vec(&|f| f.below.clone(), first.grid.len());
    let left = max_vec(&|f| Some(f.limits.as_ref().map_or_else(|| f.values.clone(), |l| l.0.clone())), len);
    let right = max_vec(&|f| Some(f.limits.as_ref().map_or_else(|| f.values.clone(), |l| l.1.clone())), len);
    if fields.iter().any(|f| f.limits.is_some()) {
        out.limits = Some((left.unwrap(), right.unwrap()));
    }
    Ok(out)
}

/// Upper semicontinuous envelope at grid scale: each value becomes the
/// maximum of itself and its stored one-sided limits. Continuous fields are
/// unchanged and the operation is idempotent.
pub fn usc_envelope(field: &ActionField) -> ActionField {
    let mut out = field.clone();
    if let Some((left, right)) = &field.limits {
        let n = field.grid.len();
        for (j, v) in out.values.iter_mut().enumerate() {
            let i = j % n;
            let l = if i == 0 { NEG_INF } else { left[j] };
            *v = v.max(l).max(right[j]);
        }
    }
    out
}

fn check_w(w: f64) -> Result<f64> {
    if !(w > 1.0) || !w.is_finite() {
        return Err(Error::Parameter(format!("w must exceed 1, got {w}")));
    }
    Ok(w.ln())
}

/// Evolve the `w`-polymer recursion
/// `w^{T(y,k)} = w^{T(x,k)+A(y,k)-A(x,k)} + int_x^y w^{T(z,k+1)+A(y,k)-A(z,k)} dz`
/// with trapezoid quadrature on the grid. `T(x_0, k) = left_inits[k - 1]`.
pub fn polymer_evolve(env: &GridEnvironment, w: f64, below: Option<&[f64]>, left_inits: &[f64]) -> Result<ActionField> {
    let beta = check_w(w)?;
    let n = env.num_points();
    let kk = env.num_levels();
    check_inits(kk, left_inits, below, n)?;
    let xs = env.grid().xs();
    let mut values = vec![0.0; n * kk];
    for k in (1..=kk).rev() {
        let a = env.level(k);
        let start = beta * (left_inits[k - 1] - a[0]);
        let barrier = if k == kk { below } else { Some(&values[k * n..(k + 1) * n]) };
        let level: Vec<f64> = match barrier {
            None => a.iter().map(|v| v + start / beta).collect(),
            Some(b) => {
                let g: Vec<f64> = b.iter().zip(a).map(|(t, a)| beta * (t - a)).collect();
                let cum = log_cumtrapz(xs, &g);
                a.iter().zip(&cum).map(|(a, c)| a + logaddexp(start, *c) / beta).collect()
            }
        };
        values[(k - 1) * n..k * n].copy_from_slice(&level);
    }
    let f = ActionField::new(env.grid().clone(), kk, values, ActionKind::Polymer { w })?;
    match below {
        Some(b) => f.with_below(b.to_vec()),
        None => Ok(f),
    }
}

/// One step of the discrete max-plus recursion
/// `T(y,k) = (T(y - delta, k) v T(y, k + 1)) + A(y,k) - A(y - delta,k)`.
#[inline]
pub fn discrete_step(left: f64, barrier: f64, increment: f64) -> f64 {
    left.max(barrier) + increment
}

/// One step of the discrete polymer recursion in `log_w` units, with
/// `w^{-inf} = 0`.
#[inline]
pub fn discrete_polymer_step(left: f64, barrier: f64, increment: f64, beta: f64) -> f64 {
    let s = logaddexp(beta * left, beta * barrier);
    if s == NEG_INF {
        NEG_INF
    } else {
        s / beta + increment
    }
}

fn discrete_run(
    env: &LatticeEnvironment,
    below: Option<&[f64]>,
    left_inits: &[f64],
    kind: ActionKind,
    step: impl Fn(f64, f64, f64) -> f64,
) -> Result<ActionField> {
    let n = env.num_points();
    let kk = env.num_levels();
    check_inits(kk, left_inits, below, n)?;
    let mut values = vec![0.0; n * kk];
    for k in (1..=kk).rev() {
        values[(k - 1) * n] = left_inits[k - 1];
        for i in 1..n {
            let barrier = if k == kk { below.map_or(NEG_INF, |b| b[i]) } else { values[k * n + i] };
            values[(k - 1) * n + i] = step(values[(k - 1) * n + i - 1], barrier, env.increment(i, k));
        }
    }
    let f = ActionField::new(env.grid(), kk, values, kind)?;
    match below {
        Some(b) => f.with_below(b.to_vec()),
        None => Ok(f),
    }
}

/// Evolve the discrete max-plus recursion on a lattice.
pub fn discrete_evolve(env: &LatticeEnvironment, below: Option<&[f64]>, left_inits: &[f64]) -> Result<ActionField> {
    discrete_run(env, below, left_inits, ActionKind::Discrete { delta: env.delta() }, discrete_step)
}

/// Evolve the discrete `w`-polymer recursion on a lattice.
pub fn discrete_polymer_evolve(env: &LatticeEnvironment, w: f64, below: Option<&[f64]>, left_inits: &[f64]) -> Result<ActionField> {
    let beta = check_w(w)?;
    let kind = ActionKind::DiscretePolymer { w, delta: env.delta() };
    discrete_run(env, below, left_inits, kind, |l, b, d| discrete_polymer_step(l, b, d, beta))
}

/// Signed residual of the max-plus recursion at grid indices `x < y` on level
/// `k`: `T(y,k)` minus the right-hand side, recomputed by brute force over `z`.
/// Equal infinities count as agreement.
pub fn recursion_residual(field: &ActionField, env: &GridEnvironment, x: usize, y: usize, k: usize) -> f64 {
    let a = env.level(k);
    let mut rhs = field.value(x, k) + a[y] - a[x];
    for z in x..=y {
        rhs = rhs.max(field.barrier_value(z, k) + a[y] - a[z]);
    }
    ext_diff(field.value(y, k), rhs)
}

/// Signed residual of the polymer recursion between grid indices `x < y` on
/// level `k`, in `log_w` units. The integral is recomputed cell by cell.
pub fn polymer_residual(field: &ActionField, env: &GridEnvironment, w: f64, x: usize, y: usize, k: usize) -> f64 {
    let beta = w.ln();
    let a = env.level(k);
    let xs = env.grid().xs();
    let mut acc = beta * (field.value(x, k) - a[x]);
    for z in x + 1..=y {
        let g0 = beta * (field.barrier_value(z - 1, k) - a[z - 1]);
        let g1 = beta * (field.barrier_value(z, k) - a[z]);
        let cell = logaddexp(g0, g1);
        if cell != NEG_INF {
            acc = logaddexp(acc, (0.5 * (xs[z] - xs[z - 1])).ln() + cell);
        }
    }
    let rhs = if acc == NEG_INF { NEG_INF } else { a[y] + acc / beta };
    ext_diff(field.value(y, k), rhs)
}

/// Worst absolute recursion residual over `samples` random triples
/// `(x < y, k)`. Polymer fields use [`polymer_residual`].
pub fn max_residual_sampled<R: Rng>(field: &ActionField, env: &GridEnvironment, samples: usize, rng: &mut R) -> f64 {
    let n = env.num_points();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let mut x = rng.random_range(0..n);
        let mut y = rng.random_range(0..n);
        if x == y {
            continue;
        }
        if x > y {
            std::mem::swap(&mut x, &mut y);
        }
        let k = rng.random_range(1..=field.num_levels());
        let r = match field.kind {
            ActionKind::Polymer { w } => polymer_residual(field, env, w, x, y, k),
            _ => recursion_residual(field, env, x, y, k),
        };
        worst = worst.max(r.abs());
    }
    worst
}

/// Residual of the discrete one-step recursion at lattice index `i >= 1`.
pub fn discrete_residual(field: &ActionField, env: &LatticeEnvironment, i: usize, k: usize) -> f64 {
    let left = field.value(i - 1, k);
    let barrier = field.barrier_value(i, k);
    let rhs = match field.kind {
        ActionKind::DiscretePolymer { w, .. } => discrete_polymer_step(left, barrier, env.increment(i, k), w.ln()),
        _ => discrete_step(left, barrier, env.increment(i, k)),
    };
    ext_diff(field.value(i, k), rhs)
}

/// Right-hand side of the closed form of the discrete max-plus recursion
/// between lattice indices `x < y`:
/// `(T(x,k)+A(y,k)-A(x,k)) v max_{z in (x,y]} (T(z,k+1)+A(y,k)-A(z-1,k))`.
pub fn discrete_closed_form(field: &ActionField, env: &LatticeEnvironment, x: usize, y: usize, k: usize) -> f64 {
    let a = env.level(k);
    let mut rhs = field.value(x, k) + a[y] - a[x];
    for z in x + 1..=y {
        rhs = rhs.max(field.barrier_value(z, k) + a[y] - a[z - 1]);
    }
    rhs
}

/// Worst slacks of the Euler-Lagrange envelopes. Each entry is the minimum
/// over tested pairs of (right side - left side) for an upper bound, or
/// (left side - right side) for a lower bound; negative values are violations.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ElReport {
    pub upper: f64,
    pub lower_same_level: f64,
    pub lower_jump: f64,
    pub pairs: usize,
}

impl ElReport {
    fn new() -> Self {
        ElReport { upper: f64::INFINITY, lower_same_level: f64::INFINITY, lower_jump: f64::INFINITY, pairs: 0 }
    }

    /// Largest violation, 0 when every bound holds.
    pub fn worst_violation(&self) -> f64 {
        (-self.upper.min(self.lower_same_level).min(self.lower_jump)).max(0.0)
    }
}

fn slack(lhs: f64, rhs: f64) -> f64 {
    // rhs - lhs with -inf <= -inf treated as satisfied.
    if rhs == lhs {
        0.0
    } else {
        rhs - lhs
    }
}

/// Check the three Euler-Lagrange bounds for a polymer field on its grid, at
/// every grid pair `x < y` and level:
///
/// * `T(y) <= (T(x)+A(y)-A(x)) v sup_{z in [x,y]} (T(z,k+1)+A(y)-A(z)) + log_w(1+y-x)`
/// * `T(y) >= T(x)+A(y)-A(x)`
/// * `T(y) >= sup_{z in [x,y-delta]} (T(z,k+1)+A(y)-A(z)) + log_w(delta) - m(delta)`
///   for `y - x > delta`, with `m(delta)` the one-sided modulus of
///   `A(.,k) - A(.,k+1)` over `[x,y]`.
///
/// `delta` should be a whole number of grid steps; the bounds are then exact
/// properties of the quadrature, not only of the continuum recursion.
pub fn el_bounds_check(field: &ActionField, env: &GridEnvironment, w: f64, delta: f64) -> Result<ElReport> {
    let beta = check_w(w)?;
    if !(delta > 0.0) {
        return Err(Error::Parameter("delta must be positive".into()));
    }
    let xs = env.grid().xs();
    let n = env.num_points();
    let kk = field.num_levels();
    let mut rep = ElReport::new();
    let eps = 1e-12 * (xs[n - 1] - xs[0]).max(1.0);
    for k in 1..=kk {
        let a = env.level(k);
        let t = field.level(k);
        let has_next = k < kk;
        let b = |i: usize| field.barrier_value(i, k);
        let g: Vec<f64> = if has_next { (0..n).map(|i| a[i] - env.value(i, k + 1)).collect() } else { Vec::new() };
        for x in 0..n {
            if t[x] == NEG_INF {
                continue;
            }
            let mut sup_b = NEG_INF; // sup over z in [x, y] of T(z,k+1) - A(z,k)
            let mut sup_b_lag = NEG_INF; // same over z in [x, y - delta]
            let mut lag = x; // first z with xs[z] > xs[y] - delta
            let mut modulus = NEG_INF;
            for y in x..n {
                sup_b = sup_b.max(b(y) - a[y]);
                if has_next {
                    let mut z = y;
                    while z > x && xs[y] - xs[z - 1] <= delta + eps {
                        z -= 1;
                        modulus = modulus.max(g[y] - g[z]);
                    }
                }
                while lag <= y && xs[lag] <= xs[y] - delta + eps {
                    sup_b_lag = sup_b_lag.max(b(lag) - a[lag]);
                    lag += 1;
                }
                if y == x {
                    continue;
                }
                rep.pairs += 1;
                let same = t[x] + a[y] - a[x];
                let upper = same.max(a[y] + sup_b) + (1.0 + xs[y] - xs[x]).ln() / beta;
                rep.upper = rep.upper.min(slack(t[y], upper));
                rep.lower_same_level = rep.lower_same_level.min(slack(same, t[y]));
                if has_next && xs[y] - xs[x] > delta + eps && sup_b_lag != NEG_INF {
                    let rhs = a[y] + sup_b_lag + delta.ln() / beta - modulus.max(0.0);
                    rep.lower_jump = rep.lower_jump.min(slack(rhs, t[y]));
                }
            }
        }
    }
    Ok(rep)
}

/// Linear interpolation of lattice samples at a real abscissa inside the hull.
fn interp(x0: f64, delta: f64, v: &[f64], x: f64) -> f64 {
    let s = (x - x0) / delta;
    let i = (s.floor().max(0.0) as usize).min(v.len() - 2);
    let t = s - i as f64;
    if t <= 0.0 {
        return v[i];
    }
    if t >= 1.0 {
        return v[i + 1];
    }
    if v[i] == NEG_INF || v[i + 1] == NEG_INF {
        return NEG_INF;
    }
    v[i] * (1.0 - t) + v[i + 1] * t
}

/// Check the discrete Euler-Lagrange bounds for a discrete polymer field
/// against the linear interpolations of the field and environment, at the
/// real pairs `(x, y)` supplied by the caller (typically lattice pairs plus
/// random interior points).
pub fn discrete_el_bounds_check(field: &ActionField, env: &LatticeEnvironment, pairs: &[(f64, f64)]) -> Result<ElReport> {
    let (w, delta) = match field.kind {
        ActionKind::DiscretePolymer { w, delta } => (w, delta),
        _ => return Err(Error::Kind("discrete EL bounds need a discrete polymer field".into())),
    };
    let beta = w.ln();
    let x0 = env.x0();
    let n = env.num_points();
    let hi = env.x(n - 1);
    let kk = field.num_levels();
    let eps = 1e-12 * delta;
    let mut rep = ElReport::new();
    // Candidate maximisers of a piecewise-linear function on [lo, hi]: the
    // lattice points inside plus both ends.
    let candidates = |lo: f64, hi: f64| -> Vec<f64> {
        if lo > hi {
            return Vec::new();
        }
        let mut c = vec![lo, hi];
        let first = ((lo - x0) / delta).ceil().max(0.0) as usize;
        let mut i = first;
        while i < n && env.x(i) <= hi {
            c.push(env.x(i));
            i += 1;
        }
        c
    };
    for k in 1..=kk {
        let a = env.level(k);
        let t = field.level(k);
        let below: Vec<f64> = (0..n).map(|i| field.barrier_value(i, k)).collect();
        let ab = |x: f64| interp(x0, delta, a, x);
        let tb = |x: f64| interp(x0, delta, t, x);
        let bb = |x: f64| interp(x0, delta, &below, x);
        for &(x, y) in pairs {
            if !(x < y) || x < x0 - eps || y > hi + eps {
                return Err(Error::Domain(format!("pair ({x}, {y}) outside the lattice hull")));
            }
            let ty = tb(y);
            rep.pairs += 1;
            // Upper bound.
            let mut same = NEG_INF;
            for xp in candidates((x - delta).max(x0), (x + delta).min(hi)) {
                same = same.max(tb(xp) + ab(y) - ab(xp));
            }
            let mut jump = NEG_INF;
            for z in candidates((x - delta).max(x0 + delta), (y + delta).min(hi)) {
                if z - delta >= x0 - eps {
                    jump = jump.max(bb(z) + ab(y) - ab(z - delta));
                }
            }
            let upper = same.max(jump) + (2.0 + (y - x) / delta).ln() / beta;
            rep.upper = rep.upper.min(slack(ty, upper));
            // Same-level lower bound.
            rep.lower_same_level = rep.lower_same_level.min(slack(tb(x) + ab(y) - ab(x), ty));
            // Jump lower bound over z <= y with z - delta in the hull.
            if y - delta >= x0 - eps {
                let mut best = NEG_INF;
                for z in candidates(x0 + delta, y) {
                    best = best.max(bb(z) + ab(y) - ab(z - delta));
                }
                rep.lower_jump = rep.lower_jump.min(slack(best, ty));
            }
        }
    }
    Ok(rep)
}
