//! Hypograph distance between sampled upper semicontinuous functions.
//!
//! The map `Phi(x, y) = (atan x, 2 atan(y) / (pi (1 + x^2)))` sends the
//! extended plane into the compact set `K = {|z| < pi/2, |w| <= cos^2 z}`
//! plus the two poles `(+-pi/2, 0)`. A function sampled at abscissae `x_i` is
//! represented by the image of its hypograph: one vertical fiber per `x_i`
//! from the lower boundary of `K` up to `Phi(x_i, f(x_i))`, sampled with a
//! fixed vertical step, together with the poles.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::{Error, Result};

/// Default vertical sampling step of the fibers.
pub const FIBER_STEP: f64 = 1e-3;

/// `Phi(x, y)` with `atan(+-inf) = +-pi/2`.
pub fn phi_map(x: f64, y: f64) -> (f64, f64) {
    let z = x.atan();
    if x.is_infinite() {
        return (z, 0.0);
    }
    (z, 2.0 * y.atan() / (PI * (1.0 + x * x)))
}

/// One vertical fiber: samples `bottom + j * step` below `top`, then `top`.
#[derive(Clone, Debug, PartialEq)]
struct Fiber {
    z: f64,
    bottom: f64,
    top: f64,
    /// Index of the last regular sample strictly below `top`, if any.
    last: Option<usize>,
}

impl Fiber {
    fn new(x: f64, value: f64, step: f64) -> Fiber {
        let (z, top) = phi_map(x, value);
        let bottom = -1.0 / (1.0 + x * x);
        let span = top - bottom;
        let last = if span > step * 1e-9 { Some(((span / step) * (1.0 - 1e-12)).ceil() as usize - 1) } else { None };
        Fiber { z, bottom, top, last }
    }

    fn sample(&self, j: usize, step: f64) -> f64 {
        self.bottom + j as f64 * step
    }

    /// Vertical distance from `w` to the nearest sample.
    fn vertical_gap(&self, w: f64, step: f64) -> f64 {
        let mut best = (w - self.top).abs();
        if let Some(last) = self.last {
            let j = ((w - self.bottom) / step).round().clamp(0.0, last as f64) as usize;
            best = best.min((w - self.sample(j, step)).abs());
        }
        best
    }

    fn points(&self, step: f64) -> impl Iterator<Item = f64> + '_ {
        let regular = self.last.map_or(0, |l| l + 1);
        (0..regular).map(move |j| self.sample(j, step)).chain(std::iter::once(self.top))
    }
}

/// The mapped hypograph of a sampled function.
#[derive(Clone, Debug, PartialEq)]
pub struct HypographCloud {
    fibers: Vec<Fiber>,
    step: f64,
}

const POLES: [(f64, f64); 2] = [(-FRAC_PI_2, 0.0), (FRAC_PI_2, 0.0)];

impl HypographCloud {
    /// Fibers at `xs` up to `values` (extended reals, `NaN` rejected).
    pub fn new(xs: &[f64], values: &[f64], step: f64) -> Result<Self> {
        if xs.is_empty() || xs.len() != values.len() {
            return Err(Error::Shape("need one value per abscissa and at least one sample".into()));
        }
        if !(step > 0.0) {
            return Err(Error::Parameter("fiber step must be positive".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) || xs.iter().chain(values).any(|v| v.is_nan()) {
            return Err(Error::Parameter("abscissae must increase and values must not be NaN".into()));
        }
        let fibers = xs.iter().zip(values).map(|(&x, &v)| Fiber::new(x, v, step)).collect();
        Ok(HypographCloud { fibers, step })
    }

    /// Every point of the cloud, poles included.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = POLES.to_vec();
        for f in &self.fibers {
            out.extend(f.points(self.step).map(|w| (f.z, w)));
        }
        out
    }

    /// Distance from `(z, w)` to the nearest point of the cloud. Fibers are
    /// visited outwards from the nearest abscissa and the scan stops once the
    /// horizontal gap alone exceeds the best distance.
    fn distance_to(&self, z: f64, w: f64) -> f64 {
        let mut best = POLES.iter().map(|p| (p.0 - z).hypot(p.1 - w)).fold(f64::INFINITY, f64::min);
        let start = self.fibers.partition_point(|f| f.z < z);
        let visit = |i: usize, best: &mut f64| -> bool {
            let f = &self.fibers[i];
            let dz = (f.z - z).abs();
            if dz >= *best {
                return false;
            }
            *best = best.min(dz.hypot(f.vertical_gap(w, self.step)));
            true
        };
        for i in start..self.fibers.len() {
            if !visit(i, &mut best) {
                break;
            }
        }
        for i in (0..start).rev() {
            if !visit(i, &mut best) {
                break;
            }
        }
        best
    }

    fn directed(&self, other: &HypographCloud) -> f64 {
        let mut worst: f64 = 0.0;
        for p in POLES {
            worst = worst.max(other.distance_to(p.0, p.1));
        }
        for f in &self.fibers {
            for w in f.points(self.step) {
                worst = worst.max(other.distance_to(f.z, w));
            }
        }
        worst
    }

    /// Hausdorff distance between two clouds.
    pub fn distance(&self, other: &HypographCloud) -> f64 {
        self.directed(other).max(other.directed(self))
    }
}

/// Hausdorff distance between the mapped hypographs of `f` and `g` sampled at
/// `xs`, with the default fiber step.
pub fn hypograph_distance(xs: &[f64], f: &[f64], g: &[f64]) -> Result<f64> {
    let a = HypographCloud::new(xs, f, FIBER_STEP)?;
    let b = HypographCloud::new(xs, g, FIBER_STEP)?;
    Ok(a.distance(&b))
}

/// Slacks of the two limit properties of hypograph convergence, over the
/// last `tail` members of `sequence`:
///
/// * closed: `max_n sup_F f_n - sup_F f` for the closed window `F = [a, b]`,
/// * open: `sup_U f - min_n sup_U f_n` for the open window `U = (c, d)`.
///
/// Both are at most a small tolerance for a convergent sequence.
pub fn uc_limit_check(
    xs: &[f64],
    sequence: &[Vec<f64>],
    limit: &[f64],
    closed: (f64, f64),
    open: (f64, f64),
    tail: usize,
) -> Result<(f64, f64)> {
    if sequence.is_empty() || tail == 0 {
        return Err(Error::Parameter("need a nonempty tail".into()));
    }
    if limit.len() != xs.len() || sequence.iter().any(|f| f.len() != xs.len()) {
        return Err(Error::Shape("every function must be sampled on the grid".into()));
    }
    let window = |keep: &dyn Fn(f64) -> bool, what: &str| -> Result<Vec<usize>> {
        let idx: Vec<usize> = (0..xs.len()).filter(|&i| keep(xs[i])).collect();
        if idx.is_empty() {
            return Err(Error::Domain(format!("{what} window contains no grid point")));
        }
        Ok(idx)
    };
    let (a, b) = closed;
    let (c, d) = open;
    if a < xs[0] || b > xs[xs.len() - 1] || c < xs[0] || d > xs[xs.len() - 1] {
        return Err(Error::Domain("window outside the grid".into()));
    }
    let f_idx = window(&|x| a <= x && x <= b, "closed")?;
    let u_idx = window(&|x| c < x && x < d, "open")?;
    let sup = |v: &[f64], idx: &[usize]| idx.iter().map(|&i| v[i]).fold(f64::NEG_INFINITY, f64::max);
    let tail = &sequence[sequence.len().saturating_sub(tail)..];
    let closed_slack = tail.iter().map(|f| sup(f, &f_idx)).fold(f64::NEG_INFINITY, f64::max) - sup(limit, &f_idx);
    let open_slack = sup(limit, &u_idx) - tail.iter().map(|f| sup(f, &u_idx)).fold(f64::INFINITY, f64::min);
    Ok((closed_slack, open_slack))
}
