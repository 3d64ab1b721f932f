//! Melons: line ensembles obtained from an environment by RSK.
//!
//! A melon is characterised by its line sums. For the Brownian melon
//! `sum_{i <= k} WB(y, i)` is the largest total length of `k` disjoint paths
//! from the left edge to `(y, .)`; the O'Connell-Yor and log-gamma ensembles
//! replace the maximum by a log-partition function. The top line is therefore
//! a point-to-point passage value and the ensemble preserves passage values
//! between points of the form `(x, n)` and `(y, 1)`.
//!
//! The constructions below insert one level at a time with Pitman transforms
//! (max-plus) or their geometric analogue (log-sum-exp).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::environment::{fmt_f64, Grid, GridEnvironment, LatticeEnvironment, RngSpec};
use crate::numerics::{log_cumtrapz, logaddexp};
use crate::{Error, Result, NEG_INF};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Brownian,
    Oy,
    LogGamma,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Brownian => "brownian",
            Provenance::Oy => "oy",
            Provenance::LogGamma => "log-gamma",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MelonLines {
    Grid(GridEnvironment),
    Lattice(LatticeEnvironment),
}

/// A line ensemble, line 1 on top.
#[derive(Clone, Debug, PartialEq)]
pub struct Melon {
    pub lines: MelonLines,
    pub provenance: Provenance,
    pub source: Option<RngSpec>,
}

impl Melon {
    /// The lines as a continuous environment.
    pub fn grid_env(&self) -> Result<&GridEnvironment> {
        match &self.lines {
            MelonLines::Grid(e) => Ok(e),
            MelonLines::Lattice(_) => Err(Error::Kind("melon lives on a lattice".into())),
        }
    }

    /// The lines as a lattice environment.
    pub fn lattice_env(&self) -> Result<&LatticeEnvironment> {
        match &self.lines {
            MelonLines::Lattice(e) => Ok(e),
            MelonLines::Grid(_) => Err(Error::Kind("melon lives on a grid".into())),
        }
    }

    pub fn with_source(mut self, source: RngSpec) -> Self {
        self.source = Some(source);
        self
    }

    /// CSV dump with a provenance column: `x,level,value,provenance` or
    /// `i,level,value,provenance`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let tag = self.provenance.as_str();
        match &self.lines {
            MelonLines::Grid(e) => {
                w.write_record(["x", "level", "value", "provenance"])?;
                for k in 1..=e.num_levels() {
                    for i in 0..e.num_points() {
                        w.write_record([fmt_f64(e.x(i)), k.to_string(), fmt_f64(e.value(i, k)), tag.into()])?;
                    }
                }
            }
            MelonLines::Lattice(e) => {
                w.write_record(["i", "level", "value", "provenance"])?;
                for k in 1..=e.num_levels() {
                    for i in 0..e.num_points() {
                        w.write_record([i.to_string(), k.to_string(), fmt_f64(e.value(i, k)), tag.into()])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn check_origin(xs: &[f64]) -> Result<()> {
    if xs[0].abs() > 1e-12 {
        return Err(Error::Domain(format!("melon sources must start at 0, not {}", xs[0])));
    }
    Ok(())
}

/// Piecewise-linear functions sharing one abscissa vector.
struct Bundle {
    xs: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl Bundle {
    /// Max-plus Pitman transform of rows `upper` and `lower`:
    /// `top = upper + M`, `bot = lower - M` with `M` the running maximum of
    /// `lower - upper`. Crossing points of the running maximum are added to
    /// the abscissae so both outputs stay exactly piecewise linear.
    fn pitman(&mut self, upper: usize, lower: usize) -> (Vec<f64>, Vec<f64>) {
        let xs = &self.xs;
        let d: Vec<f64> = self.rows[lower].iter().zip(&self.rows[upper]).map(|(l, u)| l - u).collect();
        // New abscissae as (cell, fraction) and the running maximum on them.
        let mut locs: Vec<(usize, f64)> = vec![(0, 0.0)];
        let mut m = vec![d[0]];
        let mut cur = d[0];
        for i in 1..xs.len() {
            if d[i] > cur && d[i - 1] < cur {
                let t = (cur - d[i - 1]) / (d[i] - d[i - 1]);
                if t > 1e-12 && t < 1.0 - 1e-12 {
                    locs.push((i - 1, t));
                    m.push(cur);
                }
            }
            cur = cur.max(d[i]);
            locs.push((i, 0.0));
            m.push(cur);
        }
        if locs.len() > xs.len() {
            let interp = |v: &[f64]| -> Vec<f64> {
                locs.iter().map(|&(i, t)| if t == 0.0 { v[i] } else { v[i] + t * (v[i + 1] - v[i]) }).collect()
            };
            self.xs = interp(&self.xs);
            for r in self.rows.iter_mut() {
                *r = interp(r);
            }
        }
        let top = self.rows[upper].iter().zip(&m).map(|(u, m)| u + m).collect();
        let bot = self.rows[lower].iter().zip(&m).map(|(l, m)| l - m).collect();
        (top, bot)
    }
}

fn normalized_levels(src: &GridEnvironment) -> Vec<Vec<f64>> {
    (1..=src.num_levels())
        .map(|k| {
            let l = src.level(k);
            l.iter().map(|v| v - l[0]).collect()
        })
        .collect()
}

/// The Brownian melon of `src`, exact for the piecewise-linear environment.
///
/// The output lives on the source grid refined by the crossing points created
/// by the Pitman transforms, so it is in general not uniform. Every source
/// grid point is kept.
pub fn brownian_melon(src: &GridEnvironment) -> Result<Melon> {
    check_origin(src.grid().xs())?;
    let n = src.num_levels();
    // Rows hold the unused source levels followed by the melon lines, which
    // start as the deepest level alone.
    let mut b = Bundle { xs: src.grid().xs().to_vec(), rows: normalized_levels(src) };
    for lev in (1..n).rev() {
        // Row lev - 1 is the level being inserted and the melon lines follow
        // it. Each transform replaces a line by its top output in place, so
        // later refinements of the abscissae reach every row.
        let r = lev - 1;
        for line in lev..b.rows.len() {
            let (top, bot) = b.pitman(r, line);
            b.rows[line] = top;
            b.rows[r] = bot;
        }
        let last = b.rows.remove(r);
        b.rows.push(last);
    }
    let grid = if b.xs.as_slice() == src.grid().xs() { src.grid().clone() } else { Grid::from_points(b.xs)? };
    let env = GridEnvironment::from_levels(grid, b.rows)?;
    Ok(Melon { lines: MelonLines::Grid(env), provenance: Provenance::Brownian, source: None })
}

/// The O'Connell-Yor ensemble of `src` (weight `w = e`), built with geometric
/// Pitman transforms and trapezoid quadrature on the source grid.
///
/// Lines below the top are infinite at the origin, so the ensemble is
/// returned on the source grid without its first point.
pub fn oy_ensemble(src: &GridEnvironment) -> Result<Melon> {
    check_origin(src.grid().xs())?;
    if src.num_points() < 4 {
        return Err(Error::Parameter("the OY ensemble needs at least 4 grid points".into()));
    }
    let xs = src.grid().xs();
    let n = src.num_levels();
    let mut levels = normalized_levels(src);
    let mut lines = vec![levels.pop().unwrap()];
    for lev in (1..n).rev() {
        let mut r = levels.pop().unwrap();
        debug_assert_eq!(levels.len(), lev - 1);
        let mut new_lines = Vec::with_capacity(lines.len() + 1);
        for m in &lines {
            let mut h: Vec<f64> = m.iter().zip(&r).map(|(m, r)| m - r).collect();
            fix_origin(&mut h);
            let cum = log_cumtrapz(xs, &h);
            let top: Vec<f64> = r.iter().zip(&cum).map(|(r, c)| r + c).collect();
            r = r.iter().zip(m).zip(&top).map(|((r, m), t)| r + m - t).collect();
            new_lines.push(top);
        }
        new_lines.push(r);
        lines = new_lines;
    }
    let grid = src.grid().drop_front(1)?;
    let trimmed: Vec<Vec<f64>> = lines.into_iter().map(|l| l[1..].to_vec()).collect();
    let env = GridEnvironment::from_levels(grid, trimmed)?;
    Ok(Melon { lines: MelonLines::Grid(env), provenance: Provenance::Oy, source: None })
}

/// An integrand exponent at the origin can be `inf - inf` or `+inf` because
/// lower lines blow up there. Replace it by linear extrapolation of the
/// integrand from the next two points, floored at zero.
fn fix_origin(h: &mut [f64]) {
    if h[0].is_nan() || h[0] == f64::INFINITY {
        let e = 2.0 * h[1].exp() - h[2].exp();
        h[0] = if e > 0.0 { e.ln() } else { NEG_INF };
    }
}

/// The log-gamma ensemble of a lattice environment with `D(0, k) = 0`,
/// built by geometric row insertion. Line `k` vanishes on `0 <= x <= k - 1`.
pub fn lg_ensemble(src: &LatticeEnvironment) -> Result<Melon> {
    if (0..src.num_levels()).any(|k| src.value(0, k + 1) != 0.0) {
        return Err(Error::Domain("log-gamma sources must vanish at x = 0".into()));
    }
    let n = src.num_levels();
    let width = src.num_points();
    let mut lines = vec![src.level(n).to_vec()];
    for lev in (1..n).rev() {
        let mut r = src.level(lev).to_vec();
        let mut new_lines = Vec::with_capacity(lines.len() + 1);
        for (j, m) in lines.iter().enumerate() {
            // new(y) = r(y) + log sum_{z = j+1}^{y} exp(m(z) - r(z - 1)), y >= j + 1.
            let mut nl = vec![0.0; width];
            let mut acc = NEG_INF;
            for y in j + 1..width {
                acc = logaddexp(acc, m[y] - r[y - 1]);
                nl[y] = r[y] + acc;
            }
            for y in 0..width {
                r[y] = if y > j { r[y] + m[y] - nl[y] } else { 0.0 };
            }
            new_lines.push(nl);
        }
        new_lines.push(r);
        lines = new_lines;
    }
    let env = LatticeEnvironment::from_levels(src.x0(), src.delta(), lines)?;
    Ok(Melon { lines: MelonLines::Lattice(env), provenance: Provenance::LogGamma, source: None })
}
