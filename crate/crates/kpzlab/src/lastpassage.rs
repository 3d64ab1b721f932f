//! Last passage values, polymer free energies and the metric inequalities.
//!
//! Points carry grid (or lattice) indices. A semidiscrete path from `(x1, k1)`
//! to `(x2, k2)` with `k1 >= k2` is encoded by its jump points: it runs along
//! level `k1` from `x1`, jumps to the next shallower level, and so on until it
//! reaches `x2` on level `k2`.

use serde::{Deserialize, Serialize};

use crate::environment::{GridEnvironment, LatticeEnvironment};
use crate::numerics::{log_cumtrapz, logaddexp, logsumexp};
use crate::{Error, Result, NEG_INF};

/// A grid point `(x index, level)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point {
    pub x: usize,
    pub k: usize,
}

impl Point {
    pub fn new(x: usize, k: usize) -> Self {
        Point { x, k }
    }

    /// The partial order: `self` is weakly left of and weakly deeper than `other`.
    pub fn precedes(&self, other: &Point) -> bool {
        self.x <= other.x && self.k >= other.k
    }
}

/// A directed path through its level entry points.
///
/// `entries[0]` is the start abscissa on level `k_start` (the deepest level),
/// `entries[m]` is the point where the path leaves level `k_start + 1 - m`,
/// and the last entry is the end abscissa on level `k_end`. Level `k` is
/// occupied on `[entries[k_start - k], entries[k_start - k + 1]]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeodesicPath {
    pub k_start: usize,
    pub k_end: usize,
    pub entries: Vec<usize>,
}

impl GeodesicPath {
    pub fn new(k_start: usize, k_end: usize, entries: Vec<usize>) -> Result<Self> {
        if k_end == 0 || k_start < k_end {
            return Err(Error::Order(format!("levels {k_start} -> {k_end}")));
        }
        if entries.len() != k_start - k_end + 2 {
            return Err(Error::Shape(format!(
                "a path over {} levels needs {} entries, got {}",
                k_start - k_end + 1,
                k_start - k_end + 2,
                entries.len()
            )));
        }
        if entries.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Order("path entries must be nondecreasing".into()));
        }
        Ok(GeodesicPath { k_start, k_end, entries })
    }

    pub fn start(&self) -> Point {
        Point::new(self.entries[0], self.k_start)
    }

    pub fn end(&self) -> Point {
        Point::new(*self.entries.last().unwrap(), self.k_end)
    }

    /// Interval `(from, to)` occupied on level `k`.
    pub fn segment(&self, k: usize) -> (usize, usize) {
        let m = self.k_start - k;
        (self.entries[m], self.entries[m + 1])
    }

    /// All grid points on the path, deepest first.
    pub fn points(&self) -> Vec<Point> {
        let mut pts = Vec::new();
        for k in (self.k_end..=self.k_start).rev() {
            let (a, b) = self.segment(k);
            pts.extend((a..=b).map(|x| Point::new(x, k)));
        }
        pts
    }
}

fn check_point(env: &GridEnvironment, q: Point) -> Result<()> {
    if q.x >= env.num_points() || q.k == 0 || q.k > env.num_levels() {
        return Err(Error::Domain(format!("point {q:?} outside the environment")));
    }
    Ok(())
}

fn check_order(q1: Point, q2: Point) -> Result<()> {
    if !q1.precedes(&q2) {
        return Err(Error::Order(format!("{q1:?} does not precede {q2:?}")));
    }
    Ok(())
}

/// Length of a path: the sum over its levels of the environment increments.
pub fn path_length(env: &GridEnvironment, path: &GeodesicPath) -> Result<f64> {
    if path.k_start > env.num_levels() || path.entries.iter().any(|&x| x >= env.num_points()) {
        return Err(Error::Domain("path leaves the environment".into()));
    }
    let mut total = 0.0;
    for k in path.k_end..=path.k_start {
        let (a, b) = path.segment(k);
        total += env.value(b, k) - env.value(a, k);
    }
    Ok(total)
}

/// Last passage values from `q1` to every grid point, as a level-major table
/// (`NEG_INF` where `q1` does not precede the point). Columns right of
/// `x_max` are left at `NEG_INF`.
pub(crate) fn lpp_table(env: &GridEnvironment, q1: Point, x_max: usize) -> Vec<f64> {
    let n = env.num_points();
    let mut t = vec![NEG_INF; n * env.num_levels()];
    let base = (q1.k - 1) * n;
    let a = env.level(q1.k);
    for y in q1.x..=x_max {
        t[base + y] = a[y] - a[q1.x];
    }
    for k in (1..q1.k).rev() {
        let a = env.level(k);
        let mut run = NEG_INF;
        for y in q1.x..=x_max {
            run = run.max(t[k * n + y] - a[y]);
            t[(k - 1) * n + y] = a[y] + run;
        }
    }
    t
}

/// Last passage time from `q1` to `q2`, exact for the piecewise-linear
/// environment.
pub fn lpp_value(env: &GridEnvironment, q1: Point, q2: Point) -> Result<f64> {
    check_point(env, q1)?;
    check_point(env, q2)?;
    check_order(q1, q2)?;
    let t = lpp_table(env, q1, q2.x);
    Ok(t[(q2.k - 1) * env.num_points() + q2.x])
}

/// An optimal path from `q1` to `q2` with leftmost jump points.
pub fn lpp_argmax_path(env: &GridEnvironment, q1: Point, q2: Point) -> Result<GeodesicPath> {
    check_point(env, q1)?;
    check_point(env, q2)?;
    check_order(q1, q2)?;
    let n = env.num_points();
    let t = lpp_table(env, q1, q2.x);
    // Walk back from q2: on level k the path entered at the leftmost z
    // maximising T(z, k + 1) - A(z, k).
    let mut entries = vec![q2.x];
    let mut y = q2.x;
    for k in q2.k..q1.k {
        let a = env.level(k);
        let mut best = NEG_INF;
        let mut arg = q1.x;
        for z in q1.x..=y {
            let v = t[k * n + z] - a[z];
            if v > best {
                best = v;
                arg = z;
            }
        }
        entries.push(arg);
        y = arg;
    }
    entries.push(q1.x);
    entries.reverse();
    GeodesicPath::new(q1.k, q2.k, entries)
}

/// Polymer free energy `log_w` of the path integral of `w^{L(gamma)}` from
/// `q1` to `q2`, by the level recursion with trapezoid quadrature.
pub fn polymer_free_energy(env: &GridEnvironment, q1: Point, q2: Point, w: f64) -> Result<f64> {
    check_point(env, q1)?;
    check_point(env, q2)?;
    check_order(q1, q2)?;
    if !(w > 1.0) || !w.is_finite() {
        return Err(Error::Parameter(format!("w must exceed 1, got {w}")));
    }
    let beta = w.ln();
    let xs = &env.grid().xs()[q1.x..=q2.x];
    let a = &env.level(q1.k)[q1.x..=q2.x];
    // t holds T(., k) in log_w units on [x1, x2].
    let mut t: Vec<f64> = a.iter().map(|v| v - a[0]).collect();
    for k in (q2.k..q1.k).rev() {
        let a = &env.level(k)[q1.x..=q2.x];
        let g: Vec<f64> = t.iter().zip(a).map(|(t, a)| beta * (t - a)).collect();
        let cum = log_cumtrapz(xs, &g);
        t = cum.iter().zip(a).map(|(c, a)| a + c / beta).collect();
    }
    Ok(*t.last().unwrap())
}

fn check_lattice_point(env: &LatticeEnvironment, q: Point) -> Result<()> {
    if q.x == 0 || q.x >= env.num_points() || q.k == 0 || q.k > env.num_levels() {
        return Err(Error::Domain(format!("lattice point {q:?} outside 1..{} x 1..={}", env.num_points(), env.num_levels())));
    }
    Ok(())
}

/// Log of the sum over up-right lattice paths from `q1` to `q2` of
/// `exp(sum of vertex weights)`, the weight of vertex `(i, k)` being the
/// increment `A(i, k) - A(i - 1, k)`.
pub fn lattice_partition_dp(env: &LatticeEnvironment, q1: Point, q2: Point) -> Result<f64> {
    lattice_dp(env, q1, q2, logaddexp)
}

/// The max-plus analogue of [`lattice_partition_dp`]: the heaviest lattice path.
pub fn lattice_lpp(env: &LatticeEnvironment, q1: Point, q2: Point) -> Result<f64> {
    lattice_dp(env, q1, q2, f64::max)
}

fn lattice_dp(env: &LatticeEnvironment, q1: Point, q2: Point, plus: fn(f64, f64) -> f64) -> Result<f64> {
    check_lattice_point(env, q1)?;
    check_lattice_point(env, q2)?;
    check_order(q1, q2)?;
    let width = q2.x - q1.x + 1;
    let mut below = vec![NEG_INF; width];
    for k in (q2.k..=q1.k).rev() {
        let mut row = vec![NEG_INF; width];
        for j in 0..width {
            let left = if j == 0 { NEG_INF } else { row[j - 1] };
            let prev = if k == q1.k && j == 0 { 0.0 } else { plus(left, below[j]) };
            row[j] = prev + env.increment(q1.x + j, k);
        }
        below = row;
    }
    Ok(below[width - 1])
}

/// Enumerate every jump vector of a path from `(x1, k1)` to `(x2, k2)`.
fn enumerate_jumps(x1: usize, k1: usize, x2: usize, k2: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, left: usize, lo: usize, hi: usize, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for z in lo..=hi {
            cur.push(z);
            rec(cur, left - 1, z, hi, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    let mut cur = vec![x1];
    rec(&mut cur, k1 - k2, x1, x2, &mut out);
    for v in &mut out {
        v.push(x2);
    }
    out
}

/// Brute-force last passage time by enumerating all grid jump vectors. Meant
/// for small instances.
pub fn lpp_brute_force(env: &GridEnvironment, q1: Point, q2: Point) -> Result<f64> {
    check_point(env, q1)?;
    check_point(env, q2)?;
    check_order(q1, q2)?;
    let mut best = NEG_INF;
    for entries in enumerate_jumps(q1.x, q1.k, q2.x, q2.k) {
        let p = GeodesicPath { k_start: q1.k, k_end: q2.k, entries };
        best = best.max(path_length(env, &p)?);
    }
    Ok(best)
}

/// Maximal total length of `k_paths` disjoint paths, by enumeration.
///
/// Path `i` (0-based) runs from `(x1, k1 - i)` to `(x2, k2 + k_paths - 1 - i)`,
/// so the family fills a staircase. On a level shared by paths `i` and `i + 1`
/// the interval of path `i + 1` must end no later than path `i` starts;
/// endpoints may be shared, interiors may not.
pub fn multi_path_lpp(env: &GridEnvironment, k_paths: usize, q1: Point, q2: Point) -> Result<f64> {
    check_point(env, q1)?;
    check_point(env, q2)?;
    check_order(q1, q2)?;
    if k_paths == 0 || q1.k < q2.k + k_paths - 1 {
        return Err(Error::Config(format!(
            "{k_paths} paths do not fit between levels {} and {}",
            q1.k, q2.k
        )));
    }
    let families: Vec<Vec<(GeodesicPath, f64)>> = (0..k_paths)
        .map(|i| {
            let (ks, ke) = (q1.k - i, q2.k + k_paths - 1 - i);
            enumerate_jumps(q1.x, ks, q2.x, ke)
                .into_iter()
                .map(|entries| {
                    let p = GeodesicPath { k_start: ks, k_end: ke, entries };
                    let len = path_length(env, &p).expect("path inside env");
                    (p, len)
                })
                .collect()
        })
        .collect();
    let mut best = NEG_INF;
    let mut chosen: Vec<&GeodesicPath> = Vec::new();
    search_disjoint(&families, 0, 0.0, &mut chosen, &mut best);
    Ok(best)
}

fn search_disjoint<'a>(
    families: &'a [Vec<(GeodesicPath, f64)>],
    i: usize,
    acc: f64,
    chosen: &mut Vec<&'a GeodesicPath>,
    best: &mut f64,
) {
    if i == families.len() {
        *best = best.max(acc);
        return;
    }
    for (p, len) in &families[i] {
        if chosen.iter().all(|q| left_of(p, q)) {
            chosen.push(p);
            search_disjoint(families, i + 1, acc + len, chosen, best);
            chosen.pop();
        }
    }
}

/// Whether `upper` stays weakly left of `lower` on every shared level.
fn left_of(upper: &GeodesicPath, lower: &GeodesicPath) -> bool {
    let lo = upper.k_end.max(lower.k_end);
    let hi = upper.k_start.min(lower.k_start);
    (lo..=hi).all(|k| upper.segment(k).1 <= lower.segment(k).0)
}

/// Enumerate all up-right lattice paths from `(x1, k1)` to `(x2, k2)` as
/// vertex lists.
fn lattice_paths(x1: usize, k1: usize, x2: usize, k2: usize) -> Vec<Vec<(usize, usize)>> {
    enumerate_jumps(x1, k1, x2, k2)
        .into_iter()
        .map(|entries| {
            let mut verts = Vec::new();
            for (m, k) in (k2..=k1).rev().enumerate() {
                verts.extend((entries[m]..=entries[m + 1]).map(|x| (x, k)));
            }
            verts
        })
        .collect()
}

/// Log-sum (or max, with `maximize`) over `k_paths` vertex-disjoint lattice
/// paths, path `i` running from `(x1 + i, k1)` to `(x2 - k_paths + 1 + i, k2)`.
/// Exhaustive enumeration for small lattices.
pub fn lattice_multi_path(env: &LatticeEnvironment, k_paths: usize, q1: Point, q2: Point, maximize: bool) -> Result<f64> {
    check_lattice_point(env, q1)?;
    check_lattice_point(env, q2)?;
    check_order(q1, q2)?;
    if k_paths == 0 || q1.x + k_paths - 1 > q2.x || k_paths > q1.k - q2.k + 1 {
        return Err(Error::Config(format!("{k_paths} disjoint paths do not fit")));
    }
    let families: Vec<Vec<(Vec<(usize, usize)>, f64)>> = (0..k_paths)
        .map(|i| {
            lattice_paths(q1.x + i, q1.k, q2.x + 1 + i - k_paths, q2.k)
                .into_iter()
                .map(|v| {
                    let w = v.iter().map(|&(x, k)| env.increment(x, k)).sum();
                    (v, w)
                })
                .collect()
        })
        .collect();
    let mut totals = Vec::new();
    let mut used = std::collections::HashSet::new();
    lattice_search(&families, 0, 0.0, &mut used, &mut totals);
    if totals.is_empty() {
        return Ok(NEG_INF);
    }
    Ok(if maximize { totals.iter().copied().fold(NEG_INF, f64::max) } else { logsumexp(&totals) })
}

fn lattice_search(
    families: &[Vec<(Vec<(usize, usize)>, f64)>],
    i: usize,
    acc: f64,
    used: &mut std::collections::HashSet<(usize, usize)>,
    totals: &mut Vec<f64>,
) {
    if i == families.len() {
        totals.push(acc);
        return;
    }
    for (verts, w) in &families[i] {
        if verts.iter().all(|v| !used.contains(v)) {
            used.extend(verts.iter().copied());
            lattice_search(families, i + 1, acc + w, used, totals);
            for v in verts {
                used.remove(v);
            }
        }
    }
}

/// Slack `A(q1 -> q3) - A(q1 -> q2) - A(q2 -> q3)`, nonnegative when the
/// triangle inequality holds.
pub fn check_triangle(env: &GridEnvironment, q1: Point, q2: Point, q3: Point) -> Result<f64> {
    check_order(q1, q2)?;
    check_order(q2, q3)?;
    Ok(lpp_value(env, q1, q3)? - lpp_value(env, q1, q2)? - lpp_value(env, q2, q3)?)
}

/// Slack of the quadrangle inequality for `x <= x' <= y <= y'` and `k <= m`:
/// `A((x,m)->(y,k)) + A((x',m)->(y',k)) - A((x,m)->(y',k)) - A((x',m)->(y,k))`.
pub fn check_quadrangle(env: &GridEnvironment, x: usize, xp: usize, y: usize, yp: usize, k: usize, m: usize) -> Result<f64> {
    if !(x <= xp && xp <= y && y <= yp && k <= m) {
        return Err(Error::Order(format!("need x <= x' <= y <= y' and k <= m, got {x} {xp} {y} {yp} {k} {m}")));
    }
    let p = |a: usize, b: usize| lpp_value(env, Point::new(a, m), Point::new(b, k));
    Ok(p(x, y)? + p(xp, yp)? - p(x, yp)? - p(xp, y)?)
}
