//! Geodesics of max-plus actions.
//!
//! From a point `q` with `T(q)` finite, a geodesic is traced backwards with
//! `F_T(x, k) = sup { y <= x : T(y,k+1) + A(x,k) - A(y,k) >= T(x,k) }`: the
//! path runs left along level `k` to `F_T(x, k)` and drops to level `k + 1`.
//! Along the way `T - A` is constant on each horizontal segment and `T` is
//! continuous across each jump.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::actionfield::{ActionField, ActionKind};
use crate::environment::{fmt_f64, GridEnvironment};
use crate::lastpassage::{lpp_table, GeodesicPath, Point};
use crate::{Error, Result, NEG_INF};

/// Tolerance on the defining inequality of `G_T`.
pub const G_TOL: f64 = 1e-9;

/// Why a backtracked geodesic stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// The path ran into the left edge of the window while the level below
    /// was still finite somewhere: a truncation artefact.
    EdgeHit,
    /// The path jumped off the deepest level into the external boundary.
    BottomedOut,
    /// `F_T = NEG_INF` with nothing finite below: a genuine horizontal ray.
    FNegInf,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::EdgeHit => "edge-hit",
            Termination::BottomedOut => "bottomed-out",
            Termination::FNegInf => "F-neg-inf",
        }
    }
}

/// A backtracked geodesic with its termination flag.
#[derive(Clone, Debug, PartialEq)]
pub struct Backtrack {
    pub path: GeodesicPath,
    pub termination: Termination,
}

fn require_max_plus(field: &ActionField, env: &GridEnvironment) -> Result<()> {
    if field.kind() != ActionKind::MaxPlus {
        return Err(Error::Kind("geodesics need a max-plus field".into()));
    }
    if field.grid() != env.grid() || field.num_levels() != env.num_levels() {
        return Err(Error::Shape("field and environment differ".into()));
    }
    Ok(())
}

/// `F_T(x, k)` as a grid index, `None` when `G_T(x, k)` is empty.
pub fn f_map(field: &ActionField, env: &GridEnvironment, x: usize, k: usize) -> Result<Option<usize>> {
    require_max_plus(field, env)?;
    if k == 0 || k > field.num_levels() || x >= field.num_points() {
        return Err(Error::Domain(format!("({x}, {k}) is not a grid point of the field")));
    }
    let a = env.level(k);
    let target = field.value(x, k) - G_TOL;
    Ok((0..=x).rev().find(|&y| {
        let b = field.barrier_value(y, k);
        b != NEG_INF && b + a[x] - a[y] >= target
    }))
}

/// Trace the geodesic ending at `q`.
pub fn backtrack_geodesic(field: &ActionField, env: &GridEnvironment, q: Point) -> Result<Backtrack> {
    require_max_plus(field, env)?;
    if q.k == 0 || q.k > field.num_levels() || q.x >= field.num_points() {
        return Err(Error::Domain(format!("{q:?} is not a grid point of the field")));
    }
    if field.at(q) == NEG_INF {
        return Err(Error::Precondition(format!("T is NEG_INF at the query point {q:?}")));
    }
    let kk = field.num_levels();
    let mut entries = vec![q.x];
    let (mut x, mut k) = (q.x, q.k);
    let termination = loop {
        match f_map(field, env, x, k)? {
            Some(j) => {
                entries.push(j);
                if k == kk {
                    break Termination::BottomedOut;
                }
                x = j;
                k += 1;
            }
            None => {
                // Horizontal ray: follow level k left while T - A stays
                // constant, which on a finite window ends at the edge or where
                // T drops to NEG_INF.
                let a = env.level(k);
                let base = field.value(x, k) - a[x];
                let mut y = x;
                while y > 0 {
                    let v = field.value(y - 1, k);
                    if v == NEG_INF || (v - a[y - 1] - base).abs() > G_TOL {
                        break;
                    }
                    y -= 1;
                }
                entries.push(y);
                let finite_below = (0..=x).any(|z| field.barrier_value(z, k) != NEG_INF);
                break if y == 0 && finite_below { Termination::EdgeHit } else { Termination::FNegInf };
            }
        }
    };
    entries.reverse();
    Ok(Backtrack { path: GeodesicPath::new(k, q.k, entries)?, termination })
}

/// Worst `|T(q2) - T(q1) - A(q1 -> q2)|` over ordered grid pairs on the path.
pub fn geodesic_consistency(field: &ActionField, env: &GridEnvironment, path: &GeodesicPath) -> f64 {
    let pts = path.points();
    let n = env.num_points();
    let x_max = pts.iter().map(|p| p.x).max().unwrap_or(0);
    let mut worst: f64 = 0.0;
    for (a, q1) in pts.iter().enumerate() {
        let t = lpp_table(env, *q1, x_max);
        for q2 in &pts[a..] {
            if !q1.precedes(q2) {
                continue;
            }
            let lhs = field.at(*q2) - field.at(*q1);
            let r = (lhs - t[(q2.k - 1) * n + q2.x]).abs();
            worst = worst.max(if r.is_nan() { f64::INFINITY } else { r });
        }
    }
    worst
}

/// Worst deviations from the segment identity (`T - A` constant along each
/// horizontal piece) and the jump identity (`T` continuous across a jump).
pub fn structure_residuals(field: &ActionField, env: &GridEnvironment, bt: &Backtrack) -> (f64, f64) {
    let p = &bt.path;
    let mut seg: f64 = 0.0;
    let mut jump: f64 = 0.0;
    for k in p.k_end..=p.k_start {
        let (a, b) = p.segment(k);
        let base = field.value(b, k) - env.value(b, k);
        for y in a..=b {
            seg = seg.max((field.value(y, k) - env.value(y, k) - base).abs());
        }
        let jumps_here = k < p.k_start || bt.termination == Termination::BottomedOut;
        if jumps_here {
            jump = jump.max((field.barrier_value(a, k) - field.value(a, k)).abs());
        }
    }
    (seg, jump)
}

/// Base point of the finite-depth geodesic action: where the path enters
/// level `depth`.
fn base_point(path: &GeodesicPath, depth: usize) -> Result<Point> {
    if depth < path.k_end || depth > path.k_start {
        return Err(Error::Depth(format!(
            "path spans levels {}..={}, asked for {depth}",
            path.k_end, path.k_start
        )));
    }
    Ok(Point::new(path.segment(depth).0, depth))
}

/// Finite-depth geodesic action `T(p) = A(q_d -> p) - A(q_d -> q_gamma)`,
/// `q_d` the point where the path enters level `depth` and `q_gamma` its end.
pub fn geodesic_action(env: &GridEnvironment, path: &GeodesicPath, depth: usize) -> Result<ActionField> {
    let qd = base_point(path, depth)?;
    let end = path.end();
    let n = env.num_points();
    let mut t = lpp_table(env, qd, n - 1);
    let offset = t[(end.k - 1) * n + end.x];
    for v in t.iter_mut() {
        if *v != NEG_INF {
            *v -= offset;
        }
    }
    ActionField::new(env.grid().clone(), env.num_levels(), t, ActionKind::MaxPlus)
}

/// The decomposition `T(y,1) = sup_x [T_{gamma(x)}(y,1) + T(x,1)]` restricted
/// to `x_grid`, each `gamma(x)` being the backtracked geodesic from `(x, 1)`
/// truncated at `depth` (or its deepest level). Returns the supremum and the
/// gap `T(y,1) - sup`.
pub fn decomposition_check(field: &ActionField, env: &GridEnvironment, y: usize, x_grid: &[usize], depth: usize) -> Result<(f64, f64)> {
    require_max_plus(field, env)?;
    if !x_grid.contains(&y) {
        return Err(Error::Domain(format!("y = {y} is not in the x grid")));
    }
    let mut sup = NEG_INF;
    for &x in x_grid {
        let tx = field.value(x, 1);
        if tx == NEG_INF {
            return Err(Error::Precondition(format!("T(x, 1) is NEG_INF at x = {x}")));
        }
        let bt = backtrack_geodesic(field, env, Point::new(x, 1))?;
        let qd = base_point(&bt.path, depth.clamp(1, bt.path.k_start))?;
        if qd.x > y {
            continue;
        }
        let t = lpp_table(env, qd, x.max(y));
        sup = sup.max(t[y] - t[x] + tx);
    }
    Ok((sup, field.value(y, 1) - sup))
}

/// Worst `T_gamma(p) + T(q_gamma) - T(p)` over grid points `p` where both
/// are finite; nonpositive when the dominance bound holds.
pub fn dominance_excess(field: &ActionField, env: &GridEnvironment, path: &GeodesicPath, depth: usize) -> Result<f64> {
    let tg = geodesic_action(env, path, depth)?;
    let tq = field.at(path.end());
    let mut worst = NEG_INF;
    for (g, t) in tg.values().iter().zip(field.values()) {
        if *g != NEG_INF && *t != NEG_INF {
            worst = worst.max(g + tq - t);
        }
    }
    Ok(worst)
}

/// CSV dump `level,entry_x,termination_flag`, one row per level from the
/// deepest, `entry_x` being where the path enters that level.
pub fn write_geodesic_csv<W: Write>(env: &GridEnvironment, bt: &Backtrack, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "entry_x", "termination_flag"])?;
    for k in (bt.path.k_end..=bt.path.k_start).rev() {
        let (a, _) = bt.path.segment(k);
        w.write_record([k.to_string(), fmt_f64(env.x(a)), bt.termination.as_str().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actionfield::{action_from_point, evolve_action};
    use crate::environment::constant_environment;

    #[test]
    fn zero_two_level_example() {
        let env = constant_environment(0.0, 0.0, 0.5, 3, 2).unwrap();
        let field = evolve_action(&env, None, &[0.0, 0.0]).unwrap();
        assert!(field.values().iter().all(|&v| v == 0.0));
        assert_eq!(f_map(&field, &env, 2, 1).unwrap(), Some(2));
        let bt = backtrack_geodesic(&field, &env, Point::new(2, 1)).unwrap();
        assert_eq!(bt.path.entries, vec![0, 2, 2]);
        assert_eq!(bt.path.k_start, 2);
        assert_eq!(bt.termination, Termination::FNegInf);
    }

    #[test]
    fn single_level_ray() {
        let env = constant_environment(0.0, 0.0, 0.5, 4, 1).unwrap();
        let field = evolve_action(&env, None, &[0.0]).unwrap();
        assert_eq!(f_map(&field, &env, 3, 1).unwrap(), None);
        let bt = backtrack_geodesic(&field, &env, Point::new(3, 1)).unwrap();
        assert_eq!(bt.path.entries, vec![0, 3]);
        assert_eq!(bt.termination, Termination::FNegInf);
    }

    #[test]
    fn point_field_backtracks_to_source() {
        let env = crate::environment::sample_brownian(3, 0.0, 0.1, 11, crate::environment::RngSpec::new(4, 0)).unwrap();
        let field = action_from_point(&env, Point::new(2, 2)).unwrap();
        let bt = backtrack_geodesic(&field, &env, Point::new(7, 2)).unwrap();
        assert_eq!(bt.path.entries, vec![2, 7]);
        assert_eq!(bt.termination, Termination::FNegInf);
        let bad = backtrack_geodesic(&field, &env, Point::new(1, 2));
        assert!(matches!(bad, Err(Error::Precondition(_))));
    }

    #[test]
    fn geodesic_action_vanishes_at_end() {
        let env = constant_environment(0.0, 0.0, 0.5, 4, 3).unwrap();
        let path = GeodesicPath::new(3, 1, vec![0, 1, 2, 3]).unwrap();
        for d in 1..=3 {
            let t = geodesic_action(&env, &path, d).unwrap();
            assert_eq!(t.value(3, 1), 0.0);
        }
        assert!(matches!(geodesic_action(&env, &path, 4), Err(Error::Depth(_))));
    }
}
