use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use kpzlab::actionfield::{evolve_action, max_residual_sampled};
use kpzlab::environment::{fmt_f64, sample_brownian, sample_inverse_gamma_lattice, GridEnvironment, RngSpec};
use kpzlab::geodesics::{backtrack_geodesic, geodesic_consistency, structure_residuals, write_geodesic_csv, G_TOL};
use kpzlab::lastpassage::{check_quadrangle, check_triangle, lattice_partition_dp, lpp_value, Point};
use kpzlab::melons::{brownian_melon, lg_ensemble, oy_ensemble};
use kpzlab::montecarlo::{ecdf, ks_distance, par_map, run_experiment, ExperimentSpec, Summary, TwReference};
use kpzlab::representations::{
    build_representation, check_axioms, scale_to_fixed_point, Model, QUADRANGLE_TOL, RECURSION_TOL,
};
use kpzlab::Error;

use crate::config::{Command, RunConfig};
use crate::output::Artifacts;
use crate::Failure;

/// Outcome of a command: its files, and the first failed check if any.
pub struct Outcome {
    pub artifacts: Artifacts,
    pub failure: Option<String>,
}

pub fn dispatch(cfg: &RunConfig) -> Result<Outcome, Failure> {
    match cfg.command.expect("resolved config has a command") {
        Command::Simulate => simulate(cfg),
        Command::Verify => verify(cfg),
        Command::Geodesic => geodesic(cfg),
        Command::Scale => scale(cfg),
        Command::Melon => melon(cfg),
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> kpzlab::Result<()>) -> Result<Vec<u8>, Failure> {
    let mut out = Vec::new();
    f(&mut out)?;
    Ok(out)
}

#[derive(Serialize)]
struct ProbeSummary {
    x: f64,
    y: f64,
    #[serde(flatten)]
    summary: Summary,
    lag1: f64,
    /// Kolmogorov-Smirnov distance to GUE Tracy-Widom, for scaled runs with
    /// at least 100 replicas.
    ks_tw: Option<f64>,
    ecdf: Vec<(f64, f64)>,
}

fn simulate(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let spec = ExperimentSpec {
        model: cfg.model,
        rep: cfg.rep.clone(),
        num_replicas: cfg.num_replicas,
        seed: cfg.seed,
        probes: cfg.probes.clone(),
        scaled: cfg.scaled,
        checks: cfg.rep.checks,
    };
    let res = run_experiment(&spec)?;
    let tw = TwReference::bundled();
    let summaries = (0..spec.probes.len())
        .map(|p| {
            let col = res.column(p);
            let ks_tw = if cfg.scaled && col.len() >= 100 { Some(ks_distance(&col, &tw)?) } else { None };
            let (x, y) = spec.probes[p];
            Ok(ProbeSummary { x, y, summary: res.summaries[p].clone(), lag1: res.lag1[p], ks_tw, ecdf: ecdf(&col) })
        })
        .collect::<kpzlab::Result<Vec<_>>>()?;
    let mut artifacts = Artifacts::default();
    artifacts.table("values", cfg.format, csv_bytes(|w| res.write_csv(w))?)?;
    artifacts.json("summary.json", &summaries)?;
    Ok(Outcome { artifacts, failure: None })
}

/// One line of the verify report. `value` is the size of the violation, so a
/// check passes when `value <= tolerance`.
struct CheckRow {
    instance: usize,
    check: &'static str,
    value: f64,
    tolerance: f64,
}

impl CheckRow {
    fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

/// Checks of the sampled source environment: recursion of a random action,
/// backtracked geodesic structure and the two inequalities.
fn grid_checks(i: usize, src: &GridEnvironment, samples: usize, rng: &mut ChaCha8Rng, rows: &mut Vec<CheckRow>) -> kpzlab::Result<()> {
    let (n, kk) = (src.num_points(), src.num_levels());
    let inits: Vec<f64> = (0..kk).map(|_| rng.random_range(-1.0..0.0)).collect();
    let field = evolve_action(src, None, &inits)?;
    rows.push(CheckRow { instance: i, check: "action-recursion", value: max_residual_sampled(&field, src, samples, rng), tolerance: 1e-9 });
    let bt = backtrack_geodesic(&field, src, Point::new(n - 1, 1))?;
    let (seg, jump) = structure_residuals(&field, src, &bt);
    rows.push(CheckRow { instance: i, check: "geodesic-consistency", value: geodesic_consistency(&field, src, &bt.path), tolerance: G_TOL });
    rows.push(CheckRow { instance: i, check: "geodesic-segments", value: seg.max(jump), tolerance: G_TOL });
    let (mut tri, mut quad) = (0.0f64, 0.0f64);
    for _ in 0..samples / 10 {
        let mut xs: Vec<usize> = (0..4).map(|_| rng.random_range(0..n)).collect();
        xs.sort_unstable();
        let mut ks: Vec<usize> = (0..3).map(|_| rng.random_range(1..=kk)).collect();
        ks.sort_unstable();
        let t = check_triangle(src, Point::new(xs[0], ks[2]), Point::new(xs[1], ks[1]), Point::new(xs[2], ks[0]))?;
        tri = tri.max(-t);
        quad = quad.max(-check_quadrangle(src, xs[0], xs[1], xs[2], xs[3], ks[0], ks[2])?);
    }
    rows.push(CheckRow { instance: i, check: "triangle", value: tri.max(0.0), tolerance: 1e-9 });
    rows.push(CheckRow { instance: i, check: "lpp-quadrangle", value: quad.max(0.0), tolerance: 1e-9 });
    Ok(())
}

fn verify_instance(cfg: &RunConfig, i: usize) -> kpzlab::Result<Vec<CheckRow>> {
    let spec = &cfg.rep;
    let rng = RngSpec::new(cfg.seed, i as u64);
    let mut check_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_c4ec_0000_0000 ^ i as u64);
    let mut rows = Vec::new();
    let rep = match build_representation(cfg.model, spec, rng) {
        Ok(rep) => rep,
        Err(Error::Axiom { .. }) => {
            rows.push(CheckRow { instance: i, check: "axioms", value: f64::INFINITY, tolerance: 0.0 });
            return Ok(rows);
        }
        Err(e) => return Err(e),
    };
    let report = check_axioms(&rep, spec.checks, &mut check_rng)?;
    let finite = if report.melon_finite && report.top_finite { 0.0 } else { f64::INFINITY };
    rows.push(CheckRow { instance: i, check: "axiom-finite", value: finite, tolerance: 0.0 });
    rows.push(CheckRow { instance: i, check: "axiom-recursion", value: report.recursion, tolerance: RECURSION_TOL });
    rows.push(CheckRow { instance: i, check: "axiom-quadrangle", value: (-report.quadrangle).max(0.0), tolerance: QUADRANGLE_TOL });
    match cfg.model {
        Model::Bl => {
            let src = sample_brownian(spec.n, 0.0, spec.dx, spec.num_points(), rng)?;
            let e = rep.melon().grid_env()?;
            let mut worst: f64 = 0.0;
            for x in 0..src.num_points() {
                for y in x..src.num_points() {
                    let (mx, my) = (e.grid().nearest(src.x(x)), e.grid().nearest(src.x(y)));
                    let a = lpp_value(e, Point::new(mx, spec.n), Point::new(my, 1))?;
                    let b = lpp_value(&src, Point::new(x, spec.n), Point::new(y, 1))?;
                    worst = worst.max((a - b).abs());
                }
            }
            rows.push(CheckRow { instance: i, check: "melon-isometry", value: worst, tolerance: 1e-9 });
            grid_checks(i, &src, spec.checks, &mut check_rng, &mut rows)?;
        }
        Model::Oy | Model::Kpz => {
            let src = sample_brownian(spec.n, 0.0, spec.dx, spec.num_points(), rng)?;
            grid_checks(i, &src, spec.checks, &mut check_rng, &mut rows)?;
        }
        Model::Lg => {
            let src = sample_inverse_gamma_lattice(spec.theta, spec.width, spec.n, rng)?;
            let e = rep.melon().lattice_env()?;
            let (n, w) = (spec.n, spec.width);
            let mut worst: f64 = 0.0;
            for x in 1..w {
                for y in x + 1..=w {
                    let a = lattice_partition_dp(e, Point::new(x + 1, n.min(x + 1)), Point::new(y, 1))?;
                    let b = lattice_partition_dp(&src, Point::new(x + 1, n), Point::new(y, 1))?;
                    worst = worst.max((a - b).abs());
                }
            }
            rows.push(CheckRow { instance: i, check: "melon-isometry", value: worst, tolerance: 1e-9 });
        }
    }
    Ok(rows)
}

fn verify(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let rows: Vec<CheckRow> = par_map(cfg.num_replicas, |i| verify_instance(cfg, i))
        .into_iter()
        .collect::<kpzlab::Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let report = csv_bytes(|out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["instance", "check", "value", "tolerance", "passed"])?;
        for r in &rows {
            w.write_record([r.instance.to_string(), r.check.into(), fmt_f64(r.value), fmt_f64(r.tolerance), r.passed().to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    let failure = rows.iter().find(|r| !r.passed()).map(|r| {
        let failed = rows.iter().filter(|r| !r.passed()).count();
        format!("{failed} checks failed, first: {} on instance {} ({} > {})", r.check, r.instance, r.value, r.tolerance)
    });
    let mut artifacts = Artifacts::default();
    artifacts.table("verify", cfg.format, report)?;
    Ok(Outcome { artifacts, failure })
}

fn source_env(cfg: &RunConfig) -> kpzlab::Result<GridEnvironment> {
    let spec = &cfg.rep;
    sample_brownian(spec.n, 0.0, spec.dx, spec.num_points(), RngSpec::new(cfg.seed, 0))
}

fn grid_point(env: &GridEnvironment, (x, k): (f64, usize), what: &str) -> Result<Point, Failure> {
    let i = env
        .grid()
        .index_of(x)
        .ok_or_else(|| Failure::Config(format!("geodesic.{what}: x = {x} is not a grid point")))?;
    if k == 0 || k > env.num_levels() {
        return Err(Failure::Config(format!("geodesic.{what}: level {k} outside 1..={}", env.num_levels())));
    }
    Ok(Point::new(i, k))
}

fn geodesic(cfg: &RunConfig) -> Result<Outcome, Failure> {
    if cfg.model == Model::Lg {
        return Err(Failure::Config("model: geodesic needs a Brownian source (bl, oy or kpz)".into()));
    }
    let src = source_env(cfg)?;
    let last = src.x(src.num_points() - 1);
    let q0 = grid_point(&src, cfg.geodesic.source.unwrap_or((0.0, cfg.rep.n)), "source")?;
    let q = grid_point(&src, cfg.geodesic.query.unwrap_or((last, 1)), "query")?;
    let field = kpzlab::actionfield::action_from_point(&src, q0)?;
    let bt = backtrack_geodesic(&field, &src, q)?;
    let residual = geodesic_consistency(&field, &src, &bt.path);
    let mut artifacts = Artifacts::default();
    artifacts.table("geodesic", cfg.format, csv_bytes(|w| write_geodesic_csv(&src, &bt, w))?)?;
    let failure = (residual > G_TOL).then(|| format!("geodesic consistency residual {residual:e}"));
    Ok(Outcome { artifacts, failure })
}

fn scale(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let rep = build_representation(cfg.model, &cfg.rep, RngSpec::new(cfg.seed, 0))?;
    let scaled = scale_to_fixed_point(cfg.model, &rep, cfg.rep.t, cfg.rep.theta)?;
    let mut artifacts = Artifacts::default();
    artifacts.table("scaled", cfg.format, csv_bytes(|w| scaled.write_csv(w))?)?;
    Ok(Outcome { artifacts, failure: None })
}

fn melon(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let spec = &cfg.rep;
    let rng = RngSpec::new(cfg.seed, 0);
    let mut artifacts = Artifacts::default();
    let m = match cfg.model {
        Model::Bl | Model::Oy | Model::Kpz => {
            let src = source_env(cfg)?;
            artifacts.table("source", cfg.format, csv_bytes(|w| src.write_csv(w))?)?;
            if cfg.model == Model::Bl {
                brownian_melon(&src)?
            } else {
                oy_ensemble(&src)?
            }
        }
        Model::Lg => {
            let src = sample_inverse_gamma_lattice(spec.theta, spec.width, spec.n, rng)?;
            artifacts.table("source", cfg.format, csv_bytes(|w| src.write_csv(w))?)?;
            lg_ensemble(&src)?
        }
    };
    artifacts.table("melon", cfg.format, csv_bytes(|w| m.with_source(rng).write_csv(w))?)?;
    Ok(Outcome { artifacts, failure: None })
}
