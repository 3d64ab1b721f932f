//! Action representations: a melon `Z(0, ., .)` bundled with the actions
//! `Z(x, ., .)` it carries from deep source points, plus the affine
//! changes of variables that move them towards the KPZ fixed point.
//!
//! A representation stores its melon on a grid (or lattice) `y_0 < y_1 < ..`
//! and one field per slice position `x > 0`. Each field lives on the melon
//! grid and has the same number of levels. The half plane `H` becomes, per
//! slice, a first admissible grid index `first_y`.

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actionfield::{
    action_from_point, discrete_polymer_from_point, discrete_residual, polymer_from_point, polymer_residual,
    recursion_residual, ActionField, ActionKind,
};
use crate::environment::{fmt_f64, sample_brownian, sample_inverse_gamma_lattice, GridEnvironment, LatticeEnvironment, RngSpec};
use crate::lastpassage::Point;
use crate::melons::{brownian_melon, lg_ensemble, oy_ensemble, Melon, MelonLines};
use crate::special::{digamma, invert_trigamma, tetragamma, trigamma};
use crate::{Error, Result, NEG_INF};

/// Triples and quadruples sampled when a representation is validated.
pub const VALIDATION_SAMPLES: usize = 10_000;
/// Largest recursion residual accepted by validation.
pub const RECURSION_TOL: f64 = 1e-8;
/// Most negative quadrangle slack accepted by validation, relative to the
/// magnitude of the values involved.
pub const QUADRANGLE_TOL: f64 = 1e-9;

const LG_CONSTANTS: &str = include_str!("../../../data/lg_constants.csv");

/// The four model families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Bl,
    Oy,
    Lg,
    Kpz,
}

impl Model {
    pub fn as_str(&self) -> &'static str {
        match self {
            Model::Bl => "bl",
            Model::Oy => "oy",
            Model::Lg => "lg",
            Model::Kpz => "kpz",
        }
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bl" => Ok(Model::Bl),
            "oy" => Ok(Model::Oy),
            "lg" => Ok(Model::Lg),
            "kpz" => Ok(Model::Kpz),
            _ => Err(Error::Parameter(format!("unknown model `{s}`"))),
        }
    }
}

/// Sizes of a sampled representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepSpec {
    /// Number of levels.
    pub n: usize,
    /// Grid step of the Brownian source (BL, OY, KPZ).
    pub dx: f64,
    /// Right end of the Brownian source grid `[0, length]`.
    pub length: f64,
    /// Lattice width of the log-gamma source.
    pub width: usize,
    /// Inverse-gamma parameter (LG).
    pub theta: f64,
    /// Time parameter (KPZ).
    pub t: f64,
    /// Triples and quadruples sampled by the axiom checks.
    pub checks: usize,
}

impl Default for RepSpec {
    fn default() -> Self {
        RepSpec { n: 3, dx: 0.05, length: 2.0, width: 12, theta: 2.0, t: 1.0, checks: VALIDATION_SAMPLES }
    }
}

impl RepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n: must be at least 1".into()));
        }
        if !(self.dx > 0.0) || !self.dx.is_finite() {
            return Err(Error::Config("dx: must be positive".into()));
        }
        if !(self.length >= 3.0 * self.dx) || !self.length.is_finite() {
            return Err(Error::Config("length: must cover at least 3 grid steps".into()));
        }
        if self.width < 3 {
            return Err(Error::Config("width: must be at least 3".into()));
        }
        if !(self.theta > 0.0) || !self.theta.is_finite() {
            return Err(Error::Config("theta: must be positive".into()));
        }
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(Error::Config("t: must be positive".into()));
        }
        Ok(())
    }

    pub fn num_points(&self) -> usize {
        (self.length / self.dx).round() as usize + 1
    }
}

/// The action `Z(x, ., .)` for one `x > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    /// Slice position in representation coordinates.
    pub x: f64,
    /// Source point of the field on the melon grid.
    pub source: Point,
    /// First melon grid index inside the half plane `H` for this `x`.
    pub first_y: usize,
    pub field: ActionField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionRepresentation {
    melon: Melon,
    melon_first_y: usize,
    slices: Vec<Slice>,
    kind: ActionKind,
    alpha: f64,
    checks: usize,
}

/// Outcome of the axiom suite. Axiom names follow the kind: `Z1`..`Z4` for
/// continuous representations, `Zd1`..`Zd3` for discrete ones.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxiomReport {
    /// Every melon value in `H` is finite.
    pub melon_finite: bool,
    /// Largest absolute recursion residual over the sampled triples.
    pub recursion: f64,
    /// `Z(x, y, 1)` is finite at every grid point of `H`.
    pub top_finite: bool,
    /// Smallest quadrangle slack over the sampled quadruples, divided by
    /// `1 + max |Z|` over the four values.
    pub quadrangle: f64,
    pub triples: usize,
    pub quadruples: usize,
    #[serde(skip)]
    discrete: bool,
}

impl AxiomReport {
    fn name(&self, continuous: &'static str, discrete: &'static str) -> &'static str {
        if self.discrete {
            discrete
        } else {
            continuous
        }
    }

    /// Fail with the first violated axiom.
    pub fn verify(&self) -> Result<()> {
        if !self.discrete && !self.melon_finite {
            return Err(Error::Axiom { axiom: "Z1", detail: "melon has a non-finite value".into() });
        }
        if !(self.recursion <= RECURSION_TOL) {
            return Err(Error::Axiom {
                axiom: self.name("Z2", "Zd1"),
                detail: format!("recursion residual {:e} exceeds {RECURSION_TOL:e}", self.recursion),
            });
        }
        if !self.top_finite {
            return Err(Error::Axiom { axiom: self.name("Z3", "Zd2"), detail: "Z(x, y, 1) not finite on H".into() });
        }
        if !(self.quadrangle >= -QUADRANGLE_TOL) {
            return Err(Error::Axiom {
                axiom: self.name("Z4", "Zd3"),
                detail: format!("quadrangle slack {:e}", self.quadrangle),
            });
        }
        Ok(())
    }
}

impl ActionRepresentation {
    /// Assemble and validate with [`VALIDATION_SAMPLES`] sampled checks.
    pub fn new(melon: Melon, melon_first_y: usize, slices: Vec<Slice>, kind: ActionKind, alpha: f64) -> Result<Self> {
        Self::assemble(melon, melon_first_y, slices, kind, alpha, VALIDATION_SAMPLES)
    }

    fn assemble(
        melon: Melon,
        melon_first_y: usize,
        slices: Vec<Slice>,
        kind: ActionKind,
        alpha: f64,
        checks: usize,
    ) -> Result<Self> {
        let rep = ActionRepresentation { melon, melon_first_y, slices, kind, alpha, checks };
        let n = rep.num_points();
        for s in &rep.slices {
            if s.field.num_points() != n || s.field.num_levels() != rep.num_levels() {
                return Err(Error::Shape("slice fields must live on the melon grid".into()));
            }
        }
        if rep.slices.windows(2).any(|w| w[1].x <= w[0].x) || rep.slices.first().is_some_and(|s| s.x <= 0.0) {
            return Err(Error::Order("slice positions must be positive and increasing".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        check_axioms(&rep, checks, &mut rng)?.verify()?;
        Ok(rep)
    }

    pub fn melon(&self) -> &Melon {
        &self.melon
    }

    pub fn slices(&self) -> &[Slice] {
        &self.slices
    }

    pub fn kind(&self) -> ActionKind {
        self.kind
    }

    /// Size `(alpha, j)`: `H = {y >= x - alpha}` and levels `k < j`.
    pub fn size(&self) -> (f64, usize) {
        (self.alpha, self.num_levels() + 1)
    }

    pub fn num_levels(&self) -> usize {
        match &self.melon.lines {
            MelonLines::Grid(e) => e.num_levels(),
            MelonLines::Lattice(e) => e.num_levels(),
        }
    }

    pub fn num_points(&self) -> usize {
        match &self.melon.lines {
            MelonLines::Grid(e) => e.num_points(),
            MelonLines::Lattice(e) => e.num_points(),
        }
    }

    /// The melon abscissa of grid index `i`.
    pub fn y(&self, i: usize) -> f64 {
        match &self.melon.lines {
            MelonLines::Grid(e) => e.x(i),
            MelonLines::Lattice(e) => e.x(i),
        }
    }

    fn melon_value(&self, i: usize, k: usize) -> f64 {
        match &self.melon.lines {
            MelonLines::Grid(e) => e.value(i, k),
            MelonLines::Lattice(e) => e.value(i, k),
        }
    }

    /// Number of `x` positions, the melon counting as position 0.
    pub fn num_positions(&self) -> usize {
        self.slices.len() + 1
    }

    /// The `x` of position `s`.
    pub fn position(&self, s: usize) -> f64 {
        if s == 0 {
            0.0
        } else {
            self.slices[s - 1].x
        }
    }

    /// First grid index of `H` at position `s`.
    pub fn first_y(&self, s: usize) -> usize {
        if s == 0 {
            self.melon_first_y
        } else {
            self.slices[s - 1].first_y
        }
    }

    /// `Z(position s, y_i, k)` by indices.
    pub fn value_at(&self, s: usize, i: usize, k: usize) -> f64 {
        if s == 0 {
            self.melon_value(i, k)
        } else {
            self.slices[s - 1].field.value(i, k)
        }
    }

    /// `Z(x, y, k)` at a slice position and grid abscissa. Points outside the
    /// stored window or outside `H` are errors.
    pub fn value(&self, x: f64, y: f64, k: usize) -> Result<f64> {
        let s = self.position_index(x)?;
        if k == 0 || k > self.num_levels() {
            return Err(Error::Domain(format!("level {k} outside 1..={}", self.num_levels())));
        }
        let i = self.y_index(y)?;
        if i < self.first_y(s) {
            return Err(Error::Domain(format!("({x}, {y}) lies outside H")));
        }
        Ok(self.value_at(s, i, k))
    }

    /// `Z(x, y, 1)`.
    pub fn sheet(&self, x: f64, y: f64) -> Result<f64> {
        self.value(x, y, 1)
    }

    /// Index of the position equal to `x`.
    pub fn position_index(&self, x: f64) -> Result<usize> {
        let scale = 1.0 + x.abs().max(self.slices.last().map_or(0.0, |s| s.x));
        (0..self.num_positions())
            .find(|&s| (self.position(s) - x).abs() <= 1e-9 * scale)
            .ok_or_else(|| Error::Domain(format!("x = {x} is not a stored slice position")))
    }

    /// Index of the melon grid point equal to `y`.
    pub fn y_index(&self, y: f64) -> Result<usize> {
        let grid = match &self.melon.lines {
            MelonLines::Grid(e) => e.grid().clone(),
            MelonLines::Lattice(e) => e.grid(),
        };
        grid.index_of(y).ok_or_else(|| Error::Domain(format!("y = {y} is not on the melon grid")))
    }

    /// CSV dump `x,y,level,value`, melon first, over the grid points of `H`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "level", "value"])?;
        for s in 0..self.num_positions() {
            let x = fmt_f64(self.position(s));
            for k in 1..=self.num_levels() {
                for i in self.first_y(s)..self.num_points() {
                    w.write_record([x.clone(), fmt_f64(self.y(i)), k.to_string(), fmt_f64(self.value_at(s, i, k))])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn is_discrete(kind: ActionKind) -> bool {
    matches!(kind, ActionKind::Discrete { .. } | ActionKind::DiscretePolymer { .. })
}

/// Residual of the slice recursion at a triple, or `None` for triples the
/// axiom does not constrain: pairs starting left of the source, where the
/// field is not an action, and in the discrete case the source point itself.
fn slice_residual(rep: &ActionRepresentation, slice: &Slice, x: usize, y: usize, k: usize) -> Option<f64> {
    let src = slice.source;
    match (&rep.melon.lines, rep.kind) {
        (MelonLines::Grid(env), ActionKind::MaxPlus) => {
            (x >= src.x).then(|| recursion_residual(&slice.field, env, x, y, k))
        }
        (MelonLines::Grid(env), ActionKind::Polymer { w }) => {
            (x >= src.x).then(|| polymer_residual(&slice.field, env, w, x, y, k))
        }
        (MelonLines::Lattice(env), ActionKind::Discrete { .. } | ActionKind::DiscretePolymer { .. }) => {
            (!(y == src.x && k == src.k)).then(|| discrete_residual(&slice.field, env, y, k))
        }
        _ => Some(f64::INFINITY),
    }
}

/// Run the axiom suite: finiteness of the melon and of `Z(., ., 1)` on `H`
/// (exhaustive), recursion residuals of the slices and the quadrangle
/// inequality on level 1 (`samples` random triples and quadruples).
pub fn check_axioms<R: Rng>(rep: &ActionRepresentation, samples: usize, rng: &mut R) -> Result<AxiomReport> {
    let n = rep.num_points();
    let kk = rep.num_levels();
    let discrete = is_discrete(rep.kind);
    let melon_finite = (1..=kk).all(|k| (rep.melon_first_y..n).all(|i| rep.melon_value(i, k).is_finite()));
    let top_finite = (0..rep.num_positions()).all(|s| (rep.first_y(s)..n).all(|i| rep.value_at(s, i, 1).is_finite()));
    let mut recursion: f64 = 0.0;
    let mut triples = 0;
    if !rep.slices.is_empty() {
        for _ in 0..samples {
            let slice = &rep.slices[rng.random_range(0..rep.slices.len())];
            let k = rng.random_range(1..=kk);
            let (x, y) = if discrete {
                (0, rng.random_range(1..n))
            } else {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                if a == b {
                    continue;
                }
                (a.min(b), a.max(b))
            };
            if let Some(r) = slice_residual(rep, slice, x, y, k) {
                recursion = recursion.max(r.abs());
                triples += 1;
            }
        }
    }
    let mut quadrangle = f64::INFINITY;
    let mut quadruples = 0;
    let positions = rep.num_positions();
    for _ in 0..samples {
        let a = rng.random_range(0..positions);
        let b = rng.random_range(0..positions);
        let (s1, s2) = (a.min(b), a.max(b));
        let lo = rep.first_y(s2);
        if lo >= n {
            continue;
        }
        let c = rng.random_range(lo..n);
        let d = rng.random_range(lo..n);
        let (y1, y2) = (c.min(d), c.max(d));
        let vals = [rep.value_at(s1, y1, 1), rep.value_at(s2, y2, 1), rep.value_at(s1, y2, 1), rep.value_at(s2, y1, 1)];
        let scale = 1.0 + vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let slack = (vals[0] + vals[1] - vals[2] - vals[3]) / scale;
        quadrangle = quadrangle.min(if slack.is_nan() { NEG_INF } else { slack });
        quadruples += 1;
    }
    Ok(AxiomReport { melon_finite, recursion, top_finite, quadrangle, triples, quadruples, discrete })
}

/// The Brownian representation of `src`: the Brownian melon and, for every
/// source grid point `x > 0`, last passage values in the melon from `(x, n)`.
pub fn brownian_representation(src: &GridEnvironment) -> Result<ActionRepresentation> {
    bl_rep(src, VALIDATION_SAMPLES)
}

fn bl_rep(src: &GridEnvironment, checks: usize) -> Result<ActionRepresentation> {
    let melon = brownian_melon(src)?;
    let env = melon.grid_env()?;
    let n = src.num_levels();
    let mut slices = Vec::with_capacity(src.num_points() - 1);
    for i in 1..src.num_points() {
        let x = src.x(i);
        let mi = env.grid().index_of(x).ok_or_else(|| Error::Domain(format!("source point {x} lost by the melon")))?;
        let source = Point::new(mi, n);
        slices.push(Slice { x, source, first_y: mi, field: action_from_point(env, source)? });
    }
    ActionRepresentation::assemble(melon, 0, slices, ActionKind::MaxPlus, 0.0, checks)
}

/// The O'Connell-Yor representation of `src`: the OY ensemble and, for every
/// ensemble grid point `x`, polymer free energies in the ensemble from
/// `(x, n)`. For `n >= 2` the half plane is `y > x`.
pub fn oy_representation(src: &GridEnvironment) -> Result<ActionRepresentation> {
    oy_rep(src, VALIDATION_SAMPLES)
}

fn oy_rep(src: &GridEnvironment, checks: usize) -> Result<ActionRepresentation> {
    let melon = oy_ensemble(src)?;
    let env = melon.grid_env()?;
    let n = src.num_levels();
    let w = std::f64::consts::E;
    let gap = usize::from(n > 1);
    let mut slices = Vec::new();
    for mi in 0..env.num_points() - gap {
        let source = Point::new(mi, n);
        slices.push(Slice { x: env.x(mi), source, first_y: mi + gap, field: polymer_from_point(env, source, w)? });
    }
    ActionRepresentation::assemble(melon, 0, slices, ActionKind::Polymer { w }, 0.0, checks)
}

/// The log-gamma representation of a lattice environment vanishing at 0:
/// the log-gamma ensemble at `x = 0`, and for integer `x >= 1` lattice free
/// energies from `(x + 1, n ^ (x + 1))`, `NEG_INF` on levels below that.
pub fn lg_representation(src: &LatticeEnvironment) -> Result<ActionRepresentation> {
    lg_rep(src, VALIDATION_SAMPLES)
}

fn lg_rep(src: &LatticeEnvironment, checks: usize) -> Result<ActionRepresentation> {
    let melon = lg_ensemble(src)?;
    let env = melon.lattice_env()?;
    let n = src.num_levels();
    let w = std::f64::consts::E;
    let mut slices = Vec::new();
    for x in 1..env.num_points() - 1 {
        let source = Point::new(x + 1, n.min(x + 1));
        let field = discrete_polymer_from_point(env, source, w)?;
        slices.push(Slice { x: env.x(x), source, first_y: x + 1, field });
    }
    let kind = ActionKind::DiscretePolymer { w, delta: env.delta() };
    ActionRepresentation::assemble(melon, 1, slices, kind, 0.0, checks)
}

/// Sample a source and build the representation of `model`. KPZ builds the
/// O'Connell-Yor representation and applies the KPZ change of variables.
pub fn build_representation(model: Model, spec: &RepSpec, rng: RngSpec) -> Result<ActionRepresentation> {
    spec.validate()?;
    let rep = match model {
        Model::Bl => {
            let src = sample_brownian(spec.n, 0.0, spec.dx, spec.num_points(), rng)?;
            bl_rep(&src, spec.checks)?.with_source(rng)
        }
        Model::Oy | Model::Kpz => {
            let src = sample_brownian(spec.n, 0.0, spec.dx, spec.num_points(), rng)?;
            oy_rep(&src, spec.checks)?.with_source(rng)
        }
        Model::Lg => {
            let src = sample_inverse_gamma_lattice(spec.theta, spec.width, spec.n, rng)?;
            lg_rep(&src, spec.checks)?.with_source(rng)
        }
    };
    if model == Model::Kpz {
        return change_of_variables(&rep, &oy_to_kpz(spec.t, spec.n)?);
    }
    Ok(rep)
}

impl ActionRepresentation {
    fn with_source(mut self, rng: RngSpec) -> Self {
        self.melon.source = Some(rng);
        self
    }
}

/// Kinds of the affine maps applied by [`change_of_variables`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingModel {
    Custom,
    BlToFp,
    OyToFp,
    LgToFp,
    OyToKpz,
    KpzToFp,
}

/// Constants of the map
/// `Z'(x, y, k) = a1 Z(a2 x, a2 y + a3, k) + a4 (y - x) + a5_k`
/// (with `a5_1` on slices and `x = 0` in the melon term), plus
/// `(k - 1) a1 log_w a2` for continuous polymers and `-(k - 1) a4 delta / a2`
/// on the slices of lattice representations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    /// `a5_k` for `k = 1, 2, ..`; the last entry repeats.
    pub a5: Vec<f64>,
    pub model: ScalingModel,
    /// `n` or `t`, when the map comes from a model.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl ScalingParams {
    pub fn new(a1: f64, a2: f64, a3: f64, a4: f64, a5: Vec<f64>) -> Result<Self> {
        let p = ScalingParams { a1, a2, a3, a4, a5, model: ScalingModel::Custom, extra: BTreeMap::new() };
        p.validate()?;
        Ok(p)
    }

    pub fn identity() -> Self {
        ScalingParams::new(1.0, 1.0, 0.0, 0.0, vec![0.0]).unwrap()
    }

    fn validate(&self) -> Result<()> {
        if !(self.a1 > 0.0) || !(self.a2 > 0.0) {
            return Err(Error::Parameter(format!("need a1 > 0 and a2 > 0, got {} and {}", self.a1, self.a2)));
        }
        let all = [self.a1, self.a2, self.a3, self.a4];
        if self.a5.is_empty() || all.iter().chain(&self.a5).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("scaling constants must be finite and a5 nonempty".into()));
        }
        Ok(())
    }

    pub fn a5(&self, k: usize) -> f64 {
        self.a5[(k - 1).min(self.a5.len() - 1)]
    }

    fn tagged(mut self, model: ScalingModel, extra: &[(&str, f64)]) -> Self {
        self.model = model;
        self.extra = extra.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        self
    }

    /// The `1:2:3` rescaling by `n`: `a1 n^{-1/3}, a2 n^{2/3}, a3 n,
    /// a4 n^{1/3}, a5 n^{2/3}`.
    pub fn kpz_rescaled(&self, n: f64) -> Result<ScalingParams> {
        let c = n.cbrt();
        let mut p = ScalingParams::new(
            self.a1 / c,
            self.a2 * c * c,
            self.a3 * n,
            self.a4 * c,
            self.a5.iter().map(|a| a * c * c).collect(),
        )?;
        p.model = self.model;
        p.extra = self.extra.clone();
        p.extra.insert("n".into(), n);
        Ok(p)
    }
}

/// Apply the change of variables. The result is validated against the
/// axiom suite for the weight `w^{1/a1}` (or the unchanged max-plus kind).
pub fn change_of_variables(rep: &ActionRepresentation, p: &ScalingParams) -> Result<ActionRepresentation> {
    p.validate()?;
    let (a1, a2, a3, a4) = (p.a1, p.a2, p.a3, p.a4);
    // Per-level corrections: the quadrature measure for continuous polymers,
    // and for lattices the shear increment picked up by the barrier term,
    // which is the only place the level enters.
    let (kind, log_term, shear_term) = match rep.kind {
        ActionKind::MaxPlus => (ActionKind::MaxPlus, 0.0, 0.0),
        ActionKind::Polymer { w } => (ActionKind::Polymer { w: w.powf(1.0 / a1) }, a1 * a2.ln() / w.ln(), 0.0),
        ActionKind::Discrete { delta } => (ActionKind::Discrete { delta: delta / a2 }, 0.0, -a4 * delta / a2),
        ActionKind::DiscretePolymer { w, delta } => {
            (ActionKind::DiscretePolymer { w: w.powf(1.0 / a1), delta: delta / a2 }, 0.0, -a4 * delta / a2)
        }
    };
    let ny = |y: f64| (y - a3) / a2;
    let melon_map = |y: f64, k: usize, v: f64| a1 * v + a4 * ny(y) + p.a5(k) + (k - 1) as f64 * log_term;
    let lines = match &rep.melon.lines {
        MelonLines::Grid(e) => {
            let grid = e.grid().affine_image(a3, a2);
            let levels = (1..=e.num_levels())
                .map(|k| (0..e.num_points()).map(|i| melon_map(e.x(i), k, e.value(i, k))).collect())
                .collect();
            MelonLines::Grid(GridEnvironment::from_levels(grid, levels)?)
        }
        MelonLines::Lattice(e) => {
            let levels = (1..=e.num_levels())
                .map(|k| (0..e.num_points()).map(|i| melon_map(e.x(i), k, e.value(i, k))).collect())
                .collect();
            MelonLines::Lattice(LatticeEnvironment::from_levels(ny(e.x0()), e.delta() / a2, levels)?)
        }
    };
    let melon = Melon { lines, provenance: rep.melon.provenance, source: rep.melon.source };
    let grid = match &melon.lines {
        MelonLines::Grid(e) => e.grid().clone(),
        MelonLines::Lattice(e) => e.grid(),
    };
    let mut slices = Vec::with_capacity(rep.slices.len());
    for s in &rep.slices {
        let x = s.x / a2;
        let field = s.field.map_values(grid.clone(), kind, |i, k, v| {
            a1 * v + a4 * (grid.x(i) - x) + p.a5(1) + (k - 1) as f64 * (log_term + shear_term)
        })?;
        slices.push(Slice { x, source: s.source, first_y: s.first_y, field });
    }
    ActionRepresentation::assemble(melon, rep.melon_first_y, slices, kind, (rep.alpha + a3) / a2, rep.checks)
}

/// Brownian LPP to the fixed point at size `n`.
pub fn bl_to_fp(n: usize) -> Result<ScalingParams> {
    let n = n as f64;
    let c = n.cbrt();
    Ok(ScalingParams::new(n.powf(1.0 / 6.0), 2.0 / c, 1.0, -2.0 * c, vec![-2.0 * c * c])?
        .tagged(ScalingModel::BlToFp, &[("n", n)]))
}

/// The O'Connell-Yor constants `theta(kappa)`, `f(kappa)`, `c(kappa)` and the
/// unscaled map built from them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OyConstants {
    pub kappa: f64,
    pub theta: f64,
    pub f: f64,
    pub c: f64,
    pub params: ScalingParams,
}

pub fn oy_scaling_constants(kappa: f64) -> Result<OyConstants> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::Parameter(format!("kappa must be positive, got {kappa}")));
    }
    let theta = invert_trigamma(kappa)?;
    let f = theta * trigamma(theta)? - digamma(theta)?;
    let c = (-0.5 * tetragamma(theta)?).cbrt();
    let params = ScalingParams::new(1.0 / c, 2.0 * c * c, kappa, -2.0 * theta * c, vec![-f / c])?
        .tagged(ScalingModel::OyToFp, &[("kappa", kappa)]);
    Ok(OyConstants { kappa, theta, f, c, params })
}

/// O'Connell-Yor to the fixed point at size `n`.
pub fn oy_to_fp(kappa: f64, n: usize) -> Result<ScalingParams> {
    oy_scaling_constants(kappa)?.params.kpz_rescaled(n as f64)
}

/// External log-gamma shape data at direction 1: `h(1)`, `h'(1)`, `d(1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LgConstants {
    pub theta: f64,
    pub h: f64,
    pub h_prime: f64,
    pub d: f64,
}

impl LgConstants {
    /// Parse a `theta,h,h_prime,d` table.
    pub fn parse_table(text: &str) -> Result<Vec<LgConstants>> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut out = Vec::new();
        for row in r.deserialize() {
            out.push(row?);
        }
        Ok(out)
    }

    /// The row for `theta` in the bundled table.
    pub fn bundled(theta: f64) -> Result<LgConstants> {
        Self::parse_table(LG_CONSTANTS)?
            .into_iter()
            .find(|c| (c.theta - theta).abs() < 1e-12)
            .ok_or_else(|| Error::Data(format!("no log-gamma constants for theta = {theta} in the bundled table")))
    }

    /// The unscaled map `a1 = 1/d, a2 = 2 d^2 / sigma^2, a3 = 1,
    /// a4 = -2 d h' / sigma^2, a5 = h / d` with `sigma^2 = Psi'(theta / 2)`.
    pub fn params(&self) -> Result<ScalingParams> {
        let s2 = trigamma(self.theta / 2.0)?;
        let d = self.d;
        Ok(ScalingParams::new(1.0 / d, 2.0 * d * d / s2, 1.0, -2.0 * d * self.h_prime / s2, vec![self.h / d])?
            .tagged(ScalingModel::LgToFp, &[("theta", self.theta)]))
    }
}

/// Log-gamma to the fixed point at size `n`.
pub fn lg_to_fp(constants: &LgConstants, n: usize) -> Result<ScalingParams> {
    constants.params()?.kpz_rescaled(n as f64)
}

/// The constants `C1`, `C2` and `C_{3,k}` (`k = 1..=levels`) of the
/// O'Connell-Yor to KPZ map.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KpzConstants {
    pub t: f64,
    pub n: usize,
    pub c1: f64,
    pub c2: f64,
    pub c3: Vec<f64>,
}

pub fn kpz_constants(t: f64, n: usize) -> Result<KpzConstants> {
    if !(t > 0.0) || !t.is_finite() || n == 0 {
        return Err(Error::Parameter(format!("need t > 0 and n >= 1, got t = {t}, n = {n}")));
    }
    let nf = n as f64;
    let c1 = (nf / t).sqrt() + 0.5;
    let c2 = nf + 0.5 * (nf * t).sqrt() - (nf - 1.0) * (nf / t).sqrt().ln();
    let mut log_fact = 0.0;
    let mut c3 = Vec::with_capacity(n);
    for k in 1..=n {
        if k > 2 {
            log_fact += ((k - 1) as f64).ln();
        }
        c3.push(-((k - 1) as f64) * t.ln() + log_fact);
    }
    Ok(KpzConstants { t, n, c1, c2, c3 })
}

/// O'Connell-Yor at `n` levels to the KPZ equation at time `t`.
pub fn oy_to_kpz(t: f64, n: usize) -> Result<ScalingParams> {
    let c = kpz_constants(t, n)?;
    let a5 = c.c3.iter().map(|c3| -c.c2 - c3).collect();
    Ok(ScalingParams::new(1.0, 1.0, (t * n as f64).sqrt(), -c.c1, a5)?
        .tagged(ScalingModel::OyToKpz, &[("t", t), ("n", n as f64)]))
}

/// KPZ at time `t` to the fixed point.
pub fn kpz_to_fp(t: f64) -> Result<ScalingParams> {
    let s = 2f64.cbrt();
    let t3 = t.cbrt();
    Ok(ScalingParams::new(s / t3, s * t3 * t3, 0.0, 0.0, vec![s * t3 * t3 / 24.0])?
        .tagged(ScalingModel::KpzToFp, &[("t", t)]))
}

/// The maps sending a representation of `model` at size `n` (and time `t`
/// for KPZ) to fixed-point scaling, in application order.
pub fn fixed_point_maps(model: Model, n: usize, t: f64, theta: f64) -> Result<Vec<ScalingParams>> {
    Ok(match model {
        Model::Bl => vec![bl_to_fp(n)?],
        Model::Oy => vec![oy_to_fp(1.0, n)?],
        Model::Lg => vec![lg_to_fp(&LgConstants::bundled(theta)?, n)?],
        Model::Kpz => vec![kpz_to_fp(t)?],
    })
}

/// Rescale a representation of `model` to the fixed point. A KPZ
/// representation is expected to be the output of [`build_representation`]
/// for [`Model::Kpz`], which already applied the O'Connell-Yor to KPZ map.
pub fn scale_to_fixed_point(model: Model, rep: &ActionRepresentation, t: f64, theta: f64) -> Result<ActionRepresentation> {
    let n = rep.num_levels();
    let mut out = rep.clone();
    for p in fixed_point_maps(model, n, t, theta)? {
        out = change_of_variables(&out, &p)?;
    }
    Ok(out)
}
