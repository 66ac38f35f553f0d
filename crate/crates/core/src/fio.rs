//! Fourier integral operators in standard form
//! `T f(x) = int e^{i Phi(x, eta)} a(x, eta) f^(eta) d eta`: sampled
//! validation of the phase, direct lattice quadrature with a multiplier
//! fast path, the wave propagators and the boundedness experiments.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, dot, norm, GridField, Point, SpatialGrid, SpectralField, MAX_DIM};
use crate::spaces::{low_cutoff, sp_exponent, FunctionSpaces, SpaceKind};
use crate::transform::ScaleLadder;

/// Largest number of `(x, eta)` pairs the direct quadrature accepts.
pub const DIRECT_BUDGET: f64 = 1e9;

const FD_STEP: f64 = 1e-3;

type PhaseFn = Arc<dyn Fn(&Point, &Point) -> f64 + Send + Sync>;
type MultiplierFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
type SymbolFn = Arc<dyn Fn(&Point, &Point) -> Complex64 + Send + Sync>;
type SymbolMultiplierFn = Arc<dyn Fn(&Point) -> Complex64 + Send + Sync>;

/// A real phase `Phi(x, eta)`, positively homogeneous of degree 1 in `eta`.
#[derive(Clone)]
pub struct PhaseFunction {
    pub name: String,
    eval: PhaseFn,
    /// `psi` when `Phi(x, eta) = x . eta + psi(eta)`.
    linear: Option<MultiplierFn>,
    pub declared_homogeneous: bool,
}

impl fmt::Debug for PhaseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseFunction")
            .field("name", &self.name)
            .field("linear", &self.linear.is_some())
            .finish()
    }
}

impl PhaseFunction {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(&Point, &Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            linear: None,
            declared_homogeneous: true,
        }
    }

    /// `Phi(x, eta) = x . eta + psi(eta)`, applied as the multiplier
    /// `e^{i psi(D)}` whenever the symbol allows it.
    pub fn translation_invariant(
        name: impl Into<String>,
        psi: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let psi: MultiplierFn = Arc::new(psi);
        let inner = psi.clone();
        Self {
            name: name.into(),
            eval: Arc::new(move |x, eta| dot(x, eta) + inner(eta)),
            linear: Some(psi),
            declared_homogeneous: true,
        }
    }

    /// `x . eta`.
    pub fn identity() -> Self {
        Self::translation_invariant("identity", |_| 0.0)
    }

    /// `x . eta + t |eta|`.
    pub fn halfwave(t: f64) -> Self {
        Self::translation_invariant(format!("halfwave({t})"), move |eta| t * norm(eta))
    }

    /// `x . eta + c x_1^2 |eta|`.
    pub fn curved(c: f64) -> Self {
        Self::new(format!("curved({c})"), move |x, eta| {
            dot(x, eta) + c * x[0] * x[0] * norm(eta)
        })
    }

    pub fn eval(&self, x: &Point, eta: &Point) -> f64 {
        (self.eval)(x, eta)
    }

    pub fn is_translation_invariant(&self) -> bool {
        self.linear.is_some()
    }

    /// `d_x Phi` by central differences.
    pub fn grad_x(&self, n: usize, x: &Point, eta: &Point) -> Point {
        let mut g = [0.0; MAX_DIM];
        for (a, ga) in g.iter_mut().enumerate().take(n) {
            let (mut xp, mut xm) = (*x, *x);
            xp[a] += FD_STEP;
            xm[a] -= FD_STEP;
            *ga = (self.eval(&xp, eta) - self.eval(&xm, eta)) / (2.0 * FD_STEP);
        }
        g
    }

    /// `d_x d_eta Phi` by central differences, `[a][b] = d_{x_a} d_{eta_b}`.
    pub fn mixed_hessian(&self, n: usize, x: &Point, eta: &Point) -> [[f64; MAX_DIM]; MAX_DIM] {
        let mut out = [[0.0; MAX_DIM]; MAX_DIM];
        let h = FD_STEP;
        for a in 0..n {
            for b in 0..n {
                let at = |sa: f64, sb: f64| {
                    let (mut xx, mut ee) = (*x, *eta);
                    xx[a] += sa * h;
                    ee[b] += sb * h;
                    self.eval(&xx, &ee)
                };
                out[a][b] =
                    (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h);
            }
        }
        out
    }
}

/// An amplitude `a(x, eta)` of order `m`.
#[derive(Clone)]
pub struct SymbolFunction {
    pub name: String,
    eval: SymbolFn,
    multiplier: Option<SymbolMultiplierFn>,
    pub order: f64,
    /// `c` with `a(x, eta) = 0` for `|eta| <= c`.
    pub vanish_radius: Option<f64>,
}

impl fmt::Debug for SymbolFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolFunction")
            .field("name", &self.name)
            .field("order", &self.order)
            .finish()
    }
}

impl SymbolFunction {
    pub fn new(
        name: impl Into<String>,
        order: f64,
        eval: impl Fn(&Point, &Point) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            multiplier: None,
            order,
            vanish_radius: None,
        }
    }

    /// An `x`-independent amplitude `a(eta)`.
    pub fn multiplier(
        name: impl Into<String>,
        order: f64,
        a: impl Fn(&Point) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        let a: SymbolMultiplierFn = Arc::new(a);
        let inner = a.clone();
        Self {
            name: name.into(),
            eval: Arc::new(move |_, eta| inner(eta)),
            multiplier: Some(a),
            order,
            vanish_radius: None,
        }
    }

    /// `a = 1`.
    pub fn one() -> Self {
        Self::multiplier("one", 0.0, |_| Complex64::new(1.0, 0.0))
    }

    /// `a = 1 - q(eta)`, vanishing for `|eta| <= 2`.
    pub fn high_pass() -> Self {
        let mut s = Self::multiplier("high-pass", 0.0, |eta| {
            Complex64::new(1.0 - low_cutoff(norm(eta)), 0.0)
        });
        s.vanish_radius = Some(2.0);
        s
    }

    /// `a = (1 - q(eta)) (1 + cos(x_1) / 2)`, an `x`-dependent amplitude.
    pub fn modulated() -> Self {
        let mut s = Self::new("modulated", 0.0, |x, eta| {
            Complex64::new(
                (1.0 - low_cutoff(norm(eta))) * (1.0 + 0.5 * x[0].cos()),
                0.0,
            )
        });
        s.vanish_radius = Some(2.0);
        s
    }

    pub fn eval(&self, x: &Point, eta: &Point) -> Complex64 {
        (self.eval)(x, eta)
    }
}

/// Built-in phases: `identity`, `halfwave` (uses `t`), `curved` (uses `t`
/// as the coefficient `c`).
pub fn builtin_phase(name: &str, t: f64) -> Result<PhaseFunction> {
    match name {
        "identity" => Ok(PhaseFunction::identity()),
        "halfwave" => Ok(PhaseFunction::halfwave(t)),
        "curved" => Ok(PhaseFunction::curved(t)),
        other => Err(Error::Parameter(format!(
            "unknown phase '{other}' (identity, halfwave, curved)"
        ))),
    }
}

/// Built-in amplitudes: `one`, `high-pass`, `modulated`.
pub fn builtin_symbol(name: &str) -> Result<SymbolFunction> {
    match name {
        "one" => Ok(SymbolFunction::one()),
        "high-pass" => Ok(SymbolFunction::high_pass()),
        "modulated" => Ok(SymbolFunction::modulated()),
        other => Err(Error::Parameter(format!(
            "unknown symbol '{other}' (one, high-pass, modulated)"
        ))),
    }
}

/// Sampled checks of the phase conditions.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseReport {
    pub phase: String,
    pub samples: usize,
    pub seed: u64,
    pub box_half_width: f64,
    /// Largest `|Phi(x, l eta) - l Phi(x, eta)| / max(|l Phi|, l)` over `l in {2, 1/2}`.
    pub homogeneity_error: f64,
    pub homogeneous: bool,
    /// Largest `|d_x d_eta Phi|` entry at `|eta| = 1`.
    pub mixed_bound: f64,
    /// Largest `|d_x Phi|` at `|eta| = 1`.
    pub gradient_bound: f64,
    pub mixed_bounded: bool,
    pub min_abs_det: f64,
    pub nondegenerate: bool,
    /// Smallest `|d_x Phi(x, e1) - d_x Phi(x, e2)| / |e1 - e2|` over sampled
    /// `x` and pairs of unit directions (`n = 2`).
    pub injectivity_min: Option<f64>,
    pub injective: bool,
    pub valid: bool,
}

fn unit_sample(rng: &mut ChaCha8Rng, n: usize) -> Point {
    loop {
        let mut v = [0.0; MAX_DIM];
        for c in v.iter_mut().take(n) {
            *c = rng.gen_range(-1.0..1.0);
        }
        let r = norm(&v);
        if r > 0.1 && r <= 1.0 {
            v.iter_mut().for_each(|c| *c /= r);
            return v;
        }
    }
}

fn det(n: usize, m: &[[f64; MAX_DIM]; MAX_DIM]) -> f64 {
    if n == 2 {
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    } else {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

/// Samples `(x, eta^)` with `x` in `[-box, box]^n` and checks homogeneity,
/// bounded mixed derivatives, `inf |det d_x d_eta Phi| > 0` and (for
/// `n = 2`) injectivity of `eta^ -> d_x Phi(x, eta^)`.
pub fn validate_phase(
    phase: &PhaseFunction,
    n: usize,
    box_half_width: f64,
    samples: usize,
    seed: u64,
) -> Result<PhaseReport> {
    if samples == 0 {
        return Err(Error::Parameter(
            "phase validation needs at least one sample".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let finite = |v: f64, what: &str| -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidPhase(format!(
                "{} evaluates to {v} ({what})",
                phase.name
            )))
        }
    };
    let mut homogeneity_error = 0.0f64;
    let mut mixed_bound = 0.0f64;
    let mut gradient_bound = 0.0f64;
    let mut min_abs_det = f64::INFINITY;
    let mut xs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut x = [0.0; MAX_DIM];
        for c in x.iter_mut().take(n) {
            *c = rng.gen_range(-box_half_width..=box_half_width);
        }
        let eta = unit_sample(&mut rng, n);
        let base = finite(phase.eval(&x, &eta), "phase")?;
        for l in [2.0, 0.5] {
            let scaled = eta.map(|c| c * l);
            let v = finite(phase.eval(&x, &scaled), "scaled phase")?;
            homogeneity_error =
                homogeneity_error.max((v - l * base).abs() / (l * base).abs().max(l));
        }
        let hess = phase.mixed_hessian(n, &x, &eta);
        for row in hess.iter().take(n) {
            for v in row.iter().take(n) {
                mixed_bound = mixed_bound.max(finite(*v, "mixed derivative")?.abs());
            }
        }
        let g = phase.grad_x(n, &x, &eta);
        gradient_bound = gradient_bound.max(finite(norm(&g), "gradient")?);
        min_abs_det = min_abs_det.min(det(n, &hess).abs());
        xs.push(x);
    }
    let injectivity_min = if n == 2 {
        let dirs: Vec<Point> = (0..64)
            .map(|k| {
                crate::geometry::Direction::from_angle(k as f64 * std::f64::consts::TAU / 64.0).v
            })
            .collect();
        let mut best = f64::INFINITY;
        for x in xs.iter().take(64) {
            let grads: Vec<Point> = dirs.iter().map(|e| phase.grad_x(n, x, e)).collect();
            for i in 0..dirs.len() {
                for j in i + 1..dirs.len() {
                    let dg = [grads[i][0] - grads[j][0], grads[i][1] - grads[j][1], 0.0];
                    let de = [dirs[i][0] - dirs[j][0], dirs[i][1] - dirs[j][1], 0.0];
                    best = best.min(norm(&dg) / norm(&de));
                }
            }
        }
        Some(best)
    } else {
        None
    };
    let homogeneous = homogeneity_error <= 1e-8;
    let mixed_bounded = mixed_bound.is_finite() && gradient_bound.is_finite();
    let nondegenerate = min_abs_det > 1e-8;
    let injective = injectivity_min.map_or(true, |v| v > 1e-6);
    Ok(PhaseReport {
        phase: phase.name.clone(),
        samples,
        seed,
        box_half_width,
        homogeneity_error,
        homogeneous,
        mixed_bound,
        gradient_bound,
        mixed_bounded,
        min_abs_det,
        nondegenerate,
        injectivity_min,
        injective,
        valid: homogeneous && mixed_bounded && nondegenerate && injective,
    })
}

/// A validated standard-form operator.
#[derive(Clone, Debug)]
pub struct FioDescriptor {
    pub phase: PhaseFunction,
    pub symbol: SymbolFunction,
    pub report: PhaseReport,
}

impl FioDescriptor {
    /// Validates the phase on the box of `grid` and refuses invalid phases.
    pub fn new(
        phase: PhaseFunction,
        symbol: SymbolFunction,
        grid: &SpatialGrid,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let report = validate_phase(&phase, grid.n, 0.5 * grid.length, samples, seed)?;
        if !report.valid {
            return Err(Error::InvalidPhase(format!(
                "{} fails the sampled conditions: homogeneity error {:.3e}, min |det| {:.3e}, injectivity {:?}",
                phase.name, report.homogeneity_error, report.min_abs_det, report.injectivity_min
            )));
        }
        Ok(Self {
            phase,
            symbol,
            report,
        })
    }

    /// Whether `T` is the multiplier `e^{i psi(D)} a(D)`.
    pub fn is_multiplier(&self) -> bool {
        self.phase.linear.is_some() && self.symbol.multiplier.is_some()
    }

    pub fn name(&self) -> String {
        format!("fio[{}, {}]", self.phase.name, self.symbol.name)
    }
}

/// `T f` through the multiplier path when `Phi` is linear in `x` and `a`
/// is `x`-independent, and by direct quadrature otherwise.
pub fn apply_fio(t: &FioDescriptor, f: &GridField) -> Result<GridField> {
    match (&t.phase.linear, &t.symbol.multiplier) {
        (Some(psi), Some(a)) => {
            grid::apply_multiplier(|xi| a(xi) * Complex64::from_polar(1.0, psi(xi)), f)
        }
        _ => apply_fio_direct(t, f, DIRECT_BUDGET),
    }
}

/// `T f(x) = sum_eta e^{i Phi(x, eta)} a(x, eta) f^(eta) dxi^n` at every
/// grid point.
pub fn apply_fio_direct(t: &FioDescriptor, f: &GridField, budget: f64) -> Result<GridField> {
    let g = f.grid;
    let spec = grid::to_spectrum(f)?;
    let active: Vec<(Point, Complex64)> = spec
        .coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
        .map(|(i, c)| (g.frequency(i), *c))
        .collect();
    let estimate = g.len() as f64 * active.len() as f64;
    if estimate > budget {
        return Err(Error::BudgetExceeded { estimate, budget });
    }
    let measure = g.dxi().powi(g.n as i32);
    let values: Vec<Complex64> = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let x = g.point(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (eta, c) in &active {
                acc +=
                    Complex64::from_polar(1.0, t.phase.eval(&x, eta)) * t.symbol.eval(&x, eta) * c;
            }
            acc * measure
        })
        .collect();
    if values
        .iter()
        .any(|v| !v.re.is_finite() || !v.im.is_finite())
    {
        return Err(Error::InvalidPhase(format!(
            "{} produced non-finite values",
            t.name()
        )));
    }
    GridField::new(g, values)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagatorKind {
    Cos,
    Sinc,
    Halfwave,
}

impl FromStr for PropagatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cos" => Ok(PropagatorKind::Cos),
            "sinc" => Ok(PropagatorKind::Sinc),
            "halfwave" => Ok(PropagatorKind::Halfwave),
            other => Err(Error::Parameter(format!(
                "unknown propagator '{other}' (cos, sinc, halfwave)"
            ))),
        }
    }
}

/// Multiplier of a propagator at `|xi| = r`.
pub fn propagator_symbol(kind: PropagatorKind, t: f64, r: f64) -> Complex64 {
    match kind {
        PropagatorKind::Cos => Complex64::new((t * r).cos(), 0.0),
        PropagatorKind::Sinc => Complex64::new(if r == 0.0 { t } else { (t * r).sin() / r }, 0.0),
        PropagatorKind::Halfwave => Complex64::from_polar(1.0, t * r),
    }
}

/// `cos(t |D|) f`, `sin(t |D|)/|D| f` or `e^{i t |D|} f`.
pub fn propagator(kind: PropagatorKind, t: f64, f: &GridField) -> Result<GridField> {
    grid::apply_multiplier(|xi| propagator_symbol(kind, t, norm(xi)), f)
}

/// An operator in a boundedness experiment.
#[derive(Clone, Debug)]
pub enum Operator {
    Identity,
    Propagator {
        kind: PropagatorKind,
        t: f64,
    },
    /// `T q(D)`: the propagator applied to the low-frequency part only.
    LowPropagator {
        kind: PropagatorKind,
        t: f64,
    },
    Fio(FioDescriptor),
}

impl Operator {
    pub fn apply(&self, f: &GridField) -> Result<GridField> {
        match self {
            Operator::Identity => Ok(f.clone()),
            Operator::Propagator { kind, t } => propagator(*kind, *t, f),
            Operator::LowPropagator { kind, t } => grid::apply_multiplier(
                |xi| propagator_symbol(*kind, *t, norm(xi)) * low_cutoff(norm(xi)),
                f,
            ),
            Operator::Fio(d) => apply_fio(d, f),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Operator::Identity => "identity".into(),
            Operator::Propagator { kind, t } => format!("{kind:?}({t})").to_lowercase(),
            Operator::LowPropagator { kind, t } => format!("{kind:?}({t})q(D)").to_lowercase(),
            Operator::Fio(d) => d.name(),
        }
    }
}

/// Which norms a boundedness experiment compares.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Norming {
    /// The same space on both sides.
    Same(SpaceKind),
    /// `|T f|_{h^{s - s(p), p}} / |f|_{h^{s + s(p), p}}`.
    Sobolev,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundednessReport {
    pub operator: String,
    pub norming: Norming,
    pub p: f64,
    pub s: f64,
    pub size: usize,
    pub length: f64,
    pub ratios: Vec<(String, f64)>,
    pub max_ratio: f64,
    pub min_ratio: f64,
}

/// `|T f| / |f|` over a labeled family in the requested pair of spaces.
pub fn boundedness_experiment(
    spaces: &FunctionSpaces,
    op: &Operator,
    norming: Norming,
    p: f64,
    s: f64,
    family: &[(String, GridField)],
) -> Result<BoundednessReport> {
    let sp = sp_exponent(spaces.grid().n, p)?;
    let mut ratios = Vec::with_capacity(family.len());
    for (label, f) in family {
        let tf = op.apply(f)?;
        let (num, den) = match norming {
            Norming::Same(kind) => (
                spaces.norm(kind, &tf, p, s)?.value,
                spaces.norm(kind, f, p, s)?.value,
            ),
            Norming::Sobolev => (
                spaces.local_hardy(&tf, p, s - sp)?.value,
                spaces.local_hardy(f, p, s + sp)?.value,
            ),
        };
        if den == 0.0 {
            return Err(Error::UndefinedRatio(format!("{label} has zero norm")));
        }
        ratios.push((label.clone(), num / den));
    }
    let grid = spaces.grid();
    Ok(BoundednessReport {
        operator: op.name(),
        norming,
        p,
        s,
        size: grid.size,
        length: grid.length,
        max_ratio: ratios.iter().map(|r| r.1).fold(0.0, f64::max),
        min_ratio: ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min),
        ratios,
    })
}

/// Box refinements for the half-wave growth experiment: `L` and `N` double
/// together, so the spacing and the ladder stay fixed while the bump, of
/// fixed physical size, shrinks relative to the box. The bump has spectrum
/// `(1 - |xi|^2 / band^2)_+^power`, so with `band <= 1/2` every packet band
/// misses it and only the low band of the transform sees it.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthSetup {
    pub base_size: usize,
    pub base_length: f64,
    /// Number of doublings after the base grid.
    pub refinements: usize,
    pub band: f64,
    pub power: i32,
    pub directions: usize,
    pub per_octave: usize,
    pub t: f64,
    /// Required growth factor per refinement (an experiment design choice).
    pub threshold: f64,
}

impl Default for GrowthSetup {
    fn default() -> Self {
        Self {
            base_size: 32,
            base_length: 16.0 * std::f64::consts::PI,
            refinements: 3,
            band: 0.5,
            power: 6,
            directions: 32,
            per_octave: 4,
            t: 1.0,
            threshold: 1.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Growth,
    Bounded,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthRow {
    pub size: usize,
    pub length: f64,
    pub octaves: usize,
    /// `|e^{i t |D|} q(D) f|_{H^{s,p}_FIO} / |f|_{H^{s,p}_FIO}`.
    pub halfwave: f64,
    /// `|cos(t |D|) q(D) f|_{H^{s,p}_FIO} / |f|_{H^{s,p}_FIO}`.
    pub cos: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub p: f64,
    pub s: f64,
    pub threshold: f64,
    pub rows: Vec<GrowthRow>,
    /// `r_{k+1} / r_k` of the half-wave ratios.
    pub halfwave_factors: Vec<f64>,
    pub halfwave_verdict: Verdict,
    pub cos_verdict: Verdict,
    /// Largest over smallest ratio across refinements.
    pub halfwave_spread: f64,
    pub cos_spread: f64,
}

fn verdict(values: &[f64], threshold: f64) -> Verdict {
    if values.len() < 4 {
        return Verdict::Inconclusive;
    }
    let last = &values[values.len() - 4..];
    if last.windows(2).all(|w| w[1] >= threshold * w[0]) {
        Verdict::Growth
    } else {
        Verdict::Bounded
    }
}

fn spread(values: &[f64]) -> f64 {
    let hi = values.iter().cloned().fold(f64::MIN, f64::max);
    let lo = values.iter().cloned().fold(f64::MAX, f64::min);
    hi / lo
}

/// The field with spectrum `(1 - |xi|^2 / band^2)_+^power`.
pub fn low_bump(grid: SpatialGrid, band: f64, power: i32) -> Result<GridField> {
    if !(band > 0.0) || power < 1 {
        return Err(Error::Parameter(format!(
            "bad low bump (band {band}, power {power})"
        )));
    }
    let coeffs = (0..grid.len())
        .map(|i| {
            let t = 1.0 - (norm(&grid.frequency(i)) / band).powi(2);
            Complex64::new(if t > 0.0 { t.powi(power) } else { 0.0 }, 0.0)
        })
        .collect();
    field_from_spectrum(grid, coeffs)
}

/// `r_k` for `e^{i t sqrt(-Delta)} q(D)` and `cos(t sqrt(-Delta)) q(D)`
/// across box refinements, for every `p` in `ps`.
pub fn halfwave_growth_experiment(
    setup: &GrowthSetup,
    ps: &[f64],
    s: f64,
) -> Result<Vec<GrowthReport>> {
    let mut rows: Vec<Vec<GrowthRow>> = vec![Vec::new(); ps.len()];
    for k in 0..=setup.refinements {
        let scale = 1usize << k;
        let grid = SpatialGrid::new(2, setup.base_size * scale, setup.base_length * scale as f64)?;
        let ladder = ScaleLadder::resolving(&grid, setup.per_octave)?;
        let octaves = ladder.octaves;
        let spaces = FunctionSpaces::on_grid(grid, setup.directions, ladder)?;
        let f = low_bump(grid, setup.band, setup.power)?;
        let base = spaces.hpfio_norms(&f, ps, s)?;
        let half = Operator::LowPropagator {
            kind: PropagatorKind::Halfwave,
            t: setup.t,
        }
        .apply(&f)?;
        let half = spaces.hpfio_norms(&half, ps, s)?;
        let cos = Operator::LowPropagator {
            kind: PropagatorKind::Cos,
            t: setup.t,
        }
        .apply(&f)?;
        let cos = spaces.hpfio_norms(&cos, ps, s)?;
        for j in 0..ps.len() {
            rows[j].push(GrowthRow {
                size: grid.size,
                length: grid.length,
                octaves,
                halfwave: half[j] / base[j],
                cos: cos[j] / base[j],
            });
        }
    }
    Ok(ps
        .iter()
        .zip(rows)
        .map(|(&p, rows)| {
            let h: Vec<f64> = rows.iter().map(|r| r.halfwave).collect();
            let c: Vec<f64> = rows.iter().map(|r| r.cos).collect();
            GrowthReport {
                p,
                s,
                threshold: setup.threshold,
                halfwave_factors: h.windows(2).map(|w| w[1] / w[0]).collect(),
                halfwave_verdict: verdict(&h, setup.threshold),
                cos_verdict: verdict(&c, setup.threshold),
                halfwave_spread: spread(&h),
                cos_spread: spread(&c),
                rows,
            }
        })
        .collect())
}

/// `|cos(t|D|) f|^2 + |sin(t|D|) f|^2 - |f|^2`, relative to `|f|^2`.
pub fn energy_identity_defect(t: f64, f: &GridField) -> Result<f64> {
    let c = propagator(PropagatorKind::Cos, t, f)?;
    let s = grid::apply_radial(|r| (t * r).sin(), f)?;
    let base = f.l2_norm().powi(2);
    if base == 0.0 {
        return Err(Error::UndefinedRatio("energy of the zero field".into()));
    }
    Ok((c.l2_norm().powi(2) + s.l2_norm().powi(2) - base).abs() / base)
}

/// A spectrum with the given coefficients on the lattice, as a field.
pub fn field_from_spectrum(grid: SpatialGrid, coeffs: Vec<Complex64>) -> Result<GridField> {
    grid::from_spectrum(&SpectralField::new(grid, coeffs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{make_test_field, TestFieldKind};
    use std::f64::consts::PI;

    fn grid(size: usize) -> SpatialGrid {
        SpatialGrid::new(2, size, 2.0 * PI).unwrap()
    }

    fn band_limited(g: &SpatialGrid, seed: u64) -> GridField {
        let nyq = g.nyquist();
        let f = make_test_field(g, TestFieldKind::BandLimitedRandom, seed).unwrap();
        grid::apply_radial(|r| if r < 0.5 * nyq { 1.0 } else { 0.0 }, &f).unwrap()
    }

    #[test]
    fn identity_and_halfwave_phases_validate() {
        for phase in [PhaseFunction::identity(), PhaseFunction::halfwave(1.0)] {
            let r = validate_phase(&phase, 2, PI, 200, 1).unwrap();
            assert!(r.valid, "{r:?}");
            assert!((r.min_abs_det - 1.0).abs() < 1e-6);
        }
        let r = validate_phase(&PhaseFunction::curved(1.0), 2, 0.4, 200, 1).unwrap();
        assert!(r.homogeneous && r.mixed_bounded && r.valid, "{r:?}");
        let wide = validate_phase(&PhaseFunction::curved(1.0), 2, PI, 400, 1).unwrap();
        assert!(wide.homogeneous && wide.mixed_bounded);
        assert!(wide.min_abs_det < 0.1);
    }

    #[test]
    fn non_homogeneous_and_non_finite_phases_are_caught() {
        let r = validate_phase(
            &PhaseFunction::new("square", |x, e| dot(x, e) + dot(e, e)),
            2,
            1.0,
            50,
            2,
        )
        .unwrap();
        assert!(!r.homogeneous && !r.valid);
        let bad = PhaseFunction::new("nan", |_, _| f64::NAN);
        assert!(matches!(
            validate_phase(&bad, 2, 1.0, 10, 0),
            Err(Error::InvalidPhase(_))
        ));
    }

    #[test]
    fn direct_quadrature_matches_multiplier_path() {
        let g = grid(32);
        for phase in [PhaseFunction::identity(), PhaseFunction::halfwave(0.7)] {
            let d = FioDescriptor::new(phase, SymbolFunction::one(), &g, 100, 3).unwrap();
            assert!(d.is_multiplier());
            for seed in 0..2 {
                let f = band_limited(&g, seed);
                let fast = apply_fio(&d, &f).unwrap();
                let slow = apply_fio_direct(&d, &f, DIRECT_BUDGET).unwrap();
                assert!(slow.rel_l2_error(&fast) < 1e-10);
            }
        }
        let d = FioDescriptor::new(PhaseFunction::identity(), SymbolFunction::one(), &g, 100, 3)
            .unwrap();
        let f = band_limited(&g, 4);
        assert!(
            apply_fio_direct(&d, &f, DIRECT_BUDGET)
                .unwrap()
                .rel_l2_error(&f)
                < 1e-10
        );
        assert!(matches!(
            apply_fio_direct(&d, &f, 10.0),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn direct_quadrature_is_linear() {
        let g = grid(16);
        let d = FioDescriptor::new(
            PhaseFunction::curved(0.05),
            SymbolFunction::modulated(),
            &g,
            100,
            5,
        )
        .unwrap();
        assert!(!d.is_multiplier());
        let f = band_limited(&g, 1);
        let h = band_limited(&g, 2);
        let a = Complex64::new(0.5, -2.0);
        let lhs = apply_fio(&d, &f.add(&h.scale(a))).unwrap();
        let rhs = apply_fio(&d, &f)
            .unwrap()
            .add(&apply_fio(&d, &h).unwrap().scale(a));
        assert!(lhs.rel_l2_error(&rhs) < 1e-12);
    }

    #[test]
    fn propagator_identities() {
        let g = grid(64);
        let f = make_test_field(&g, TestFieldKind::GaussianBump, 0).unwrap();
        assert!(
            propagator(PropagatorKind::Cos, 0.0, &f)
                .unwrap()
                .rel_l2_error(&f)
                < 1e-14
        );
        assert!(
            propagator(PropagatorKind::Halfwave, 0.0, &f)
                .unwrap()
                .rel_l2_error(&f)
                < 1e-14
        );
        let back = propagator(
            PropagatorKind::Halfwave,
            -1.3,
            &propagator(PropagatorKind::Halfwave, 1.3, &f).unwrap(),
        )
        .unwrap();
        assert!(back.rel_l2_error(&f) < 1e-12);
        assert!(energy_identity_defect(0.9, &f).unwrap() < 1e-12);
        assert_eq!(propagator_symbol(PropagatorKind::Sinc, 2.5, 0.0).re, 2.5);
        let (t, u) = (0.4, 1.1);
        let lhs = propagator(PropagatorKind::Cos, t + u, &f).unwrap();
        let ht = |x: f64, h: &GridField| propagator(PropagatorKind::Halfwave, x, h).unwrap();
        let rhs = ht(t, &ht(u, &f))
            .add(&ht(-t, &ht(-u, &f)))
            .scale(Complex64::new(0.5, 0.0));
        assert!(lhs.rel_l2_error(&rhs) < 1e-10);
    }

    #[test]
    fn identity_operator_has_unit_ratios() {
        let sp = FunctionSpaces::standard(32, 16, ScaleLadder::new(3, 2).unwrap()).unwrap();
        let fam: Vec<(String, GridField)> = (0..2)
            .map(|s| {
                (
                    format!("g{s}"),
                    make_test_field(&sp.grid(), TestFieldKind::GaussianBump, s).unwrap(),
                )
            })
            .collect();
        let r = boundedness_experiment(
            &sp,
            &Operator::Identity,
            Norming::Same(SpaceKind::Hpfio),
            1.0,
            0.0,
            &fam,
        )
        .unwrap();
        assert!(r.ratios.iter().all(|x| x.1 == 1.0));
    }

    #[test]
    fn growth_verdict_rules() {
        assert_eq!(verdict(&[1.0, 2.0, 4.0], 1.5), Verdict::Inconclusive);
        assert_eq!(verdict(&[1.0, 1.6, 2.6, 4.0], 1.5), Verdict::Growth);
        assert_eq!(verdict(&[1.0, 1.6, 2.0, 4.0], 1.5), Verdict::Bounded);
    }
}
