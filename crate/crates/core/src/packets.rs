//! Frequency-side symbols: the admissible radial profile, the angular bump,
//! wave packets `psi`, directional symbols `phi_omega`, `theta`,
//! `theta_tilde`, the low-pass `rho` and the reproducing symbol `m`.
//!
//! Packet symbols are stored sparsely, as index/value lists over the
//! frequency lattice in FFT order.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Direction, DirectionSet};
use crate::grid::{self, dot, norm, GridField, Point, SpatialGrid};
use crate::quad::{romberg, smooth_step};

const QUAD_TOL: f64 = 1e-13;

/// Admissible radial profile `Psi`, supported in `[1/2, 2]`.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    scale: f64,
}

impl RadialProfile {
    pub fn build() -> Result<Self> {
        let integral = romberg(|u| Self::bump(u).powi(2) / u, 0.5, 2.0, 1e-15)?;
        if !(integral > 0.0) {
            return Err(Error::Construction("radial bump has zero energy".into()));
        }
        Ok(Self {
            scale: integral.sqrt().recip(),
        })
    }

    /// The unnormalized bump `exp(-1/((r - 1/2)(2 - r)))`.
    pub fn bump(r: f64) -> f64 {
        if r <= 0.5 || r >= 2.0 {
            0.0
        } else {
            (-1.0 / ((r - 0.5) * (2.0 - r))).exp()
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        Self::bump(r) * self.scale
    }

    /// `int_0^inf Psi(sigma r)^2 dsigma/sigma`, by quadrature in `sigma`.
    pub fn admissibility(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Ok(0.0);
        }
        romberg(|s| self.eval(s * r).powi(2) / s, 0.5 / r, 2.0 / r, QUAD_TOL)
    }

    /// `int_0^1 Psi(sigma r)^2 dsigma/sigma`.
    pub fn low_integral(&self, r: f64) -> Result<f64> {
        if r <= 0.5 {
            return Ok(0.0);
        }
        romberg(|u| self.eval(u).powi(2) / u, 0.5, r.min(2.0), QUAD_TOL)
    }

    /// `rho(r) = (1 - int_0^1 Psi(sigma r)^2 dsigma/sigma)^(1/2)`.
    pub fn rho(&self, r: f64) -> Result<f64> {
        if r <= 0.5 {
            return Ok(1.0);
        }
        if r >= 2.0 {
            return Ok(0.0);
        }
        let tail = romberg(|u| self.eval(u).powi(2) / u, r, 2.0, QUAD_TOL)?;
        if tail < -1e-12 {
            return Err(Error::Construction(format!(
                "negative radicand {tail} at |xi| = {r}"
            )));
        }
        Ok(tail.max(0.0).sqrt())
    }
}

/// Wider annular cutoff: 1 on `[1/2, 2]`, supported in `[1/4, 4]`.
pub fn wide_cutoff(u: f64) -> f64 {
    smooth_step((u - 0.25) / 0.25) * (1.0 - smooth_step((u - 2.0) / 2.0))
}

/// Radial angular bump `phi`: 1 on `[0, r0]`, 0 beyond 1.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AngularBump {
    pub plateau: f64,
    pub steepness: f64,
}

impl AngularBump {
    pub fn standard() -> Self {
        Self {
            plateau: 0.05,
            steepness: 1.5,
        }
    }

    pub fn new(plateau: f64, steepness: f64) -> Result<Self> {
        if !(plateau > 0.0 && plateau < 0.5) || !(steepness > 0.0) {
            return Err(Error::Parameter(format!(
                "bad angular bump ({plateau}, {steepness})"
            )));
        }
        Ok(Self { plateau, steepness })
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.plateau {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            let s = smooth_step((t - self.plateau) / self.plateau);
            (-self.steepness * s * t * t / (1.0 - t * t)).exp()
        }
    }
}

/// `int_{S^{n-1}} g(|e_1 - nu| / sqrt(sigma)) dnu` for `g` vanishing beyond 1,
/// with the unit-normalized sphere measure.
///
/// `breaks` are extra chord ratios where `g` changes character.
pub fn sphere_integral(
    n: usize,
    sigma: f64,
    breaks: &[f64],
    g: impl Fn(f64) -> f64,
) -> Result<f64> {
    let sq = sigma.sqrt();
    let angle = |t: f64| {
        let s = t * sq / 2.0;
        if s >= 1.0 {
            PI
        } else {
            2.0 * s.asin()
        }
    };
    let mut cuts: Vec<f64> = breaks
        .iter()
        .map(|&t| angle(t))
        .chain([0.0, angle(1.0)])
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let integrand = |th: f64| {
        let v = g(2.0 * (th / 2.0).sin() / sq);
        match n {
            2 => v / PI,
            3 => v * th.sin() / 2.0,
            _ => f64::NAN,
        }
    };
    if !(n == 2 || n == 3) {
        return Err(Error::Unsupported(format!(
            "sphere quadrature in dimension {n}"
        )));
    }
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += romberg(&integrand, w[0], w[1], QUAD_TOL)?;
    }
    Ok(total)
}

/// A real symbol given by its nonzero lattice values (FFT order indices).
#[derive(Clone, Debug, Default)]
pub struct SparseSymbol {
    pub idx: Vec<u32>,
    pub val: Vec<f64>,
}

impl SparseSymbol {
    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (&i, &v) in self.idx.iter().zip(&self.val) {
            out[i as usize] = v;
        }
        out
    }

    /// Writes `symbol * spectrum` into `out`, zero elsewhere.
    pub fn apply(&self, spectrum: &[Complex64], out: &mut [Complex64]) {
        out.fill(Complex64::new(0.0, 0.0));
        for (&i, &v) in self.idx.iter().zip(&self.val) {
            out[i as usize] = spectrum[i as usize] * v;
        }
    }

    /// Adds `weight * symbol * spectrum` into `acc`.
    pub fn accumulate(&self, spectrum: &[Complex64], weight: f64, acc: &mut [Complex64]) {
        for (&i, &v) in self.idx.iter().zip(&self.val) {
            acc[i as usize] += spectrum[i as usize] * (v * weight);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.val.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Lattice points of an annulus, sorted by angle when `n = 2`.
#[derive(Debug)]
struct Annulus {
    idx: Vec<u32>,
    r: Vec<f64>,
    angle: Vec<f64>,
    unit: Vec<Point>,
}

impl Annulus {
    fn new(grid: &SpatialGrid, inner: f64, outer: f64) -> Self {
        let mut rows: Vec<(f64, u32, f64, Point)> = Vec::new();
        for i in 0..grid.len() {
            let xi = grid.frequency(i);
            let r = norm(&xi);
            if r > inner && r < outer {
                let mut u = xi;
                u.iter_mut().for_each(|c| *c /= r);
                let a = if grid.n == 2 { u[1].atan2(u[0]) } else { 0.0 };
                rows.push((a, i as u32, r, u));
            }
        }
        if grid.n == 2 {
            rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        Self {
            idx: rows.iter().map(|r| r.1).collect(),
            r: rows.iter().map(|r| r.2).collect(),
            angle: rows.iter().map(|r| r.0).collect(),
            unit: rows.iter().map(|r| r.3).collect(),
        }
    }

    /// Positions whose unit vector lies within chord `chord` of `omega`.
    fn near(&self, n: usize, omega: &Direction, chord: f64) -> Vec<usize> {
        if n != 2 || chord >= 2.0 {
            return (0..self.idx.len())
                .filter(|&p| chord_between(&self.unit[p], &omega.v) <= chord)
                .collect();
        }
        let half = 2.0 * (chord / 2.0).asin() + 1e-12;
        let center = omega.angle();
        let mut out = Vec::new();
        for shift in [-2.0 * PI, 0.0, 2.0 * PI] {
            let lo = center - half + shift;
            let hi = center + half + shift;
            let start = self.angle.partition_point(|&a| a < lo);
            let end = self.angle.partition_point(|&a| a <= hi);
            out.extend(start..end);
        }
        out.sort_unstable();
        out.dedup();
        out.retain(|&p| chord_between(&self.unit[p], &omega.v) <= chord);
        out
    }
}

fn chord_between(a: &Point, b: &Point) -> f64 {
    let mut s = 0.0;
    for c in 0..3 {
        s += (a[c] - b[c]).powi(2);
    }
    s.sqrt()
}

/// Log-uniform nodes `tau_i = 4 * 2^(-i/K)` with the sphere constants
/// `c_tau` and `d_tau` needed by `phi_omega` and `m`.
#[derive(Debug)]
struct TauGrid {
    per_octave: usize,
    tau: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

impl TauGrid {
    fn build(n: usize, bump: &AngularBump, per_octave: usize, tau_min: f64) -> Result<Self> {
        let count = ((4.0 / tau_min).log2() * per_octave as f64).ceil() as usize + 2;
        let tau: Vec<f64> = (0..=count)
            .map(|i| 4.0 * 2f64.powf(-(i as f64) / per_octave as f64))
            .collect();
        let mut c = Vec::with_capacity(tau.len());
        let mut d = Vec::with_capacity(tau.len());
        for &t in &tau {
            c.push(packet_constant(n, bump, t)?);
            d.push(bump_mass(n, bump, t)?);
        }
        Ok(Self {
            per_octave,
            tau,
            c,
            d,
        })
    }

    fn weight(&self, i: usize) -> f64 {
        let w = LN_2 / self.per_octave as f64;
        if i == 0 {
            w / 2.0
        } else {
            w
        }
    }

    /// Node range with `Psi(tau r) != 0`, i.e. `tau` in `(1/(2r), min(2/r, 4)]`.
    fn range(&self, r: f64) -> std::ops::Range<usize> {
        let k = self.per_octave as f64;
        let hi_tau = (2.0 / r).min(4.0);
        let lo_tau = 0.5 / r;
        let first = ((4.0 / hi_tau).log2() * k).floor().max(0.0) as usize;
        let last = (((4.0 / lo_tau).log2() * k).ceil().max(0.0) as usize + 1).min(self.tau.len());
        first.min(last)..last
    }
}

/// `c_sigma = (int_S phi((e_1 - nu)/sqrt(sigma))^2 dnu)^(-1/2)`.
pub fn packet_constant(n: usize, bump: &AngularBump, sigma: f64) -> Result<f64> {
    let b = [bump.plateau, 2.0 * bump.plateau];
    let v = sphere_integral(n, sigma, &b, |t| bump.eval(t).powi(2))?;
    if !(v > 0.0) {
        return Err(Error::Construction(format!(
            "packet normalization vanishes at sigma = {sigma}"
        )));
    }
    Ok(v.sqrt().recip())
}

fn bump_mass(n: usize, bump: &AngularBump, sigma: f64) -> Result<f64> {
    sphere_integral(n, sigma, &[bump.plateau, 2.0 * bump.plateau], |t| {
        bump.eval(t)
    })
}

/// Which symbol a decay report is about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum SymbolKind {
    Psi,
    Theta,
    ThetaTilde,
}

/// Spatial decay of `F^{-1} eta_{omega,sigma}`.
#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub kind: SymbolKind,
    pub sigma: f64,
    pub direction: usize,
    pub power: f64,
    /// `max |F^{-1} eta| sigma^((3n+1)/4) (1 + |x|^2/sigma + (omega.x)^2/sigma^2)^N`
    /// over the window where the bracket is at most `window`.
    pub constant: f64,
    pub window: f64,
    pub peak: f64,
    /// Half-maximum widths of `|F^{-1} eta|`, divided by `sigma` and `sqrt(sigma)`.
    pub width_along: f64,
    pub width_across: f64,
}

type SymbolKey = (SymbolKind, u64, usize);

/// All packet symbols over one frequency lattice and direction set.
pub struct PacketFamily {
    grid: SpatialGrid,
    dirs: DirectionSet,
    radial: RadialProfile,
    bump: AngularBump,
    taus: TauGrid,
    annuli: Mutex<HashMap<(u64, u64), Arc<Annulus>>>,
    norms: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
    symbols: Mutex<HashMap<SymbolKey, Arc<SparseSymbol>>>,
    rho: OnceLock<Vec<f64>>,
    m: OnceLock<Vec<f64>>,
}

impl std::fmt::Debug for PacketFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PacketFamily")
            .field("grid", &self.grid)
            .field("directions", &self.dirs.len())
            .field("tau_per_octave", &self.taus.per_octave)
            .finish()
    }
}

impl PacketFamily {
    pub fn new(grid: SpatialGrid, dirs: DirectionSet) -> Result<Self> {
        Self::with_bump(grid, dirs, AngularBump::standard())
    }

    pub fn with_bump(grid: SpatialGrid, dirs: DirectionSet, bump: AngularBump) -> Result<Self> {
        if dirs.n != grid.n {
            return Err(Error::InvalidInput(format!(
                "direction set is {}-dimensional, grid is {}-dimensional",
                dirs.n, grid.n
            )));
        }
        let radial = RadialProfile::build()?;
        let rmax = grid.nyquist() * (grid.n as f64).sqrt();
        let tau_min = 0.25 / rmax;
        let mut per_octave = 16;
        let mut taus = TauGrid::build(grid.n, &bump, per_octave, tau_min)?;
        loop {
            let finer = TauGrid::build(grid.n, &bump, 2 * per_octave, tau_min)?;
            let mut change: f64 = 0.0;
            for &r in &[0.6, 1.0, 1.7, 3.3, 10.1, 0.7 * rmax] {
                for &t in &[0.0, 0.3, 0.8, 1.2] {
                    let a = directional_sum(&taus, &radial, &bump, r, t);
                    let b = directional_sum(&finer, &radial, &bump, r, t);
                    change = change.max((a - b).abs() / b.abs().max(1e-300));
                }
                let a = angular_mass(&taus, &radial, r);
                let b = angular_mass(&finer, &radial, r);
                change = change.max((a - b).abs() / b);
            }
            per_octave *= 2;
            taus = finer;
            if change < 1e-8 || per_octave >= 256 {
                break;
            }
        }
        Ok(Self {
            grid,
            dirs,
            radial,
            bump,
            taus,
            annuli: Mutex::default(),
            norms: Mutex::default(),
            symbols: Mutex::default(),
            rho: OnceLock::new(),
            m: OnceLock::new(),
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.dirs
    }

    pub fn radial(&self) -> &RadialProfile {
        &self.radial
    }

    pub fn bump(&self) -> &AngularBump {
        &self.bump
    }

    /// Nodes per octave of the `tau` quadrature defining `phi_omega`.
    pub fn tau_resolution(&self) -> usize {
        self.taus.per_octave
    }

    /// `c_sigma = (int_S phi((e_1 - nu)/sqrt(sigma))^2 dnu)^(-1/2)`.
    pub fn c_sigma(&self, sigma: f64) -> Result<f64> {
        packet_constant(self.grid.n, &self.bump, sigma)
    }

    /// Drops cached packet symbols.
    pub fn clear_cache(&self) {
        self.symbols.lock().unwrap().clear();
        self.annuli.lock().unwrap().clear();
        self.norms.lock().unwrap().clear();
    }

    fn check_sigma(&self, sigma: f64) -> Result<()> {
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(Error::Parameter(format!(
                "packet scale {sigma} outside (0, 1)"
            )));
        }
        if 0.5 / sigma >= self.grid.nyquist() {
            return Err(Error::Resolution(format!(
                "scale {sigma} has inner radius {} beyond the Nyquist frequency {}",
                0.5 / sigma,
                self.grid.nyquist()
            )));
        }
        Ok(())
    }

    fn check_direction(&self, k: usize) -> Result<()> {
        if k >= self.dirs.len() {
            return Err(Error::InvalidInput(format!(
                "direction index {k} out of {}",
                self.dirs.len()
            )));
        }
        Ok(())
    }

    fn annulus(&self, inner: f64, outer: f64) -> Arc<Annulus> {
        let key = (inner.to_bits(), outer.to_bits());
        if let Some(a) = self.annuli.lock().unwrap().get(&key) {
            return a.clone();
        }
        let a = Arc::new(Annulus::new(&self.grid, inner, outer));
        self.annuli.lock().unwrap().insert(key, a.clone());
        a
    }

    fn cached(
        &self,
        key: SymbolKey,
        build: impl FnOnce() -> Result<SparseSymbol>,
    ) -> Result<Arc<SparseSymbol>> {
        if let Some(s) = self.symbols.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let s = Arc::new(build()?);
        self.symbols.lock().unwrap().insert(key, s.clone());
        Ok(s)
    }

    /// Normalization `c_sigma(xi_hat) = (sum_k w_k phi((xi_hat - nu_k)/sqrt(sigma))^2)^(-1/2)`
    /// at every point of the annulus of `sigma`: the direction-set quadrature
    /// of the integral defining `c_sigma`, so that `sum_k w_k psi_k^2 = Psi^2`.
    fn discrete_constants(&self, sigma: f64) -> Result<Arc<Vec<f64>>> {
        if let Some(c) = self.norms.lock().unwrap().get(&sigma.to_bits()) {
            return Ok(c.clone());
        }
        let ann = self.annulus(0.5 / sigma, 2.0 / sigma);
        let sq = sigma.sqrt();
        let mut out = Vec::with_capacity(ann.idx.len());
        for u in &ann.unit {
            let mut s = 0.0;
            for (nu, w) in self.dirs.dirs.iter().zip(&self.dirs.weights) {
                let t = chord_between(u, &nu.v) / sq;
                if t < 1.0 {
                    s += w * self.bump.eval(t).powi(2);
                }
            }
            if s == 0.0 {
                return Err(Error::Construction(format!(
                    "{} directions leave gaps at scale {sigma}",
                    self.dirs.len()
                )));
            }
            out.push(s.sqrt().recip());
        }
        let out = Arc::new(out);
        self.norms
            .lock()
            .unwrap()
            .insert(sigma.to_bits(), out.clone());
        Ok(out)
    }

    /// `psi_{omega,sigma}(xi) = Psi(sigma xi) c_sigma(xi_hat) phi((xi_hat - omega)/sqrt(sigma))`
    /// for a direction of the set.
    pub fn psi(&self, k: usize, sigma: f64) -> Result<Arc<SparseSymbol>> {
        self.check_direction(k)?;
        self.check_sigma(sigma)?;
        self.cached((SymbolKind::Psi, sigma.to_bits(), k), || {
            self.psi_for(&self.dirs.dirs[k], sigma)
        })
    }

    /// `psi_{omega,sigma}` for an arbitrary direction; not cached.
    pub fn psi_for(&self, omega: &Direction, sigma: f64) -> Result<SparseSymbol> {
        self.check_sigma(sigma)?;
        let c = self.discrete_constants(sigma)?;
        let ann = self.annulus(0.5 / sigma, 2.0 / sigma);
        let sq = sigma.sqrt();
        let mut out = SparseSymbol::default();
        for p in ann.near(self.grid.n, omega, sq) {
            let v = self.radial.eval(sigma * ann.r[p])
                * c[p]
                * self.bump.eval(chord_between(&ann.unit[p], &omega.v) / sq);
            if v != 0.0 {
                out.idx.push(ann.idx[p]);
                out.val.push(v);
            }
        }
        Ok(out)
    }

    /// `phi_omega(xi) = int_0^4 psi_{omega,tau}(xi) dtau/tau` at one frequency.
    pub fn phi_omega_at(&self, omega: &Direction, xi: &Point) -> f64 {
        let r = norm(xi);
        if r < 0.125 {
            return 0.0;
        }
        let mut u = *xi;
        u.iter_mut().for_each(|c| *c /= r);
        directional_sum(
            &self.taus,
            &self.radial,
            &self.bump,
            r,
            chord_between(&u, &omega.v),
        )
    }

    /// Dense `phi_omega` over the lattice.
    pub fn phi_omega(&self, omega: &Direction) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| self.phi_omega_at(omega, &self.grid.frequency(i)))
            .collect()
    }

    /// `theta_{omega,sigma}(xi) = Psi(sigma xi) phi_omega(xi)`.
    pub fn theta(&self, k: usize, sigma: f64) -> Result<Arc<SparseSymbol>> {
        self.check_direction(k)?;
        self.check_sigma(sigma)?;
        self.cached((SymbolKind::Theta, sigma.to_bits(), k), || {
            let omega = &self.dirs.dirs[k];
            let ann = self.annulus(0.5 / sigma, 2.0 / sigma);
            let mut out = SparseSymbol::default();
            for p in ann.near(self.grid.n, omega, 2.0 * sigma.sqrt()) {
                let r = ann.r[p];
                let t = chord_between(&ann.unit[p], &omega.v);
                let v = self.radial.eval(sigma * r)
                    * directional_sum(&self.taus, &self.radial, &self.bump, r, t);
                if v != 0.0 {
                    out.idx.push(ann.idx[p]);
                    out.val.push(v);
                }
            }
            Ok(out)
        })
    }

    /// `theta~_{omega,sigma}(xi) = sigma^((n-1)/4) m(xi) phi_omega(xi) Psi~(sigma xi)`.
    pub fn theta_tilde(&self, k: usize, sigma: f64) -> Result<Arc<SparseSymbol>> {
        self.check_direction(k)?;
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(Error::Parameter(format!(
                "packet scale {sigma} outside (0, 1)"
            )));
        }
        self.cached((SymbolKind::ThetaTilde, sigma.to_bits(), k), || {
            let omega = &self.dirs.dirs[k];
            let ann = self.annulus(0.25 / sigma, 4.0 / sigma);
            let pre = sigma.powf((self.grid.n as f64 - 1.0) / 4.0);
            let reach = (8.0 * sigma).sqrt().min(2.0);
            let mut out = SparseSymbol::default();
            for p in ann.near(self.grid.n, omega, reach) {
                let r = ann.r[p];
                let t = chord_between(&ann.unit[p], &omega.v);
                let v = pre
                    * self.m_value(r)
                    * directional_sum(&self.taus, &self.radial, &self.bump, r, t)
                    * wide_cutoff(sigma * r);
                if v != 0.0 {
                    out.idx.push(ann.idx[p]);
                    out.val.push(v);
                }
            }
            Ok(out)
        })
    }

    /// `rho` over the lattice.
    pub fn rho(&self) -> Result<&[f64]> {
        if let Some(v) = self.rho.get() {
            return Ok(v);
        }
        let mut table: HashMap<u64, f64> = HashMap::new();
        let mut out = Vec::with_capacity(self.grid.len());
        for r in self.grid.frequency_norms() {
            let v = match table.get(&r.to_bits()) {
                Some(&v) => v,
                None => {
                    let v = self.radial.rho(r)?;
                    table.insert(r.to_bits(), v);
                    v
                }
            };
            out.push(v);
        }
        Ok(self.rho.get_or_init(|| out))
    }

    /// `int_S phi_nu(xi) dnu` for `|xi| = r`.
    pub fn angular_mass(&self, r: f64) -> f64 {
        angular_mass(&self.taus, &self.radial, r)
    }

    /// Reproducing symbol `m(r) = chi(r) / int_S phi_nu dnu`, `chi` a smooth
    /// transition from 0 at `1/4` to 1 at `1/2`.
    pub fn m_value(&self, r: f64) -> f64 {
        let chi = smooth_step((r - 0.25) / 0.25);
        if chi == 0.0 {
            return 0.0;
        }
        chi / self.angular_mass(r)
    }

    /// `m` over the lattice.
    pub fn m(&self) -> Result<&[f64]> {
        if let Some(v) = self.m.get() {
            return Ok(v);
        }
        let mut out = Vec::with_capacity(self.grid.len());
        for (i, r) in self.grid.frequency_norms().into_iter().enumerate() {
            let v = self.m_value(r);
            if !v.is_finite() {
                return Err(Error::Construction(format!(
                    "angular integral vanishes at xi = {:?}",
                    &self.grid.frequency(i)[..self.grid.n]
                )));
            }
            out.push(v);
        }
        Ok(self.m.get_or_init(|| out))
    }

    /// `sum_nu w_nu m(D) phi_nu(D) f` with the direction-set quadrature.
    pub fn reproduce(&self, f: &GridField) -> Result<GridField> {
        self.grid.check_same(&f.grid)?;
        let spec = grid::to_spectrum(f)?;
        let m = self.m()?;
        let mut acc = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (k, omega) in self.dirs.dirs.iter().enumerate() {
            let w = self.dirs.weights[k];
            for (i, a) in acc.iter_mut().enumerate() {
                if m[i] != 0.0 {
                    let xi = self.grid.frequency(i);
                    *a += spec.coeffs[i] * (w * m[i] * self.phi_omega_at(omega, &xi));
                }
            }
        }
        grid::from_spectrum(&grid::SpectralField::new(self.grid, acc)?)
    }

    /// Symbol of a given kind as a sparse list.
    pub fn symbol(&self, kind: SymbolKind, k: usize, sigma: f64) -> Result<Arc<SparseSymbol>> {
        match kind {
            SymbolKind::Psi => self.psi(k, sigma),
            SymbolKind::Theta => self.theta(k, sigma),
            SymbolKind::ThetaTilde => self.theta_tilde(k, sigma),
        }
    }

    /// Multiplier values stored as a field over the frequency lattice (FFT order).
    pub fn export(&self, symbol: &SparseSymbol) -> GridField {
        let values = symbol
            .to_dense(self.grid.len())
            .into_iter()
            .map(|v| Complex64::new(v, 0.0))
            .collect();
        GridField {
            grid: self.grid,
            values,
        }
    }

    /// Spatial profile `F^{-1} eta` on the grid.
    pub fn spatial_profile(&self, symbol: &SparseSymbol) -> Result<GridField> {
        let coeffs = symbol
            .to_dense(self.grid.len())
            .into_iter()
            .map(|v| Complex64::new(v, 0.0))
            .collect();
        grid::from_spectrum(&grid::SpectralField::new(self.grid, coeffs)?)
    }

    /// Decay constant and widths of `F^{-1} eta_{omega,sigma}`.
    pub fn decay_check(
        &self,
        kind: SymbolKind,
        k: usize,
        sigma: f64,
        power: f64,
        window: f64,
    ) -> Result<DecayReport> {
        if kind == SymbolKind::ThetaTilde {
            return Err(Error::Unsupported("decay report for theta~".into()));
        }
        let sym = self.symbol(kind, k, sigma)?;
        let prof = self.spatial_profile(&sym)?;
        let omega = self.dirs.dirs[k];
        let pre = sigma.powf((3.0 * self.grid.n as f64 + 1.0) / 4.0);
        let mut constant: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for i in 0..self.grid.len() {
            let x = self.grid.point(i);
            let a = prof.values[i].norm();
            peak = peak.max(a);
            let w = 1.0 + dot(&x, &x) / sigma + dot(&omega.v, &x).powi(2) / (sigma * sigma);
            if w <= window {
                constant = constant.max(a * pre * w.powf(power));
            }
        }
        let along = self.half_width(&sym, &omega.v)? / sigma;
        let across = self.half_width(&sym, &perpendicular(&omega))? / sigma.sqrt();
        Ok(DecayReport {
            kind,
            sigma,
            direction: k,
            power,
            constant,
            window,
            peak,
            width_along: along,
            width_across: across,
        })
    }

    /// Full width at half maximum of `|F^{-1} eta(t e)|` about `t = 0`.
    fn half_width(&self, sym: &SparseSymbol, e: &Point) -> Result<f64> {
        let vol = self.grid.dxi().powi(self.grid.n as i32);
        let xis: Vec<Point> = sym
            .idx
            .iter()
            .map(|&i| self.grid.frequency(i as usize))
            .collect();
        let eval = |t: f64| {
            let mut s = Complex64::new(0.0, 0.0);
            for (xi, &v) in xis.iter().zip(&sym.val) {
                s += Complex64::from_polar(v, t * dot(e, xi));
            }
            s.norm() * vol
        };
        let top = eval(0.0);
        if top == 0.0 {
            return Err(Error::UndefinedRatio("zero profile".into()));
        }
        let step = self.grid.h() / 8.0;
        let mut t = 0.0;
        while eval(t + step) >= top / 2.0 {
            t += step;
            if t > self.grid.length / 2.0 {
                return Ok(self.grid.length);
            }
        }
        let (mut lo, mut hi) = (t, t + step);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if eval(mid) >= top / 2.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo + hi)
    }
}

fn perpendicular(omega: &Direction) -> Point {
    let v = omega.v;
    if v[2].abs() < 0.9 {
        let p = [-v[1], v[0], 0.0];
        let l = norm(&p);
        if l > 1e-12 {
            return [p[0] / l, p[1] / l, 0.0];
        }
    }
    [1.0, 0.0, 0.0]
}

/// `sum_i w_i Psi(tau_i r) c_i phi(t / sqrt(tau_i))`: the trapezoid rule in
/// `ln tau` for `phi_omega` at radius `r` and chord `t` from `omega`.
fn directional_sum(
    taus: &TauGrid,
    radial: &RadialProfile,
    bump: &AngularBump,
    r: f64,
    t: f64,
) -> f64 {
    let mut s = 0.0;
    for i in taus.range(r) {
        let tau = taus.tau[i];
        let a = bump.eval(t / tau.sqrt());
        if a != 0.0 {
            s += taus.weight(i) * radial.eval(tau * r) * taus.c[i] * a;
        }
    }
    s
}

/// `int_S phi_nu(xi) dnu = sum_i w_i Psi(tau_i r) c_i d_i`.
fn angular_mass(taus: &TauGrid, radial: &RadialProfile, r: f64) -> f64 {
    let mut s = 0.0;
    for i in taus.range(r) {
        s += taus.weight(i) * radial.eval(taus.tau[i] * r) * taus.c[i] * taus.d[i];
    }
    s
}
