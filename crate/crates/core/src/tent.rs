//! Tent-space functionals on the phase space: the Lusin functional `A_s`,
//! the Carleson functional `C_{s,alpha}`, tents `T(B)`, the `T^p_s`
//! quasi-norms, tent atoms, and the vertical and embedding comparisons.
//!
//! A phase-space slice `g(x, omega)` is stored as one `Vec<f64>` per
//! direction. Every `sigma`-integral runs over the levels of the source:
//! the ladder nodes (weights `ln 2 / Q`) followed by the low band
//! (`LOW_SIGMA`, weight 1).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    ball_members, ball_volume_estimate, real_spectra, BallAverager, DirectionSet, KernelMode,
    MetricBall, PhasePoint, VolumeEstimate,
};
use crate::grid::{SpatialGrid, MAX_DIM};
use crate::transform::{PhaseSpaceField, PhaseSpaceSource, ScaleLadder, LOW_SIGMA};

/// A function on the sampled phase space: `values[k][i]` at grid point `i`
/// and direction `k`.
pub type Slice = Vec<Vec<f64>>;

/// Seed of the Monte Carlo ball volumes used in atom bounds.
pub const VOLUME_SEED: u64 = 20_240_601;
/// Sample count of the Monte Carlo ball volumes used in atom bounds.
pub const VOLUME_SAMPLES: usize = 400_000;

const CACHE_BYTES: usize = 512 << 20;

/// Finite ball menu for Carleson suprema: every radius is combined with
/// every center on a strided grid lattice and every strided direction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallMenu {
    pub radii: Vec<f64>,
    pub center_stride: usize,
    pub direction_stride: usize,
}

impl BallMenu {
    /// Radii `max_radius 2^{-k}` down to the grid spacing.
    pub fn dyadic(
        grid: &SpatialGrid,
        max_radius: f64,
        center_stride: usize,
        direction_stride: usize,
    ) -> Result<Self> {
        let mut radii = Vec::new();
        let mut r = max_radius;
        while r >= grid.h() {
            radii.push(r);
            r *= 0.5;
        }
        let menu = Self {
            radii,
            center_stride,
            direction_stride,
        };
        menu.validate()?;
        Ok(menu)
    }

    /// Radii from 4 down to the grid spacing, every center and direction.
    pub fn standard(grid: &SpatialGrid) -> Self {
        Self::dyadic(grid, 4.0, 1, 1).expect("grid spacing below 4")
    }

    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() || self.radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Parameter(format!(
                "ball menu radii {:?} must be nonempty and positive",
                self.radii
            )));
        }
        if self.center_stride == 0 || self.direction_stride == 0 {
            return Err(Error::Parameter(
                "ball menu strides must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `(p, s, alpha)` and the ball menu used when `p = inf`.
#[derive(Clone, Debug, Serialize)]
pub struct TentParams {
    pub p: f64,
    pub s: f64,
    pub alpha: f64,
    pub menu: Option<BallMenu>,
}

impl TentParams {
    pub fn new(p: f64, s: f64) -> Result<Self> {
        let params = Self {
            p,
            s,
            alpha: 0.0,
            menu: None,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn carleson(s: f64, alpha: f64, menu: BallMenu) -> Result<Self> {
        let params = Self {
            p: f64::INFINITY,
            s,
            alpha,
            menu: Some(menu),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0) {
            return Err(Error::Parameter(format!(
                "tent exponent p = {} must be positive",
                self.p
            )));
        }
        if !self.s.is_finite() || !self.alpha.is_finite() {
            return Err(Error::Parameter(
                "tent weights s and alpha must be finite".into(),
            ));
        }
        if let Some(m) = &self.menu {
            m.validate()?;
        }
        Ok(())
    }
}

/// An evaluated tent quasi-norm with its settings.
#[derive(Clone, Debug, Serialize)]
pub struct NormReport {
    pub p: f64,
    pub s: f64,
    pub alpha: f64,
    pub value: f64,
    pub octaves: usize,
    pub per_octave: usize,
    pub directions: usize,
    pub menu: Option<BallMenu>,
    pub fallback_balls: usize,
}

/// A discrete tent `T(B)` over a ball centered at a sample.
#[derive(Clone, Debug)]
pub struct TentRegion {
    pub ball: MetricBall,
    /// `(grid index, direction index)` of the center.
    pub center: (usize, usize),
    /// Discrete measure of the ball.
    pub measure: f64,
    /// `mask[level][k][i]`; levels are the ladder nodes then the low band.
    pub mask: Vec<Vec<Vec<bool>>>,
}

impl TentRegion {
    pub fn is_empty(&self) -> bool {
        !self.mask.iter().flatten().flatten().any(|&b| b)
    }

    pub fn count(&self) -> usize {
        self.mask.iter().flatten().flatten().filter(|&&b| b).count()
    }
}

/// A `T^p_s` atom: a field supported in the discrete tent of its ball.
#[derive(Clone, Debug)]
pub struct TentAtom {
    pub region: TentRegion,
    pub field: PhaseSpaceField,
}

#[derive(Clone, Debug, Serialize)]
pub struct AtomReport {
    pub p: f64,
    pub s: f64,
    /// Weighted energy of the samples outside the tent.
    pub outside_energy: f64,
    /// `int |A|^2 dx d omega d sigma / sigma^{1+2s}`.
    pub energy: f64,
    /// `|B|^{-(2/p - 1)}` with the Monte Carlo volume.
    pub bound: f64,
    pub volume: VolumeEstimate,
    /// `bound / energy` (infinite for the zero field).
    pub margin: f64,
    pub support_ok: bool,
    pub valid: bool,
}

/// Ratio of two tent quasi-norms together with both sides.
#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Energies of the tents of one menu ball, translated to every center.
#[derive(Clone, Debug)]
pub struct MenuEnergies {
    pub direction: usize,
    pub radius: f64,
    /// Discrete measure of the ball.
    pub measure: f64,
    /// `int_{T(B)} |F|^2 dy d nu d sigma / sigma^{1+2s}` for the ball
    /// centered at each grid point.
    pub energy: Vec<f64>,
    /// Member offsets `(spatial multi-index, direction)` of the ball at
    /// grid index 0.
    offsets: Vec<([i64; MAX_DIM], usize)>,
}

/// Evaluator for tent functionals on one grid and direction set.
pub struct TentSpace {
    grid: SpatialGrid,
    dirs: DirectionSet,
    coverage: BallAverager,
    point: BallAverager,
}

impl TentSpace {
    pub fn new(grid: SpatialGrid, dirs: DirectionSet) -> Self {
        let coverage =
            BallAverager::with_cache_limit(grid, dirs.clone(), KernelMode::Coverage, CACHE_BYTES);
        let point =
            BallAverager::with_cache_limit(grid, dirs.clone(), KernelMode::Point, CACHE_BYTES);
        Self {
            grid,
            dirs,
            coverage,
            point,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.dirs
    }

    pub fn averager(&self) -> &BallAverager {
        &self.coverage
    }

    fn check_source<S: PhaseSpaceSource + ?Sized>(&self, src: &S) -> Result<()> {
        self.grid.check_same(&src.grid())?;
        if src.directions() != self.dirs.len() {
            return Err(Error::InvalidInput(format!(
                "field has {} directions, tent space has {}",
                src.directions(),
                self.dirs.len()
            )));
        }
        Ok(())
    }

    /// `(A_s F)^2` for several `s` at once, sharing the ball averages.
    pub fn lusin_squares<S: PhaseSpaceSource + ?Sized>(
        &self,
        src: &S,
        s: &[f64],
    ) -> Result<Vec<Slice>> {
        self.check_source(src)?;
        let (m, len) = (self.dirs.len(), self.grid.len());
        let mut out = vec![vec![vec![0.0; len]; m]; s.len()];
        for (i, node) in src.ladder().nodes.iter().enumerate() {
            let slices = src.node_slices(i)?;
            if slices.iter().all(Option::is_none) {
                continue;
            }
            let powers: Vec<Vec<f64>> = slices.iter().map(|o| squares(o.as_deref(), len)).collect();
            let spectra = real_spectra(&self.grid, &powers);
            let avg = self.coverage.average_spectra(node.sigma.sqrt(), &spectra);
            for (acc, sj) in out.iter_mut().zip(s) {
                axpy(acc, node.weight * node.sigma.powf(-2.0 * sj), &avg);
            }
        }
        if let Some(low) = src.low_slice()? {
            let power = squares(Some(&low), len);
            let spectrum = real_spectra(&self.grid, &[power]).pop().flatten();
            if let Some(spectrum) = spectrum {
                let avg = self.coverage.average_uniform(LOW_SIGMA.sqrt(), &spectrum);
                for (acc, sj) in out.iter_mut().zip(s) {
                    axpy(acc, ScaleLadder::low_weight(*sj), &avg);
                }
            }
        }
        Ok(out)
    }

    /// `A_s F`.
    pub fn lusin<S: PhaseSpaceSource + ?Sized>(&self, src: &S, s: f64) -> Result<Slice> {
        let sq = self.lusin_squares(src, &[s])?.pop().expect("one weight");
        Ok(map_slice(&sq, |v| v.max(0.0).sqrt()))
    }

    /// `(sum h^n w_k |g|^p)^{1/p}`, the maximum for `p = inf`.
    pub fn lp_norm(&self, g: &Slice, p: f64) -> f64 {
        lp_norm(&self.grid, &self.dirs, g, p)
    }

    /// `|F|_{T^p_s}` for several `p` at one `s`.
    pub fn tent_norms<S: PhaseSpaceSource + ?Sized>(
        &self,
        src: &S,
        ps: &[f64],
        s: f64,
    ) -> Result<Vec<f64>> {
        let a = self.lusin(src, s)?;
        Ok(ps.iter().map(|&p| self.lp_norm(&a, p)).collect())
    }

    /// `|A_s F|_{L^p}` for `p < inf`, `|C_{s,alpha} F|_{L^inf}` for `p = inf`.
    pub fn tent_norm<S: PhaseSpaceSource + ?Sized>(
        &self,
        src: &S,
        params: &TentParams,
    ) -> Result<NormReport> {
        params.validate()?;
        let before = self.coverage.stats().fallback_balls;
        let value = if params.p.is_finite() {
            self.lp_norm(&self.lusin(src, params.s)?, params.p)
        } else {
            let menu = params
                .menu
                .clone()
                .unwrap_or_else(|| BallMenu::standard(&self.grid));
            self.carleson_sup(src, params.s, params.alpha, &menu)?
        };
        let ladder = src.ladder();
        Ok(NormReport {
            p: params.p,
            s: params.s,
            alpha: params.alpha,
            value,
            octaves: ladder.octaves,
            per_octave: ladder.per_octave,
            directions: self.dirs.len(),
            menu: if params.p.is_finite() {
                None
            } else {
                params.menu.clone()
            },
            fallback_balls: self.coverage.stats().fallback_balls - before,
        })
    }

    /// `(int_0^inf |F(x, omega, sigma)|^2 dsigma / sigma^{1+2s})^{1/2}`.
    pub fn vertical<S: PhaseSpaceSource + ?Sized>(&self, src: &S, s: f64) -> Result<Slice> {
        self.check_source(src)?;
        let (m, len) = (self.dirs.len(), self.grid.len());
        let mut acc = vec![vec![0.0; len]; m];
        for (i, node) in src.ladder().nodes.iter().enumerate() {
            let w = node.weight * node.sigma.powf(-2.0 * s);
            for (a, slice) in acc.iter_mut().zip(src.node_slices(i)?) {
                if let Some(v) = slice {
                    a.iter_mut()
                        .zip(&v)
                        .for_each(|(x, c)| *x += w * c.norm_sqr());
                }
            }
        }
        if let Some(low) = src.low_slice()? {
            let w = ScaleLadder::low_weight(s);
            for a in acc.iter_mut() {
                a.iter_mut()
                    .zip(&low)
                    .for_each(|(x, c)| *x += w * c.norm_sqr());
            }
        }
        Ok(map_slice(&acc, f64::sqrt))
    }

    /// Vertical square-function `L^p` norm over `|F|_{T^p}`.
    pub fn vertical_compare<S: PhaseSpaceSource + ?Sized>(
        &self,
        src: &S,
        p: f64,
    ) -> Result<Comparison> {
        if !(p > 0.0 && p <= 2.0) {
            return Err(Error::Parameter(format!(
                "vertical comparison needs 0 < p <= 2, got {p}"
            )));
        }
        let lhs = self.lp_norm(&self.vertical(src, 0.0)?, p);
        let rhs = self.lp_norm(&self.lusin(src, 0.0)?, p);
        if rhs == 0.0 {
            return Err(Error::UndefinedRatio("tent norm of the zero field".into()));
        }
        Ok(Comparison {
            lhs,
            rhs,
            ratio: lhs / rhs,
        })
    }

    /// `|F|_{T^{p1}_{s - n(1/p0 - 1/p1)}}` over `|F|_{T^{p0}_s}`.
    pub fn embedding_compare<S: PhaseSpaceSource + ?Sized>(
        &self,
        src: &S,
        p0: f64,
        p1: f64,
        s: f64,
    ) -> Result<Comparison> {
        if !(p0 > 0.0 && p0 <= p1 && p1.is_finite()) {
            return Err(Error::Parameter(format!(
                "embedding needs 0 < p0 <= p1 < inf, got ({p0}, {p1})"
            )));
        }
        let shift = self.grid.n as f64 * (1.0 / p0 - 1.0 / p1);
        let sq = self.lusin_squares(src, &[s - shift, s])?;
        let lhs = self.lp_norm(&map_slice(&sq[0], |v| v.max(0.0).sqrt()), p1);
        let rhs = self.lp_norm(&map_slice(&sq[1], |v| v.max(0.0).sqrt()), p0);
        if rhs == 0.0 {
            return Err(Error::UndefinedRatio("tent norm of the zero field".into()));
        }
        Ok(Comparison {
            lhs,
            rhs,
            ratio: lhs / rhs,
        })
    }

    /// `|F|_{T^inf_{s - n(alpha + 1/p0), alpha}}` over `|F|_{T^{p0}_s}`.
    pub fn carleson_embedding_compare<S: PhaseSpaceSource + ?Sized>(
        &self,
        src: &S,
        p0: f64,
        s: f64,
        alpha: f64,
        menu: &BallMenu,
    ) -> Result<Comparison> {
        let shifted = s - self.grid.n as f64 * (alpha + 1.0 / p0);
        let lhs = self.carleson_sup(src, shifted, alpha, menu)?;
        let rhs = self.lp_norm(&self.lusin(src, s)?, p0);
        if rhs == 0.0 {
            return Err(Error::UndefinedRatio("tent norm of the zero field".into()));
        }
        Ok(Comparison {
            lhs,
            rhs,
            ratio: lhs / rhs,
        })
    }

    /// The ball `B_radius` around the sample `(i, k)`.
    pub fn ball_at(&self, center: (usize, usize), radius: f64) -> MetricBall {
        MetricBall {
            center: PhasePoint {
                x: self.grid.point(center.0),
                omega: self.dirs.dirs[center.1],
            },
            radius,
        }
    }

    /// Membership of `B` and the complement spectra used to erode it.
    fn ball_sets(&self, ball: &MetricBall) -> (Vec<Vec<bool>>, f64, bool) {
        let mut inside = vec![vec![false; self.grid.len()]; self.dirs.len()];
        let members = ball_members(&self.grid, &self.dirs, ball);
        if members.fallback {
            return (inside, 0.0, false);
        }
        for &(i, k) in &members.members {
            inside[k][i] = true;
        }
        (inside, members.measure, true)
    }

    /// Samples of `B` whose `sqrt(sigma)`-ball lies inside `B`, one slice per
    /// level of `ladder`.
    fn erode(&self, inside: &[Vec<bool>], ladder: &ScaleLadder) -> Vec<Vec<Vec<bool>>> {
        let outside: Vec<Vec<f64>> = inside
            .iter()
            .map(|s| s.iter().map(|&b| if b { 0.0 } else { 1.0 }).collect())
            .collect();
        let spectra = real_spectra(&self.grid, &outside);
        let floor = 0.5
            * self.grid.cell()
            * self
                .dirs
                .weights
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
        levels(ladder)
            .into_iter()
            .map(|(sigma, _)| {
                let hits = self.point.sum_spectra(sigma.sqrt(), &spectra);
                inside
                    .iter()
                    .zip(&hits)
                    .map(|(b, h)| b.iter().zip(h).map(|(&b, &h)| b && h < floor).collect())
                    .collect()
            })
            .collect()
    }

    /// The discrete tent `T(B)` of `B_radius(center)`, with membership of
    /// `(y, nu, sigma)` decided by `d((y, nu), B^c) >= sqrt(sigma)`.
    pub fn tent_region(
        &self,
        ladder: &ScaleLadder,
        center: (usize, usize),
        radius: f64,
    ) -> Result<TentRegion> {
        if center.0 >= self.grid.len() || center.1 >= self.dirs.len() {
            return Err(Error::InvalidInput(format!(
                "center {center:?} is not a sample"
            )));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidInput(format!(
                "radius {radius} must be positive"
            )));
        }
        let ball = self.ball_at(center, radius);
        let (inside, measure, nonempty) = self.ball_sets(&ball);
        let mask = if nonempty {
            self.erode(&inside, ladder)
        } else {
            vec![vec![vec![false; self.grid.len()]; self.dirs.len()]; ladder.len() + 1]
        };
        Ok(TentRegion {
            ball,
            center,
            measure,
            mask,
        })
    }

    /// Tent energies of every menu ball at every center.
    pub fn menu_energies<S: PhaseSpaceSource + ?Sized>(
        &self,
        src: &S,
        s: f64,
        menu: &BallMenu,
    ) -> Result<Vec<MenuEnergies>> {
        self.check_source(src)?;
        menu.validate()?;
        let ladder = src.ladder().clone();
        let (m, len) = (self.dirs.len(), self.grid.len());
        let levels = levels(&ladder);
        let bytes = (levels.len() * m * len * 16) as f64;
        if bytes > 2e9 {
            return Err(Error::BudgetExceeded {
                estimate: bytes,
                budget: 2e9,
            });
        }
        let mut power_spectra: Vec<Vec<Option<Vec<Complex64>>>> = Vec::with_capacity(levels.len());
        for i in 0..ladder.len() {
            let slices = src.node_slices(i)?;
            let powers: Vec<Vec<f64>> = slices.iter().map(|o| squares(o.as_deref(), len)).collect();
            power_spectra.push(real_spectra(&self.grid, &powers));
        }
        let low = src.low_slice()?;
        let low_power = squares(low.as_deref(), len);
        power_spectra.push(real_spectra(&self.grid, &vec![low_power; m]));
        let weights: Vec<f64> = ladder
            .nodes
            .iter()
            .map(|n| n.weight * n.sigma.powf(-2.0 * s))
            .chain([ScaleLadder::low_weight(s)])
            .collect();
        let plan = crate::fft::plan(self.grid.n, self.grid.size);
        let mut out = Vec::new();
        for k in (0..m).step_by(menu.direction_stride) {
            for &radius in &menu.radii {
                let ball = self.ball_at((0, k), radius);
                let (inside, measure, nonempty) = self.ball_sets(&ball);
                let offsets = self.offsets(&inside);
                if !nonempty {
                    out.push(MenuEnergies {
                        direction: k,
                        radius,
                        measure,
                        energy: vec![0.0; len],
                        offsets,
                    });
                    continue;
                }
                let masks = self.erode(&inside, &ladder);
                let mut acc = vec![Complex64::new(0.0, 0.0); len];
                for (level, mask) in masks.iter().enumerate() {
                    let real: Vec<Vec<f64>> = mask
                        .iter()
                        .map(|s| s.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
                        .collect();
                    let mask_spectra = real_spectra(&self.grid, &real);
                    for nu in 0..m {
                        if let (Some(ms), Some(ps)) = (&mask_spectra[nu], &power_spectra[level][nu])
                        {
                            let w = weights[level] * self.dirs.weights[nu] * self.grid.cell();
                            for ((a, x), y) in acc.iter_mut().zip(ms).zip(ps) {
                                *a += x.conj() * y * w;
                            }
                        }
                    }
                }
                plan.inverse(&mut acc);
                let energy = acc.iter().map(|c| (c.re / len as f64).max(0.0)).collect();
                out.push(MenuEnergies {
                    direction: k,
                    radius,
                    measure,
                    energy,
                    offsets,
                });
            }
        }
        Ok(out)
    }

    fn offsets(&self, inside: &[Vec<bool>]) -> Vec<([i64; MAX_DIM], usize)> {
        let mut out = Vec::new();
        for (k, s) in inside.iter().enumerate() {
            for (i, &b) in s.iter().enumerate() {
                if b {
                    let m = self.grid.unflatten(i);
                    let mut off = [0i64; MAX_DIM];
                    for a in 0..self.grid.n {
                        off[a] = m[a] as i64;
                    }
                    out.push((off, k));
                }
            }
        }
        out
    }

    /// `|C_{s,alpha} F|_{L^inf}`: the largest normalized tent energy over
    /// the menu (every ball contains its own center).
    pub fn carleson_sup<S: PhaseSpaceSource + ?Sized>(
        &self,
        src: &S,
        s: f64,
        alpha: f64,
        menu: &BallMenu,
    ) -> Result<f64> {
        let mut best = 0.0f64;
        for e in self.menu_energies(src, s, menu)? {
            if e.measure <= 0.0 {
                continue;
            }
            let norm = e.measure.powf(1.0 + 2.0 * alpha);
            for c in self.centers(menu.center_stride) {
                best = best.max((e.energy[c] / norm).sqrt());
            }
        }
        Ok(best)
    }

    /// `C_{s,alpha} F` at every sample.
    pub fn carleson<S: PhaseSpaceSource + ?Sized>(
        &self,
        src: &S,
        s: f64,
        alpha: f64,
        menu: &BallMenu,
    ) -> Result<Slice> {
        let (m, len) = (self.dirs.len(), self.grid.len());
        let size = self.grid.size as i64;
        let mut out = vec![vec![0.0f64; len]; m];
        for e in self.menu_energies(src, s, menu)? {
            if e.measure <= 0.0 {
                continue;
            }
            let norm = e.measure.powf(1.0 + 2.0 * alpha);
            for c in self.centers(menu.center_stride) {
                let v = (e.energy[c] / norm).sqrt();
                if v == 0.0 {
                    continue;
                }
                let cm = self.grid.unflatten(c);
                for (off, nu) in &e.offsets {
                    let mut idx = [0usize; MAX_DIM];
                    for a in 0..self.grid.n {
                        idx[a] = (cm[a] as i64 + off[a]).rem_euclid(size) as usize;
                    }
                    let slot = &mut out[*nu][self.grid.flatten(&idx[..self.grid.n])];
                    if v > *slot {
                        *slot = v;
                    }
                }
            }
        }
        Ok(out)
    }

    fn centers(&self, stride: usize) -> Vec<usize> {
        (0..self.grid.len())
            .filter(|&i| {
                let m = self.grid.unflatten(i);
                (0..self.grid.n).all(|a| m[a] % stride == 0)
            })
            .collect()
    }

    /// `int |F|^2 dx d omega d sigma / sigma^{1+2s}` split into the part in
    /// the tent and the part outside it.
    fn tent_energy(&self, field: &PhaseSpaceField, region: &TentRegion, s: f64) -> (f64, f64) {
        let (mut inside, mut outside) = (0.0, 0.0);
        let cell = self.grid.cell();
        for (i, node) in field.ladder.nodes.iter().enumerate() {
            let w = node.weight * node.sigma.powf(-2.0 * s) * cell;
            for k in 0..field.directions {
                let wk = w * self.dirs.weights[k];
                for (v, &b) in field.slice(i, k).iter().zip(&region.mask[i][k]) {
                    let e = v.norm_sqr() * wk;
                    if b {
                        inside += e;
                    } else {
                        outside += e;
                    }
                }
            }
        }
        let low_mask = &region.mask[field.ladder.len()];
        let w = ScaleLadder::low_weight(s) * cell;
        for (i, v) in field.low.iter().enumerate() {
            for k in 0..field.directions {
                let e = v.norm_sqr() * w * self.dirs.weights[k];
                if low_mask[k][i] {
                    inside += e;
                } else {
                    outside += e;
                }
            }
        }
        (inside, outside)
    }

    /// Support and size check of a `T^p_s` atom.
    pub fn atom_validate(&self, atom: &TentAtom, p: f64, s: f64) -> Result<AtomReport> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Parameter(format!("atoms need 0 < p <= 1, got {p}")));
        }
        self.check_source(&atom.field)?;
        if atom.region.mask.len() != atom.field.ladder.len() + 1 {
            return Err(Error::InvalidInput(
                "tent region and field use different ladders".into(),
            ));
        }
        let (inside, outside) = self.tent_energy(&atom.field, &atom.region, s);
        let volume = ball_volume_estimate(
            self.grid.n,
            atom.region.ball.radius,
            VOLUME_SAMPLES,
            VOLUME_SEED,
        )?;
        let bound = volume.value.powf(-(2.0 / p - 1.0));
        let energy = inside + outside;
        let margin = if energy > 0.0 {
            bound / energy
        } else {
            f64::INFINITY
        };
        let support_ok = outside == 0.0;
        Ok(AtomReport {
            p,
            s,
            outside_energy: outside,
            energy,
            bound,
            volume,
            margin,
            support_ok,
            valid: support_ok && energy <= bound,
        })
    }

    /// A random field on the discrete tent of `B_radius(center)`, scaled so
    /// that its weighted energy is a seed-dependent fraction in `[1/2, 1]`
    /// of the atom bound. The low band is left empty.
    pub fn atom_generate(
        &self,
        ladder: &ScaleLadder,
        center: (usize, usize),
        radius: f64,
        p: f64,
        s: f64,
        seed: u64,
    ) -> Result<TentAtom> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Parameter(format!("atoms need 0 < p <= 1, got {p}")));
        }
        let region = self.tent_region(ladder, center, radius)?;
        let nodes = ladder.len();
        if !region.mask[..nodes].iter().flatten().flatten().any(|&b| b) {
            return Err(Error::DegenerateRegion(format!(
                "tent of radius {radius} contains no ladder sample"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut field = PhaseSpaceField::zeros(self.grid, ladder.clone(), self.dirs.len());
        for i in 0..nodes {
            for k in 0..self.dirs.len() {
                let mask = &region.mask[i][k];
                for (v, &b) in field.slice_mut(i, k).iter_mut().zip(mask) {
                    if b {
                        *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    }
                }
            }
        }
        let fraction: f64 = rng.gen_range(0.5..=1.0);
        let (energy, _) = self.tent_energy(&field, &region, s);
        let volume = ball_volume_estimate(self.grid.n, radius, VOLUME_SAMPLES, VOLUME_SEED)?;
        let bound = volume.value.powf(-(2.0 / p - 1.0));
        let field = field.scale(Complex64::new((fraction * bound / energy).sqrt(), 0.0));
        Ok(TentAtom { region, field })
    }

    /// An atom on a random ball with radius in `[min_radius, max_radius]`
    /// and a random center, retrying smaller-than-needed radii upward.
    pub fn random_atom(
        &self,
        ladder: &ScaleLadder,
        p: f64,
        s: f64,
        max_radius: f64,
        seed: u64,
    ) -> Result<TentAtom> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let min_radius = (4.0 * ladder.finest().sqrt()).min(max_radius);
        for _ in 0..16 {
            let radius = min_radius * (max_radius / min_radius).powf(rng.gen_range(0.0..=1.0));
            let center = (
                rng.gen_range(0..self.grid.len()),
                rng.gen_range(0..self.dirs.len()),
            );
            match self.atom_generate(ladder, center, radius, p, s, rng.gen()) {
                Err(Error::DegenerateRegion(_)) => continue,
                other => return other,
            }
        }
        Err(Error::DegenerateRegion(format!(
            "no nonempty tent with radius <= {max_radius}"
        )))
    }
}

/// `(sigma, weight)` of every level of the ladder, the low band last.
fn levels(ladder: &ScaleLadder) -> Vec<(f64, f64)> {
    ladder
        .nodes
        .iter()
        .map(|n| (n.sigma, n.weight))
        .chain([(LOW_SIGMA, 1.0)])
        .collect()
}

fn squares(slice: Option<&[Complex64]>, len: usize) -> Vec<f64> {
    match slice {
        Some(v) => v.iter().map(|c| c.norm_sqr()).collect(),
        None => vec![0.0; len],
    }
}

fn axpy(acc: &mut Slice, w: f64, x: &Slice) {
    for (a, b) in acc.iter_mut().zip(x) {
        a.iter_mut().zip(b).for_each(|(p, q)| *p += w * q);
    }
}

fn map_slice(g: &Slice, f: impl Fn(f64) -> f64) -> Slice {
    g.iter()
        .map(|s| s.iter().map(|&v| f(v)).collect())
        .collect()
}

/// `(sum h^n w_k |g|^p)^{1/p}` over the sampled phase space; the maximum
/// for `p = inf`.
pub fn lp_norm(grid: &SpatialGrid, dirs: &DirectionSet, g: &Slice, p: f64) -> f64 {
    if p.is_infinite() {
        return g.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    }
    let mut sum = 0.0;
    for (s, w) in g.iter().zip(&dirs.weights) {
        sum += w * s.iter().map(|v| v.abs().powf(p)).sum::<f64>();
    }
    (sum * grid.cell()).powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn space(size: usize, m: usize) -> TentSpace {
        TentSpace::new(
            SpatialGrid::new(2, size, 2.0 * PI).unwrap(),
            DirectionSet::new(2, m).unwrap(),
        )
    }

    fn ladder() -> ScaleLadder {
        ScaleLadder::new(3, 2).unwrap()
    }

    #[test]
    fn unit_low_band_has_unit_lusin() {
        let t = space(32, 16);
        let mut f = PhaseSpaceField::zeros(*t.grid(), ladder(), 16);
        f.low.iter_mut().for_each(|v| *v = Complex64::new(1.0, 0.0));
        let a = t.lusin(&f, 0.0).unwrap();
        assert!(
            a.iter().flatten().all(|v| (v - 1.0).abs() < 1e-5),
            "{:?}",
            &a[0][..4]
        );
    }

    #[test]
    fn weighted_lusin_is_reweighted_unweighted() {
        let t = space(32, 16);
        let f = PhaseSpaceField::random(*t.grid(), ladder(), 16, 3);
        for s in [-0.5, 0.7] {
            let a = t.lusin(&f.scale_powers(s), s).unwrap();
            let b = t.lusin(&f, 0.0).unwrap();
            for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
                assert!((x - y).abs() <= 1e-12 * y.max(1.0));
            }
        }
    }

    #[test]
    fn two_norm_is_phase_space_norm() {
        let t = space(32, 16);
        let f = PhaseSpaceField::random(*t.grid(), ladder(), 16, 4);
        let n = t
            .tent_norm(&f, &TentParams::new(2.0, 0.0).unwrap())
            .unwrap()
            .value;
        assert!(
            (n * n / f.norm_sq() - 1.0).abs() < 1e-9,
            "{} vs {}",
            n * n,
            f.norm_sq()
        );
        let c = t.vertical_compare(&f, 2.0).unwrap();
        assert!((c.ratio - 1.0).abs() < 1e-8);
    }

    #[test]
    fn homogeneity_and_p_triangle() {
        let t = space(32, 16);
        let f = PhaseSpaceField::random(*t.grid(), ladder(), 16, 5);
        let g = PhaseSpaceField::random(*t.grid(), ladder(), 16, 6).scale(Complex64::new(0.0, 3.0));
        for p in [0.5, 2.0 / 3.0, 1.0] {
            let params = TentParams::new(p, 0.0).unwrap();
            let nf = t.tent_norm(&f, &params).unwrap().value;
            let n2 = t
                .tent_norm(&f.scale(Complex64::new(2.0, 0.0)), &params)
                .unwrap()
                .value;
            assert!((n2 / nf - 2.0).abs() < 1e-12);
            let ng = t.tent_norm(&g, &params).unwrap().value;
            let nfg = t.tent_norm(&f.add(&g).unwrap(), &params).unwrap().value;
            assert!(nfg.powf(p) <= nf.powf(p) + ng.powf(p) + 1e-10);
        }
    }

    #[test]
    fn tents_grow_with_the_ball() {
        let t = space(32, 16);
        let small = t.tent_region(&ladder(), (300, 3), 1.0).unwrap();
        let large = t.tent_region(&ladder(), (300, 3), 2.0).unwrap();
        assert!(!small.is_empty());
        for (a, b) in small
            .mask
            .iter()
            .flatten()
            .flatten()
            .zip(large.mask.iter().flatten().flatten())
        {
            assert!(!a || *b);
        }
        assert!(large.count() > small.count());
    }

    #[test]
    fn tent_membership_matches_direct_erosion() {
        let t = space(16, 8);
        let lad = ScaleLadder::new(2, 1).unwrap();
        let region = t.tent_region(&lad, (40, 2), 1.6).unwrap();
        let grid = *t.grid();
        let dirs = t.directions().clone();
        let ball = region.ball;
        let inside = |i: usize, k: usize| {
            let p = PhasePoint {
                x: grid.point(i),
                omega: dirs.dirs[k],
            };
            crate::geometry::quasi_distance(&grid, &p, &ball.center) < ball.radius
        };
        for (level, (sigma, _)) in levels(&lad).into_iter().enumerate() {
            for k in 0..8 {
                for i in 0..grid.len() {
                    let p = PhasePoint {
                        x: grid.point(i),
                        omega: dirs.dirs[k],
                    };
                    let mut ok = inside(i, k);
                    for j in 0..grid.len() {
                        for nu in 0..8 {
                            let q = PhasePoint {
                                x: grid.point(j),
                                omega: dirs.dirs[nu],
                            };
                            if crate::geometry::quasi_distance(&grid, &p, &q) < sigma.sqrt()
                                && !inside(j, nu)
                            {
                                ok = false;
                            }
                        }
                    }
                    assert_eq!(region.mask[level][k][i], ok, "level {level} k {k} i {i}");
                }
            }
        }
    }

    #[test]
    fn carleson_of_zero_and_monotone_in_alpha() {
        let t = space(16, 8);
        let lad = ScaleLadder::new(2, 1).unwrap();
        let menu = BallMenu::dyadic(t.grid(), 1.0, 2, 1).unwrap();
        let zero = PhaseSpaceField::zeros(*t.grid(), lad.clone(), 8);
        assert!(t
            .carleson(&zero, 0.0, 0.0, &menu)
            .unwrap()
            .iter()
            .flatten()
            .all(|&v| v == 0.0));
        let f = PhaseSpaceField::random(*t.grid(), lad, 8, 2);
        let a = t.carleson(&f, 0.0, 0.0, &menu).unwrap();
        let b = t.carleson(&f, 0.0, 0.5, &menu).unwrap();
        assert!(a.iter().flatten().any(|&v| v > 0.0));
        for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
            assert!(y >= x);
        }
    }

    #[test]
    fn menu_energy_matches_direct_sum() {
        let t = space(16, 8);
        let lad = ScaleLadder::new(2, 1).unwrap();
        let f = PhaseSpaceField::random(*t.grid(), lad.clone(), 8, 8);
        let menu = BallMenu {
            radii: vec![1.5],
            center_stride: 1,
            direction_stride: 8,
        };
        let e = t.menu_energies(&f, 0.3, &menu).unwrap();
        for c in [0usize, 37, 200] {
            let region = t.tent_region(&lad, (c, 0), 1.5).unwrap();
            let (inside, _) = t.tent_energy(&f, &region, 0.3);
            assert!(
                (e[0].energy[c] - inside).abs() <= 1e-10 * inside.max(1e-300),
                "{} vs {inside}",
                e[0].energy[c]
            );
        }
    }

    #[test]
    fn atoms_validate_and_scale() {
        let t = space(32, 16);
        let lad = ladder();
        let zero = TentAtom {
            region: t.tent_region(&lad, (0, 0), 1.0).unwrap(),
            field: PhaseSpaceField::zeros(*t.grid(), lad.clone(), 16),
        };
        let r = t.atom_validate(&zero, 1.0, 0.0).unwrap();
        assert!(r.valid && r.margin.is_infinite());
        let a = t.atom_generate(&lad, (100, 5), 1.5, 1.0, 0.0, 1).unwrap();
        let b = t.atom_generate(&lad, (100, 5), 1.5, 1.0, 0.0, 2).unwrap();
        assert_ne!(a.field, b.field);
        let r = t.atom_validate(&a, 1.0, 0.0).unwrap();
        assert!(r.valid && r.margin >= 1.0 && r.margin <= 2.0, "{r:?}");
        let doubled = TentAtom {
            region: a.region.clone(),
            field: a.field.scale(Complex64::new(2.0, 0.0)),
        };
        let r2 = t.atom_validate(&doubled, 1.0, 0.0).unwrap();
        assert!(!r2.valid);
        assert!((r.margin / r2.margin - 4.0).abs() < 1e-9);
        assert!(matches!(
            t.atom_generate(&lad, (0, 0), 0.05, 1.0, 0.0, 1),
            Err(Error::DegenerateRegion(_))
        ));
    }
}
