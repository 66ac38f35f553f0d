//! FFT engine for averages over quasi-metric balls.
//!
//! For a fixed radius `tau`, the set of spatial offsets `z` with
//! `rho((x, omega), (x + z, nu)) < tau` depends only on the pair
//! `(omega, nu)`. It is even in `z`, so the ball average of a slice family
//! `G(., nu)` is a sum over `nu` of convolutions with real even kernels:
//!
//! ```text
//! avg(x, omega) = sum_nu w_nu (K_{omega,nu} * G_nu)(x) / sum_nu w_nu |K_{omega,nu}|
//! ```
//!
//! `Coverage` kernels weight each cell by the fraction of it inside the
//! region (supersampled), and for n = 2 are rescaled to the exact area of the
//! region when it fits in the box. The ball measure is then identical for
//! every center, which keeps the `T^2 = L^2` identity exact. `Point` kernels
//! use plain sample membership.
//!
//! For n = 2 and `M % 8 == 0`, kernels are stored only for canonical centers
//! `k0 in [0, M/8]` and mapped to the other seven octants through the lattice
//! symmetry group.

use super::{quasi_distance_sq, DirectionSet};
use crate::grid::{self, wrap, SpatialGrid, MAX_DIM};
use crate::quad::romberg;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum KernelMode {
    Coverage,
    Point,
    /// Weight `(1 + rho^2 / sigma)^{-power}` sampled at cell centers, cut
    /// off outside the radius passed to the averaging calls.
    Decay {
        sigma: f64,
        power: f64,
    },
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct KernelStats {
    pub kernels_built: usize,
    pub cached_bytes: usize,
    pub fallback_balls: usize,
}

struct PairKernel {
    spec: Vec<f32>,
    /// Exact kernel mass in cell units (the zero-frequency coefficient).
    dc: f64,
}

const UNIFORM: usize = usize::MAX;

pub struct BallAverager {
    grid: SpatialGrid,
    dirs: DirectionSet,
    mode: KernelMode,
    sym: Option<Symmetry>,
    cache: Mutex<HashMap<(u64, usize, usize), Arc<PairKernel>>>,
    cap_bytes: usize,
    stats: Mutex<KernelStats>,
}

impl BallAverager {
    pub fn new(grid: SpatialGrid, dirs: DirectionSet, mode: KernelMode) -> Self {
        Self::with_cache_limit(grid, dirs, mode, 1usize << 30)
    }

    pub fn with_cache_limit(
        grid: SpatialGrid,
        dirs: DirectionSet,
        mode: KernelMode,
        cap_bytes: usize,
    ) -> Self {
        let sym = if grid.n == 2 && dirs.len() % 8 == 0 {
            Some(Symmetry::new(&grid, dirs.len()))
        } else {
            None
        };
        BallAverager {
            grid,
            dirs,
            mode,
            sym,
            cache: Mutex::new(HashMap::new()),
            cap_bytes,
            stats: Mutex::new(KernelStats::default()),
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.dirs
    }

    pub fn mode(&self) -> KernelMode {
        self.mode
    }

    pub fn stats(&self) -> KernelStats {
        let mut s = self.stats.lock().unwrap().clone();
        s.cached_bytes = self
            .cache
            .lock()
            .unwrap()
            .values()
            .map(|k| k.spec.len() * 4)
            .sum();
        s
    }

    pub fn clear_cache(&self) {
        self.cache.lock().unwrap().clear();
    }

    /// Direction indices `nu` with `|omega_k - nu| < tau`.
    pub fn partners(&self, k: usize, tau: f64) -> Vec<usize> {
        let w = &self.dirs.dirs[k];
        (0..self.dirs.len())
            .filter(|&j| w.chord(&self.dirs.dirs[j]) < tau)
            .collect()
    }

    /// Ball measure `|B_tau(x, omega_k)|` in `dx d omega` units.
    pub fn ball_measure(&self, tau: f64, k: usize) -> f64 {
        let mut v = 0.0;
        for nu in self.partners(k, tau) {
            v += self.dirs.weights[nu] * self.kernel(tau, k, nu).0.dc;
        }
        v * self.grid.cell()
    }

    /// Spatial kernel of the pair `(omega_k, nu)` in cell units (FFT order offsets).
    pub fn spatial_kernel(&self, tau: f64, k: usize, nu: usize) -> Vec<f64> {
        self.build_spatial(tau, k, nu)
    }

    /// Ball averages of a direction-indexed family given by the spectra
    /// (unnormalized forward FFTs) of its nonnegative slices. `None` marks a
    /// zero slice. Returns one averaged slice per direction.
    pub fn average_spectra(&self, tau: f64, spectra: &[Option<Vec<Complex64>>]) -> Vec<Vec<f64>> {
        self.apply(tau, spectra, true)
    }

    /// Unnormalized kernel sums `sum_nu w_nu h^n sum_z K(z) G_nu(x - z)`.
    pub fn sum_spectra(&self, tau: f64, spectra: &[Option<Vec<Complex64>>]) -> Vec<Vec<f64>> {
        self.apply(tau, spectra, false)
    }

    fn apply(
        &self,
        tau: f64,
        spectra: &[Option<Vec<Complex64>>],
        normalize: bool,
    ) -> Vec<Vec<f64>> {
        assert_eq!(spectra.len(), self.dirs.len());
        let cell = self.grid.cell();
        let len = self.grid.len();
        let fallbacks = Mutex::new(0usize);
        let pending: Vec<Pending> = (0..self.dirs.len())
            .into_par_iter()
            .map(|k| {
                let mut acc = vec![Complex64::new(0.0, 0.0); len];
                let mut mass = 0.0;
                let mut dc = Complex64::new(0.0, 0.0);
                let mut any = false;
                for nu in self.partners(k, tau) {
                    let (ker, perm) = self.kernel(tau, k, nu);
                    let w = self.dirs.weights[nu];
                    mass += w * ker.dc;
                    if let Some(g) = &spectra[nu] {
                        any = true;
                        dc += g[0] * (w * ker.dc);
                        accumulate(&mut acc, &ker.spec, perm, g, w);
                    }
                }
                if !normalize {
                    if !any {
                        return Pending::Zero;
                    }
                    acc[0] = dc;
                    return Pending::Spectrum(acc, cell);
                }
                if mass <= 0.0 {
                    *fallbacks.lock().unwrap() += len;
                    return match &spectra[k] {
                        Some(g) => Pending::Spectrum(g.clone(), 1.0),
                        None => Pending::Zero,
                    };
                }
                if !any {
                    return Pending::Zero;
                }
                acc[0] = dc;
                Pending::Spectrum(acc, 1.0 / mass)
            })
            .collect();
        self.stats.lock().unwrap().fallback_balls += fallbacks.into_inner().unwrap();
        real_inverses(&self.grid, pending)
    }

    /// Ball averages of a direction-independent slice given by its spectrum.
    pub fn average_uniform(&self, tau: f64, spectrum: &[Complex64]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = (0..self.dirs.len())
            .into_par_iter()
            .map(|k| {
                let (ker, perm) = self.uniform_kernel(tau, k);
                let mut acc = vec![Complex64::new(0.0, 0.0); spectrum.len()];
                accumulate(&mut acc, &ker.spec, perm, spectrum, 1.0);
                acc[0] = spectrum[0] * ker.dc;
                real_inverse(&self.grid, acc, 1.0 / ker.dc)
            })
            .collect();
        drop_roundoff(&mut out);
        out
    }

    fn uniform_kernel(&self, tau: f64, k: usize) -> (Arc<PairKernel>, Option<&[u32]>) {
        let (g, k0) = self.canonical(k);
        let key = (tau.to_bits(), k0, UNIFORM);
        if let Some(ker) = self.cache.lock().unwrap().get(&key) {
            return (ker.clone(), self.perm(g));
        }
        let len = self.grid.len();
        let mut sum = vec![0.0f64; len];
        let mut dc = 0.0;
        for nu in self.partners(k0, tau) {
            let (ker, perm) = self.kernel(tau, k0, nu);
            let w = self.dirs.weights[nu];
            dc += w * ker.dc;
            match perm {
                Some(p) => {
                    for (i, s) in sum.iter_mut().enumerate() {
                        *s += w * ker.spec[p[i] as usize] as f64;
                    }
                }
                None => {
                    for (s, v) in sum.iter_mut().zip(&ker.spec) {
                        *s += w * *v as f64;
                    }
                }
            }
        }
        let ker = Arc::new(PairKernel {
            spec: sum.iter().map(|&v| v as f32).collect(),
            dc,
        });
        self.store(key, ker.clone());
        (ker, self.perm(g))
    }

    fn canonical(&self, k: usize) -> (usize, usize) {
        match &self.sym {
            Some(s) => s.canonical(k),
            None => (0, k),
        }
    }

    fn perm(&self, g: usize) -> Option<&[u32]> {
        match &self.sym {
            Some(s) if g != 0 => Some(&s.perms[g]),
            _ => None,
        }
    }

    fn kernel(&self, tau: f64, k: usize, nu: usize) -> (Arc<PairKernel>, Option<&[u32]>) {
        let (g, k0) = self.canonical(k);
        let nu0 = match &self.sym {
            Some(s) => s.dir(g, nu),
            None => nu,
        };
        let key = (tau.to_bits(), k0, nu0);
        if let Some(ker) = self.cache.lock().unwrap().get(&key) {
            return (ker.clone(), self.perm(g));
        }
        let spatial = self.build_spatial(tau, k0, nu0);
        let dc: f64 = spatial.iter().sum();
        let mut buf: Vec<Complex64> = spatial.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        crate::fft::plan(self.grid.n, self.grid.size).forward(&mut buf);
        let ker = Arc::new(PairKernel {
            spec: buf.iter().map(|c| c.re as f32).collect(),
            dc,
        });
        self.stats.lock().unwrap().kernels_built += 1;
        self.store(key, ker.clone());
        (ker, self.perm(g))
    }

    fn store(&self, key: (u64, usize, usize), ker: Arc<PairKernel>) {
        let mut cache = self.cache.lock().unwrap();
        let used: usize = cache.len() * self.grid.len() * 4;
        if used + ker.spec.len() * 4 <= self.cap_bytes {
            cache.insert(key, ker);
        }
    }

    fn build_spatial(&self, tau: f64, k: usize, nu: usize) -> Vec<f64> {
        let g = &self.grid;
        let omega = self.dirs.dirs[k];
        let other = self.dirs.dirs[nu];
        let t = tau * tau - omega.chord(&other).powi(2);
        let mut out = vec![0.0; g.len()];
        if t <= 0.0 {
            return out;
        }
        let h = g.h();
        let reach = ((t.sqrt() / h).ceil() as i64 + 1).min(g.size as i64 / 2);
        let span = (2 * reach + 1) as usize;
        let total = span.pow(g.n as u32);
        let supersample = match self.mode {
            KernelMode::Point => 1,
            KernelMode::Decay { .. } => 1,
            KernelMode::Coverage => {
                let thickness = (2.0 * t).min(2.0 * t.sqrt());
                ((6.0 * h / thickness).ceil() as usize).clamp(4, 64)
            }
        };
        let sub: Vec<f64> = (0..supersample)
            .map(|i| ((i as f64 + 0.5) / supersample as f64 - 0.5) * h)
            .collect();
        let mut seen = vec![false; g.len()];
        for tidx in 0..total {
            let mut rem = tidx;
            let mut off = [0i64; MAX_DIM];
            for a in (0..g.n).rev() {
                off[a] = (rem % span) as i64 - reach;
                rem /= span;
            }
            let mut m = [0usize; MAX_DIM];
            for a in 0..g.n {
                m[a] = off[a].rem_euclid(g.size as i64) as usize;
            }
            let flat = g.flatten(&m);
            if seen[flat] {
                continue;
            }
            seen[flat] = true;
            let mut centre = [0.0; MAX_DIM];
            for a in 0..g.n {
                centre[a] = grid::signed_index(m[a], g.size) as f64 * h;
            }
            out[flat] = match self.mode {
                KernelMode::Point => {
                    let z = [
                        wrap(centre[0], g.length),
                        wrap(centre[1], g.length),
                        if g.n > 2 {
                            wrap(centre[2], g.length)
                        } else {
                            0.0
                        },
                    ];
                    if quasi_distance_sq(&z, &omega, &other) < tau * tau {
                        1.0
                    } else {
                        0.0
                    }
                }
                KernelMode::Coverage => coverage(g, &centre, &sub, &omega, &other, tau * tau),
                KernelMode::Decay { sigma, power } => {
                    let z = [
                        wrap(centre[0], g.length),
                        wrap(centre[1], g.length),
                        if g.n > 2 {
                            wrap(centre[2], g.length)
                        } else {
                            0.0
                        },
                    ];
                    let r2 = quasi_distance_sq(&z, &omega, &other);
                    if r2 < tau * tau {
                        (1.0 + r2 / sigma).powf(-power)
                    } else {
                        0.0
                    }
                }
            };
        }
        if self.mode == KernelMode::Coverage && g.n == 2 && t.sqrt() < 0.5 * g.length - 2.0 * h {
            let gamma = omega.angle() - other.angle();
            let area = region_area(t, gamma) / g.cell();
            let mass: f64 = out.iter().sum();
            if mass > 0.0 {
                let r = area / mass;
                out.iter_mut().for_each(|v| *v *= r);
            } else {
                out[0] = area;
            }
        }
        out
    }
}

fn coverage(
    g: &SpatialGrid,
    centre: &[f64; MAX_DIM],
    sub: &[f64],
    omega: &super::Direction,
    nu: &super::Direction,
    tau2: f64,
) -> f64 {
    let s = sub.len();
    let mut hits = 0usize;
    let count = s.pow(g.n as u32);
    for i in 0..count {
        let mut rem = i;
        let mut z = [0.0; MAX_DIM];
        for a in (0..g.n).rev() {
            z[a] = wrap(centre[a] + sub[rem % s], g.length);
            rem /= s;
        }
        if quasi_distance_sq(&z, omega, nu) < tau2 {
            hits += 1;
        }
    }
    hits as f64 / count as f64
}

/// Area of `{z in R^2 : (|omega.z| + |nu.z|)/2 + |z|^2 < t}` where the angle
/// between `omega` and `nu` is `gamma`.
pub(crate) fn region_area(t: f64, gamma: f64) -> f64 {
    let radius = |phi: f64| {
        let a = 0.5 * (phi.cos().abs() + (phi - gamma).cos().abs());
        0.5 * (-a + (a * a + 4.0 * t).sqrt())
    };
    let mut cuts = vec![0.0, 2.0 * PI];
    for base in [0.5 * PI, 1.5 * PI] {
        cuts.push(base);
        cuts.push((base + gamma).rem_euclid(2.0 * PI));
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut area = 0.0;
    for w in cuts.windows(2) {
        if w[1] - w[0] > 1e-15 {
            area += romberg(|phi| 0.5 * radius(phi).powi(2), w[0], w[1], 1e-14)
                .expect("area quadrature");
        }
    }
    area
}

#[inline]
fn accumulate(acc: &mut [Complex64], spec: &[f32], perm: Option<&[u32]>, g: &[Complex64], w: f64) {
    match perm {
        Some(p) => {
            for ((a, gi), &pi) in acc.iter_mut().zip(g).zip(p) {
                *a += gi * (w * spec[pi as usize] as f64);
            }
        }
        None => {
            for ((a, gi), &s) in acc.iter_mut().zip(g).zip(spec) {
                *a += gi * (w * s as f64);
            }
        }
    }
}

/// A per-direction result awaiting its inverse transform.
/// Relative level below which convolution outputs are treated as zero.
pub const ROUNDOFF_FLOOR: f64 = 1e-13;

enum Pending {
    Zero,
    /// Hermitian spectrum of a real slice and the factor applied afterwards.
    Spectrum(Vec<Complex64>, f64),
}

/// Inverse transforms of Hermitian spectra, two per complex FFT, scaled and
/// clamped at zero. Values below `ROUNDOFF_FLOOR` times the largest output
/// are round-off of the FFT convolution and are set to zero.
fn real_inverses(grid: &SpatialGrid, pending: Vec<Pending>) -> Vec<Vec<f64>> {
    let len = grid.len();
    let mut out = vec![Vec::new(); pending.len()];
    let mut jobs: Vec<(usize, Vec<Complex64>, f64)> = Vec::new();
    for (k, p) in pending.into_iter().enumerate() {
        match p {
            Pending::Zero => out[k] = vec![0.0; len],
            Pending::Spectrum(spec, scale) => jobs.push((k, spec, scale)),
        }
    }
    let done: Vec<Vec<(usize, Vec<f64>)>> = jobs
        .par_chunks_mut(2)
        .map(|pair| {
            if pair.len() == 1 {
                let (k, spec, scale) = &mut pair[0];
                return vec![(*k, real_inverse(grid, std::mem::take(spec), *scale))];
            }
            let (a, b) = pair.split_at_mut(1);
            let (ka, sa, fa) = &mut a[0];
            let (kb, sb, fb) = &mut b[0];
            let mut data = std::mem::take(sa);
            data.iter_mut()
                .zip(sb.iter())
                .for_each(|(x, y)| *x += Complex64::new(-y.im, y.re));
            crate::fft::plan(grid.n, grid.size).inverse(&mut data);
            let (ua, ub) = (*fa / len as f64, *fb / len as f64);
            let first = data.iter().map(|c| (c.re * ua).max(0.0)).collect();
            let second = data.iter().map(|c| (c.im * ub).max(0.0)).collect();
            vec![(*ka, first), (*kb, second)]
        })
        .collect();
    for (k, v) in done.into_iter().flatten() {
        out[k] = v;
    }
    drop_roundoff(&mut out);
    out
}

fn drop_roundoff(out: &mut [Vec<f64>]) {
    let floor = ROUNDOFF_FLOOR * out.iter().flatten().cloned().fold(0.0, f64::max);
    for v in out.iter_mut().flatten() {
        if *v < floor {
            *v = 0.0;
        }
    }
}

/// Real part of the normalized inverse FFT, times `scale`, clamped at zero.
fn real_inverse(grid: &SpatialGrid, mut data: Vec<Complex64>, scale: f64) -> Vec<f64> {
    crate::fft::plan(grid.n, grid.size).inverse(&mut data);
    let s = scale / grid.len() as f64;
    data.iter().map(|c| (c.re * s).max(0.0)).collect()
}

/// The dihedral symmetry group of the square lattice acting on offsets,
/// wave vectors and equispaced direction indices.
struct Symmetry {
    m: usize,
    /// `perms[g][kappa] = g kappa` on flat FFT-order indices.
    perms: Vec<Vec<u32>>,
}

impl Symmetry {
    fn new(grid: &SpatialGrid, m: usize) -> Self {
        let n = grid.size;
        let perms = (0..8)
            .map(|g| {
                let (a, b) = (g / 2, g % 2);
                (0..grid.len())
                    .map(|idx| {
                        let k = grid.wave_index(idx);
                        let (mut x, mut y) = (k[0], k[1]);
                        if b == 1 {
                            y = -y;
                        }
                        for _ in 0..a {
                            let t = x;
                            x = -y;
                            y = t;
                        }
                        let mx = x.rem_euclid(n as i64) as usize;
                        let my = y.rem_euclid(n as i64) as usize;
                        (mx * n + my) as u32
                    })
                    .collect()
            })
            .collect();
        Symmetry { m, perms }
    }

    fn dir(&self, g: usize, k: usize) -> usize {
        let (a, b) = (g / 2, g % 2);
        let s = if b == 1 { (self.m - k) % self.m } else { k };
        (s + a * self.m / 4) % self.m
    }

    fn canonical(&self, k: usize) -> (usize, usize) {
        for g in 0..8 {
            let k0 = self.dir(g, k);
            if k0 <= self.m / 8 {
                return (g, k0);
            }
        }
        unreachable!("every direction has a canonical octant image")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ball_members, Direction, MetricBall, PhasePoint};

    fn setup(size: usize, m: usize, mode: KernelMode) -> BallAverager {
        let g = SpatialGrid::new(2, size, 2.0 * PI).unwrap();
        BallAverager::new(g, DirectionSet::new(2, m).unwrap(), mode)
    }

    fn spectra_of(grid: &SpatialGrid, slices: &[Vec<f64>]) -> Vec<Option<Vec<Complex64>>> {
        slices
            .iter()
            .map(|s| {
                let mut b: Vec<Complex64> = s.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                crate::fft::plan(grid.n, grid.size).forward(&mut b);
                Some(b)
            })
            .collect()
    }

    #[test]
    fn region_area_matches_monte_carlo_shape() {
        // small t: region is close to the strip |u| < t intersected with |z| < sqrt t
        let t = 1e-4;
        let a = region_area(t, 0.0);
        assert!(a > 0.0 && a < 4.0 * t * t.sqrt());
        // large t, gamma irrelevant in the limit: approaches pi t
        let big = region_area(1e6, 0.3);
        assert!((big / (PI * 1e6) - 1.0).abs() < 2e-3);
        assert!((region_area(0.5, 0.4) - region_area(0.5, -0.4)).abs() < 1e-12);
    }

    #[test]
    fn constant_slices_average_to_constant() {
        let av = setup(32, 16, KernelMode::Coverage);
        let slices = vec![vec![2.5; 1024]; 16];
        let out = av.average_spectra(0.7, &spectra_of(av.grid(), &slices));
        for s in &out {
            for v in s {
                assert!((v - 2.5).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn symmetric_kernels_match_direct_construction() {
        let av = setup(32, 16, KernelMode::Point);
        let tau = 0.9;
        for k in [3usize, 6, 11] {
            for nu in av.partners(k, tau) {
                let direct = av.build_spatial(tau, k, nu);
                let mut b: Vec<Complex64> =
                    direct.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                crate::fft::plan(2, 32).forward(&mut b);
                let (ker, perm) = av.kernel(tau, k, nu);
                for i in 0..b.len() {
                    let idx = perm.map(|p| p[i] as usize).unwrap_or(i);
                    assert!(
                        (ker.spec[idx] as f64 - b[i].re).abs() < 1e-4,
                        "k={k} nu={nu}"
                    );
                }
            }
        }
    }

    #[test]
    fn point_kernel_average_matches_ball_members() {
        let av = setup(32, 16, KernelMode::Point);
        let g = *av.grid();
        let dirs = av.directions().clone();
        let slices: Vec<Vec<f64>> = (0..16)
            .map(|k| {
                (0..g.len())
                    .map(|i| ((i * 7 + k * 13) % 11) as f64)
                    .collect()
            })
            .collect();
        let out = av.average_spectra(0.8, &spectra_of(&g, &slices));
        for (xi, k) in [(100usize, 2usize), (517, 9), (1000, 15)] {
            let ball = MetricBall {
                center: PhasePoint {
                    x: g.point(xi),
                    omega: dirs.dirs[k],
                },
                radius: 0.8,
            };
            let b = ball_members(&g, &dirs, &ball);
            let mean: f64 = b
                .members
                .iter()
                .map(|&(i, nu)| slices[nu][i] * dirs.weights[nu] * g.cell())
                .sum::<f64>()
                / b.measure;
            assert!(
                (out[k][xi] - mean).abs() < 1e-4 * mean.max(1.0),
                "{} vs {}",
                out[k][xi],
                mean
            );
        }
    }

    #[test]
    fn coverage_ball_measure_is_center_independent() {
        let av = setup(64, 32, KernelMode::Coverage);
        let m0 = av.ball_measure(0.5, 0);
        for k in 1..32 {
            assert!((av.ball_measure(0.5, k) - m0).abs() < 1e-12 * m0);
        }
        let _ = Direction::e(0);
    }
}
