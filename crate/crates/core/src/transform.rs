//! The wave packet transform `W = W_l + W_h`, its adjoint `V`, and the scale
//! ladder realizing `int dsigma/sigma`.
//!
//! Norm identities (`|Wf|^2`, `VWf`) are evaluated on the spectral side,
//! where each slice energy is a weighted sum of `|fhat|^2`. Spatial slices
//! are produced one ladder node at a time through [`PhaseSpaceSource`].

use std::io::{Read, Write};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, GridField, SpatialGrid, SpectralField};
use crate::packets::{PacketFamily, SymbolKind};

/// Representative scale of the low band `[1, e]` (its geometric midpoint).
pub const LOW_SIGMA: f64 = 1.648_721_270_700_128_1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScaleNode {
    pub octave: usize,
    pub step: usize,
    pub sigma: f64,
    pub weight: f64,
}

/// `sigma_{j,q} = 2^{-j-(q+1/2)/Q}`, `j < J`, `q < Q`, weights `ln 2 / Q`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleLadder {
    pub octaves: usize,
    pub per_octave: usize,
    pub nodes: Vec<ScaleNode>,
}

impl ScaleLadder {
    pub fn new(octaves: usize, per_octave: usize) -> Result<Self> {
        if octaves == 0 || per_octave == 0 {
            return Err(Error::Parameter(format!(
                "ladder needs J, Q >= 1 (got {octaves}, {per_octave})"
            )));
        }
        let w = std::f64::consts::LN_2 / per_octave as f64;
        let mut nodes = Vec::with_capacity(octaves * per_octave);
        for j in 0..octaves {
            for q in 0..per_octave {
                let sigma = 2f64.powf(-(j as f64) - (q as f64 + 0.5) / per_octave as f64);
                nodes.push(ScaleNode {
                    octave: j,
                    step: q,
                    sigma,
                    weight: w,
                });
            }
        }
        Ok(Self {
            octaves,
            per_octave,
            nodes,
        })
    }

    pub fn standard() -> Self {
        Self::new(5, 4).unwrap()
    }

    /// The deepest ladder with `per_octave` steps that `grid` resolves.
    pub fn resolving(grid: &SpatialGrid, per_octave: usize) -> Result<Self> {
        let mut best = None;
        for octaves in 1..=40 {
            let ladder = Self::new(octaves, per_octave)?;
            if ladder.check_resolvable(grid).is_err() {
                break;
            }
            best = Some(ladder);
        }
        best.ok_or_else(|| {
            Error::Resolution(format!(
                "grid with Nyquist {} resolves no ladder",
                grid.nyquist()
            ))
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn finest(&self) -> f64 {
        self.nodes.last().map_or(1.0, |n| n.sigma)
    }

    /// The finest annulus must start below the Nyquist frequency.
    pub fn check_resolvable(&self, grid: &SpatialGrid) -> Result<()> {
        let inner = 0.5 / self.finest();
        if inner >= grid.nyquist() {
            return Err(Error::Resolution(format!(
                "ladder with J = {} needs |xi| up to {inner:.3}, grid Nyquist is {:.3}",
                self.octaves,
                grid.nyquist()
            )));
        }
        Ok(())
    }

    /// Weight of the low band in `sigma^{-2s}`-weighted sums: the one-point
    /// rule for `int_1^e sigma^{-2s} dsigma/sigma` at `LOW_SIGMA`, matching
    /// the factor used by [`PhaseSpaceField::scale_powers`].
    pub fn low_weight(s: f64) -> f64 {
        LOW_SIGMA.powf(-2.0 * s)
    }
}

/// Which part of `W` to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Part {
    Full,
    Low,
    High,
}

impl Part {
    fn low(self) -> bool {
        self != Part::High
    }

    fn high(self) -> bool {
        self != Part::Low
    }
}

const PS_MAGIC: &[u8] = b"FIOPS1";

/// Samples of a function on `S*R^n x (0, inf)`: one direction-independent
/// low-band slice and one slice per (ladder node, direction).
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpaceField {
    pub grid: SpatialGrid,
    pub ladder: ScaleLadder,
    pub directions: usize,
    pub low: Vec<Complex64>,
    /// Slice of node `i` and direction `k` at `high[i * directions + k]`.
    pub high: Vec<Vec<Complex64>>,
}

impl PhaseSpaceField {
    pub fn zeros(grid: SpatialGrid, ladder: ScaleLadder, directions: usize) -> Self {
        let zero = vec![Complex64::new(0.0, 0.0); grid.len()];
        let high = vec![zero.clone(); ladder.len() * directions];
        Self {
            grid,
            ladder,
            directions,
            low: zero,
            high,
        }
    }

    /// Independent standard normal samples in every slot.
    pub fn random(grid: SpatialGrid, ladder: ScaleLadder, directions: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sample = |len: usize| -> Vec<Complex64> {
            (0..len)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect()
        };
        let low = sample(grid.len());
        let high = (0..ladder.len() * directions)
            .map(|_| sample(grid.len()))
            .collect();
        Self {
            grid,
            ladder,
            directions,
            low,
            high,
        }
    }

    pub fn slice(&self, node: usize, k: usize) -> &[Complex64] {
        &self.high[node * self.directions + k]
    }

    pub fn slice_mut(&mut self, node: usize, k: usize) -> &mut Vec<Complex64> {
        &mut self.high[node * self.directions + k]
    }

    fn check_shape(&self, other: &PhaseSpaceField) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.ladder != other.ladder || self.directions != other.directions {
            return Err(Error::InvalidInput(
                "phase-space fields have different ladders or directions".into(),
            ));
        }
        Ok(())
    }

    /// `<F, G>` with weights `h^n`, `1/M` and the ladder weights; the low
    /// band has weight 1.
    pub fn inner(&self, other: &PhaseSpaceField) -> Result<Complex64> {
        self.check_shape(other)?;
        let dot = |a: &[Complex64], b: &[Complex64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x * y.conj())
                .sum::<Complex64>()
        };
        let mut acc = dot(&self.low, &other.low);
        let wk = 1.0 / self.directions as f64;
        for (i, node) in self.ladder.nodes.iter().enumerate() {
            for k in 0..self.directions {
                acc += dot(self.slice(i, k), other.slice(i, k)) * (node.weight * wk);
            }
        }
        Ok(acc * self.grid.cell())
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self).map(|c| c.re).unwrap_or(f64::NAN)
    }

    pub fn scale(&self, c: Complex64) -> PhaseSpaceField {
        let mut out = self.clone();
        out.low.iter_mut().for_each(|v| *v *= c);
        out.high.iter_mut().flatten().for_each(|v| *v *= c);
        out
    }

    pub fn add(&self, other: &PhaseSpaceField) -> Result<PhaseSpaceField> {
        self.check_shape(other)?;
        let mut out = self.clone();
        out.low
            .iter_mut()
            .zip(&other.low)
            .for_each(|(a, b)| *a += b);
        for (a, b) in out.high.iter_mut().zip(&other.high) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(out)
    }

    /// Multiplies node `i` by `sigma_i^s` and the low band by `LOW_SIGMA^s`.
    pub fn scale_powers(&self, s: f64) -> PhaseSpaceField {
        let mut out = self.clone();
        let c = LOW_SIGMA.powf(s);
        out.low.iter_mut().for_each(|v| *v *= c);
        for (i, node) in self.ladder.nodes.iter().enumerate() {
            let c = node.sigma.powf(s);
            for k in 0..self.directions {
                out.slice_mut(i, k).iter_mut().for_each(|v| *v *= c);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.low
            .iter()
            .chain(self.high.iter().flatten())
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(PS_MAGIC)?;
        grid::write_header(&mut w, &self.grid)?;
        for v in [self.ladder.octaves, self.ladder.per_octave, self.directions] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        grid::write_samples(&mut w, &self.low)?;
        for s in &self.high {
            grid::write_samples(&mut w, s)?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<PhaseSpaceField> {
        grid::expect_magic(&mut r, PS_MAGIC)?;
        let grid = grid::read_header(&mut r)?;
        let octaves = grid::read_u64(&mut r)? as usize;
        let per_octave = grid::read_u64(&mut r)? as usize;
        let directions = grid::read_u64(&mut r)? as usize;
        let ladder =
            ScaleLadder::new(octaves, per_octave).map_err(|e| Error::Format(e.to_string()))?;
        if directions == 0 {
            return Err(Error::Format("zero directions".into()));
        }
        let low = grid::read_samples(&mut r, grid.len())?;
        let mut high = Vec::with_capacity(ladder.len() * directions);
        for _ in 0..ladder.len() * directions {
            high.push(grid::read_samples(&mut r, grid.len())?);
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)
            .map_err(|e| Error::Format(e.to_string()))?
            != 0
        {
            return Err(Error::Format(
                "trailing bytes after phase-space samples".into(),
            ));
        }
        Ok(Self {
            grid,
            ladder,
            directions,
            low,
            high,
        })
    }

    pub fn save(&self, path: &str) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &str) -> Result<PhaseSpaceField> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

/// Something that can hand out phase-space slices one ladder node at a time.
pub trait PhaseSpaceSource: Sync {
    fn grid(&self) -> SpatialGrid;
    fn ladder(&self) -> &ScaleLadder;
    fn directions(&self) -> usize;
    /// The low-band slice, `None` when identically zero.
    fn low_slice(&self) -> Result<Option<Vec<Complex64>>>;
    /// Slices of one node, one per direction, `None` when identically zero.
    fn node_slices(&self, node: usize) -> Result<Vec<Option<Vec<Complex64>>>>;
}

fn nonzero(v: &[Complex64]) -> bool {
    v.iter().any(|c| c.re != 0.0 || c.im != 0.0)
}

impl PhaseSpaceSource for PhaseSpaceField {
    fn grid(&self) -> SpatialGrid {
        self.grid
    }

    fn ladder(&self) -> &ScaleLadder {
        &self.ladder
    }

    fn directions(&self) -> usize {
        self.directions
    }

    fn low_slice(&self) -> Result<Option<Vec<Complex64>>> {
        Ok(nonzero(&self.low).then(|| self.low.clone()))
    }

    fn node_slices(&self, node: usize) -> Result<Vec<Option<Vec<Complex64>>>> {
        Ok((0..self.directions)
            .map(|k| {
                let s = self.slice(node, k);
                nonzero(s).then(|| s.to_vec())
            })
            .collect())
    }
}

/// The wave packet transform on one grid, direction set and ladder.
pub struct WaveTransform {
    family: Arc<PacketFamily>,
    ladder: ScaleLadder,
    gram: OnceLock<Vec<f64>>,
}

impl WaveTransform {
    pub fn new(family: Arc<PacketFamily>, ladder: ScaleLadder) -> Result<Self> {
        ladder.check_resolvable(family.grid())?;
        Ok(Self {
            family,
            ladder,
            gram: OnceLock::new(),
        })
    }

    pub fn family(&self) -> &PacketFamily {
        &self.family
    }

    pub fn ladder(&self) -> &ScaleLadder {
        &self.ladder
    }

    pub fn grid(&self) -> SpatialGrid {
        *self.family.grid()
    }

    pub fn directions(&self) -> usize {
        self.family.directions().len()
    }

    fn direction_weight(&self, k: usize) -> f64 {
        self.family.directions().weights[k]
    }

    /// Lazy `W f` (or `theta(D) f` slices for `SymbolKind::Theta`).
    pub fn source(&self, f: &GridField, kind: SymbolKind, part: Part) -> Result<Analysis<'_>> {
        self.grid().check_same(&f.grid)?;
        if kind == SymbolKind::ThetaTilde {
            return Err(Error::Unsupported("theta~ slices".into()));
        }
        let spectrum = grid::to_spectrum(f)?.coeffs;
        Ok(Analysis {
            transform: self,
            spectrum,
            kind,
            part,
        })
    }

    /// `W f`, `W_l f` or `W_h f` with every slice materialized.
    pub fn analyze(&self, f: &GridField, part: Part) -> Result<PhaseSpaceField> {
        let src = self.source(f, SymbolKind::Psi, part)?;
        let grid = self.grid();
        let m = self.directions();
        let mut out = PhaseSpaceField::zeros(grid, self.ladder.clone(), m);
        if let Some(low) = src.low_slice()? {
            out.low = low;
        }
        for i in 0..self.ladder.len() {
            for (k, s) in src.node_slices(i)?.into_iter().enumerate() {
                if let Some(s) = s {
                    *out.slice_mut(i, k) = s;
                }
            }
        }
        Ok(out)
    }

    /// `V G = sum_{sigma, nu} w psi_{nu,sigma}(D) G(., nu, sigma) + rho(D) G_low`.
    pub fn synthesize(&self, field: &PhaseSpaceField) -> Result<GridField> {
        let grid = self.grid();
        grid.check_same(&field.grid)?;
        if field.ladder != self.ladder || field.directions != self.directions() {
            return Err(Error::InvalidInput(
                "phase-space field does not match the transform".into(),
            ));
        }
        let rho = self.family.rho()?;
        let mut low = field.low.clone();
        grid::forward_in_place(&grid, &mut low);
        let mut acc: Vec<Complex64> = low.iter().zip(rho).map(|(c, r)| c * r).collect();
        for (i, node) in self.ladder.nodes.iter().enumerate() {
            let parts: Vec<Vec<Complex64>> = (0..self.directions())
                .into_par_iter()
                .map(|k| -> Result<Vec<Complex64>> {
                    let mut spec = field.slice(i, k).to_vec();
                    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
                    if nonzero(&spec) {
                        grid::forward_in_place(&grid, &mut spec);
                        let sym = self.family.psi(k, node.sigma)?;
                        sym.accumulate(&spec, node.weight * self.direction_weight(k), &mut out);
                    }
                    Ok(out)
                })
                .collect::<Result<_>>()?;
            for p in parts {
                acc.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
            }
        }
        grid::from_spectrum(&SpectralField::new(grid, acc)?)
    }

    /// `sum_{sigma, nu} w |psi_{nu,sigma}|^2 + rho^2` over the lattice: the
    /// symbol of `V W`.
    pub fn gram_symbol(&self) -> Result<&[f64]> {
        if let Some(g) = self.gram.get() {
            return Ok(g);
        }
        let mut g: Vec<f64> = self.family.rho()?.iter().map(|r| r * r).collect();
        for node in &self.ladder.nodes {
            for k in 0..self.directions() {
                let sym = self.family.psi(k, node.sigma)?;
                let w = node.weight * self.direction_weight(k);
                for (&i, &v) in sym.idx.iter().zip(&sym.val) {
                    g[i as usize] += w * v * v;
                }
            }
        }
        Ok(self.gram.get_or_init(|| g))
    }

    /// `V W f`, evaluated as one multiplier.
    pub fn reconstruct(&self, f: &GridField) -> Result<GridField> {
        self.grid().check_same(&f.grid)?;
        let gram = self.gram_symbol()?;
        let spec = grid::to_spectrum(f)?;
        grid::from_spectrum(&spec.times_real(gram))
    }

    /// `|W f|^2` in the discrete `L^2` of phase space, by Parseval.
    pub fn phase_norm_sq(&self, f: &GridField) -> Result<f64> {
        self.grid().check_same(&f.grid)?;
        let gram = self.gram_symbol()?;
        let spec = grid::to_spectrum(f)?;
        let s: f64 = spec
            .coeffs
            .iter()
            .zip(gram)
            .map(|(c, g)| c.norm_sqr() * g)
            .sum();
        Ok(s * grid::spectral_measure(&f.grid))
    }

    /// `| |Wf|^2 - |f|^2 | / |f|^2`.
    pub fn isometry_defect(&self, f: &GridField) -> Result<f64> {
        let base = f.l2_norm().powi(2);
        if base == 0.0 {
            return Err(Error::UndefinedRatio(
                "isometry defect of the zero field".into(),
            ));
        }
        Ok((self.phase_norm_sq(f)? - base).abs() / base)
    }
}

/// `W f` (or its `theta` variant) computed slice by slice on demand.
pub struct Analysis<'a> {
    transform: &'a WaveTransform,
    spectrum: Vec<Complex64>,
    kind: SymbolKind,
    part: Part,
}

impl Analysis<'_> {
    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    pub fn part(&self) -> Part {
        self.part
    }
}

impl PhaseSpaceSource for Analysis<'_> {
    fn grid(&self) -> SpatialGrid {
        self.transform.grid()
    }

    fn ladder(&self) -> &ScaleLadder {
        &self.transform.ladder
    }

    fn directions(&self) -> usize {
        self.transform.directions()
    }

    fn low_slice(&self) -> Result<Option<Vec<Complex64>>> {
        if !self.part.low() || self.kind != SymbolKind::Psi {
            return Ok(None);
        }
        let rho = self.transform.family.rho()?;
        let mut data: Vec<Complex64> = self.spectrum.iter().zip(rho).map(|(c, r)| c * r).collect();
        if !nonzero(&data) {
            return Ok(None);
        }
        grid::inverse_in_place(&self.grid(), &mut data);
        Ok(Some(data))
    }

    fn node_slices(&self, node: usize) -> Result<Vec<Option<Vec<Complex64>>>> {
        let m = self.directions();
        if !self.part.high() {
            return Ok(vec![None; m]);
        }
        let sigma = self.transform.ladder.nodes[node].sigma;
        let grid = self.grid();
        (0..m)
            .into_par_iter()
            .map(|k| {
                let sym = self.transform.family.symbol(self.kind, k, sigma)?;
                if !sym.idx.iter().any(|&i| {
                    let c = self.spectrum[i as usize];
                    c.re != 0.0 || c.im != 0.0
                }) {
                    return Ok(None);
                }
                let mut data = vec![Complex64::new(0.0, 0.0); grid.len()];
                sym.apply(&self.spectrum, &mut data);
                grid::inverse_in_place(&grid, &mut data);
                Ok(Some(data))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DirectionSet;
    use std::f64::consts::PI;

    fn transform(size: usize, m: usize, j: usize, q: usize) -> WaveTransform {
        transform_on(size, 2.0 * PI, m, j, q)
    }

    fn transform_on(size: usize, length: f64, m: usize, j: usize, q: usize) -> WaveTransform {
        let grid = SpatialGrid::new(2, size, length).unwrap();
        let fam = Arc::new(PacketFamily::new(grid, DirectionSet::new(2, m).unwrap()).unwrap());
        WaveTransform::new(fam, ScaleLadder::new(j, q).unwrap()).unwrap()
    }

    fn low_field(grid: SpatialGrid) -> GridField {
        let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
        spec[0] = Complex64::new(1.0, 0.0);
        spec[1] = Complex64::new(0.0, 0.5);
        grid::from_spectrum(&SpectralField::new(grid, spec).unwrap()).unwrap()
    }

    #[test]
    fn ladder_nodes_and_weights() {
        let l = ScaleLadder::new(3, 4).unwrap();
        assert_eq!(l.len(), 12);
        for j in 0..3 {
            let w: f64 = l
                .nodes
                .iter()
                .filter(|n| n.octave == j)
                .map(|n| n.weight)
                .sum();
            assert!((w - std::f64::consts::LN_2).abs() < 1e-15);
        }
        assert!(l
            .nodes
            .iter()
            .all(|n| n.sigma < 1.0 && n.sigma > 2f64.powi(-3)));
        assert!((ScaleLadder::low_weight(0.0) - 1.0).abs() < 1e-15);
        assert!(ScaleLadder::new(0, 4).is_err());
    }

    #[test]
    fn unresolvable_ladder_is_refused() {
        let grid = SpatialGrid::new(2, 32, 2.0 * PI).unwrap();
        let fam = Arc::new(PacketFamily::new(grid, DirectionSet::new(2, 16).unwrap()).unwrap());
        assert!(matches!(
            WaveTransform::new(fam, ScaleLadder::new(6, 2).unwrap()),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn low_frequency_field_has_no_high_part() {
        // lattice spacing 1/2 in frequency, so index 1 sits at |xi| = 1/2
        let t = transform_on(32, 4.0 * PI, 16, 3, 2);
        let f = low_field(t.grid());
        let w = t.analyze(&f, Part::Full).unwrap();
        assert!(w.high.iter().flatten().all(|c| c.norm() < 1e-14));
        let err: f64 = w
            .low
            .iter()
            .zip(&f.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
        assert!(t.isometry_defect(&f).unwrap() <= 1e-10);
    }

    #[test]
    fn full_is_low_plus_high() {
        let t = transform(32, 16, 3, 2);
        let f = GridField::from_fn(t.grid(), |x| {
            Complex64::new((-(x[0] * x[0] + x[1] * x[1]) * 4.0).exp(), 0.0)
        });
        let full = t.analyze(&f, Part::Full).unwrap();
        let sum = t
            .analyze(&f, Part::Low)
            .unwrap()
            .add(&t.analyze(&f, Part::High).unwrap())
            .unwrap();
        assert_eq!(full, sum);
    }

    #[test]
    fn synthesis_of_zero_is_zero() {
        let t = transform(32, 16, 3, 2);
        let z = PhaseSpaceField::zeros(t.grid(), t.ladder().clone(), 16);
        assert!(t
            .synthesize(&z)
            .unwrap()
            .values
            .iter()
            .all(|c| c.norm() == 0.0));
    }

    #[test]
    fn streaming_matches_materialized() {
        let t = transform(32, 16, 3, 2);
        let f = GridField::from_fn(t.grid(), |x| {
            Complex64::new((-(x[0] * x[0] + x[1] * x[1]) * 3.0).exp(), x[0])
        });
        let w = t.analyze(&f, Part::Full).unwrap();
        assert!((w.norm_sq() - t.phase_norm_sq(&f).unwrap()).abs() < 1e-10 * w.norm_sq());
        let direct = t.synthesize(&w).unwrap();
        let fast = t.reconstruct(&f).unwrap();
        assert!(direct.rel_l2_error(&fast) < 1e-12);
    }

    #[test]
    fn field_file_round_trip() {
        let grid = SpatialGrid::new(2, 8, 2.0 * PI).unwrap();
        let f = PhaseSpaceField::random(grid, ScaleLadder::new(1, 2).unwrap(), 4, 3);
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..6], b"FIOPS1");
        assert_eq!(PhaseSpaceField::read_from(&buf[..]).unwrap(), f);
        assert!(matches!(
            PhaseSpaceField::read_from(&buf[..buf.len() - 1]),
            Err(Error::Format(_))
        ));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(matches!(
            PhaseSpaceField::read_from(&extra[..]),
            Err(Error::Format(_))
        ));
    }
}
