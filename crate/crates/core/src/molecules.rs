//! Coherent `H^p_FIO` molecules: validation of the support and decay
//! conditions, construction from wave packets and the `l^p` synthesis bound.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ball_volume_estimate, quasi_distance_sq, Direction};
use crate::grid::{self, dot, norm, GridField, Point, SpatialGrid, MAX_DIM};
use crate::packets::PacketFamily;
use crate::spaces::FunctionSpaces;
use crate::tent::{VOLUME_SAMPLES, VOLUME_SEED};
use crate::transform::{Part, WaveTransform};

/// Default largest molecule scale.
pub const TAU_MAX: f64 = 8.0;
/// Relative floor for Fourier coefficients outside the cone.
pub const SUPPORT_FLOOR: f64 = 1e-10;
/// Fraction of the decay bound a packet molecule is scaled to.
pub const SATURATION: f64 = 0.75;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MoleculeSpec {
    pub center: Point,
    pub direction: Direction,
    pub tau: f64,
    pub order: f64,
    pub p: f64,
    pub tau_max: f64,
}

impl MoleculeSpec {
    pub fn new(center: Point, direction: Direction, tau: f64, order: f64, p: f64) -> Result<Self> {
        let spec = Self {
            center,
            direction,
            tau,
            order,
            p,
            tau_max: TAU_MAX,
        };
        spec.validate(2)?;
        Ok(spec)
    }

    /// The same spec with its center moved to the nearest grid point.
    pub fn snapped(&self, grid: &SpatialGrid) -> Self {
        Self {
            center: grid.point(grid.nearest_index(&self.center)),
            ..*self
        }
    }

    /// The smallest integer decay order above `2n(2/p - 1)`.
    pub fn minimal_order(n: usize, p: f64) -> f64 {
        (2.0 * n as f64 * (2.0 / p - 1.0)).ceil() + 1.0
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::Parameter(format!(
                "molecule exponent {} outside (0, 1]",
                self.p
            )));
        }
        if !(self.tau > 0.0 && self.tau <= self.tau_max) {
            return Err(Error::Parameter(format!(
                "molecule scale {} outside (0, {}]",
                self.tau, self.tau_max
            )));
        }
        let floor = 2.0 * n as f64 * (2.0 / self.p - 1.0);
        if !(self.order > floor) {
            return Err(Error::Parameter(format!(
                "decay order {} must exceed {floor}",
                self.order
            )));
        }
        Ok(())
    }

    /// `|B_{sqrt(tau)}|^{-(2/p - 1)}`.
    pub fn bound(&self, n: usize) -> Result<(f64, f64)> {
        let volume = ball_volume_estimate(n, self.tau.sqrt(), VOLUME_SAMPLES, VOLUME_SEED)?.value;
        Ok((volume.powf(-(2.0 / self.p - 1.0)), volume))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MoleculeReport {
    pub tau: f64,
    pub order: f64,
    pub p: f64,
    /// Largest Fourier coefficient outside the cone over the peak coefficient.
    pub support_ratio: f64,
    pub support_floor: f64,
    pub support_ok: bool,
    /// `int (1 + tau^{-1} d((x, nu), (y, nu))^2)^N |f(x)|^2 dx`.
    pub weighted: f64,
    pub bound: f64,
    pub volume: f64,
    /// `bound / weighted`; infinite for the zero field.
    pub margin: f64,
    pub decay_ok: bool,
    pub valid: bool,
}

fn in_cone(xi: &Point, nu: &Direction, tau: f64) -> bool {
    let r = norm(xi);
    if r < 1.0 / tau {
        return false;
    }
    let unit = xi.map(|c| c / r);
    let d = [unit[0] - nu.v[0], unit[1] - nu.v[1], unit[2] - nu.v[2]];
    norm(&d) <= tau.sqrt()
}

/// Checks the lattice Fourier support against the cone
/// `|xi| >= 1/tau, |xi^ - nu| <= sqrt(tau)` and the weighted decay bound.
pub fn molecule_validate(f: &GridField, spec: &MoleculeSpec) -> Result<MoleculeReport> {
    let g = f.grid;
    spec.validate(g.n)?;
    let spectrum = grid::to_spectrum(f)?;
    let mut peak = 0.0f64;
    let mut outside = 0.0f64;
    for (i, c) in spectrum.coeffs.iter().enumerate() {
        let a = c.norm();
        peak = peak.max(a);
        if !in_cone(&g.frequency(i), &spec.direction, spec.tau) {
            outside = outside.max(a);
        }
    }
    let support_ratio = if peak == 0.0 { 0.0 } else { outside / peak };
    let weighted = weighted_energy(f, spec);
    let (bound, volume) = spec.bound(g.n)?;
    let margin = if weighted == 0.0 {
        f64::INFINITY
    } else {
        bound / weighted
    };
    let support_ok = support_ratio <= SUPPORT_FLOOR;
    let decay_ok = weighted <= bound;
    Ok(MoleculeReport {
        tau: spec.tau,
        order: spec.order,
        p: spec.p,
        support_ratio,
        support_floor: SUPPORT_FLOOR,
        support_ok,
        weighted,
        bound,
        volume,
        margin,
        decay_ok,
        valid: support_ok && decay_ok,
    })
}

fn weighted_energy(f: &GridField, spec: &MoleculeSpec) -> f64 {
    let g = f.grid;
    let nu = &spec.direction;
    f.values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.re != 0.0 || v.im != 0.0)
        .map(|(i, v)| {
            let z = g.periodic_diff(&g.point(i), &spec.center);
            (1.0 + quasi_distance_sq(&z, nu, nu) / spec.tau).powf(spec.order) * v.norm_sqr()
        })
        .sum::<f64>()
        * g.cell()
}

/// `F^{-1} psi_{nu, tau/4}` translated to the grid point nearest `y` and
/// scaled so the weighted energy is `SATURATION` times the bound.
pub fn molecule_from_packet(family: &PacketFamily, spec: &MoleculeSpec) -> Result<GridField> {
    let g = *family.grid();
    spec.validate(g.n)?;
    let sigma = spec.tau / 4.0;
    if 2.0 / sigma >= g.nyquist() {
        return Err(Error::Resolution(format!(
            "molecule scale {} needs frequencies up to {} beyond the Nyquist frequency {}",
            spec.tau,
            2.0 / sigma,
            g.nyquist()
        )));
    }
    let symbol = family.psi_for(&spec.direction, sigma)?;
    let snapped = spec.snapped(&g);
    let y = snapped.center;
    let coeffs: Vec<Complex64> = symbol
        .to_dense(g.len())
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            if v == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(v, -dot(&g.frequency(i), &y))
            }
        })
        .collect();
    let packet = grid::from_spectrum(&grid::SpectralField::new(g, coeffs)?)?;
    let weighted = weighted_energy(&packet, &snapped);
    if weighted == 0.0 {
        return Err(Error::Resolution(format!(
            "packet at scale {sigma} has no lattice support"
        )));
    }
    let (bound, _) = spec.bound(g.n)?;
    Ok(packet.scale(Complex64::new((SATURATION * bound / weighted).sqrt(), 0.0)))
}

#[derive(Clone, Debug, Serialize)]
pub struct SynthesisReport {
    pub count: usize,
    pub p: f64,
    pub order: f64,
    pub tau_range: (f64, f64),
    pub seeds: Vec<u64>,
    /// `|sum a_k f_k|_{H^p_FIO} / (sum |a_k|^p)^{1/p}` per seed.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// Random molecules and coefficients for one seed.
pub fn random_molecules(
    family: &PacketFamily,
    count: usize,
    p: f64,
    order: f64,
    tau_range: (f64, f64),
    seed: u64,
) -> Result<Vec<(Complex64, GridField)>> {
    let g: SpatialGrid = *family.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut center = [0.0; MAX_DIM];
            for c in center.iter_mut().take(g.n) {
                *c = rng.gen_range(-0.5 * g.length..0.5 * g.length);
            }
            let direction = Direction::from_angle(rng.gen_range(0.0..std::f64::consts::TAU));
            let tau = (rng.gen_range(tau_range.0.ln()..=tau_range.1.ln())).exp();
            let alpha = Complex64::from_polar(
                rng.gen_range(0.1..1.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            );
            let spec = MoleculeSpec::new(center, direction, tau, order, p)?;
            Ok((alpha, molecule_from_packet(family, &spec)?))
        })
        .collect()
}

/// `|sum a_k f_k|_{H^p_FIO} / (sum |a_k|^p)^{1/p}` for the given molecules.
pub fn synthesis_ratio(
    spaces: &FunctionSpaces,
    terms: &[(Complex64, GridField)],
    p: f64,
) -> Result<f64> {
    let first = terms
        .first()
        .ok_or_else(|| Error::InvalidInput("no molecules".into()))?;
    let mut sum = GridField::zeros(first.1.grid);
    for (a, f) in terms {
        sum = sum.add(&f.scale(*a));
    }
    let denom = terms
        .iter()
        .map(|(a, _)| a.norm().powf(p))
        .sum::<f64>()
        .powf(1.0 / p);
    Ok(spaces.hpfio(&sum, p, 0.0)?.value / denom)
}

/// Max over seeds of the synthesis ratio for `count` random molecules with
/// scales log-uniform in `tau_range`.
pub fn synthesis_experiment(
    spaces: &FunctionSpaces,
    count: usize,
    p: f64,
    order: f64,
    tau_range: (f64, f64),
    seeds: &[u64],
) -> Result<SynthesisReport> {
    if count == 0 || seeds.is_empty() {
        return Err(Error::Parameter(
            "synthesis needs at least one molecule and one seed".into(),
        ));
    }
    if !(tau_range.0 > 0.0 && tau_range.0 <= tau_range.1) {
        return Err(Error::Parameter(format!("bad scale range {tau_range:?}")));
    }
    let ratios = seeds
        .iter()
        .map(|&seed| {
            synthesis_ratio(
                spaces,
                &random_molecules(spaces.family(), count, p, order, tau_range, seed)?,
                p,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthesisReport {
        count,
        p,
        order,
        tau_range,
        seeds: seeds.to_vec(),
        max_ratio: ratios.iter().cloned().fold(0.0, f64::max),
        ratios,
    })
}

/// `|f - V W_h f - rho(D)^2 f| / |f|`.
pub fn reconstruction_residue(transform: &WaveTransform, f: &GridField) -> Result<f64> {
    let high = transform.synthesize(&transform.analyze(f, Part::High)?)?;
    let rho = transform.family().rho()?;
    let spec = grid::to_spectrum(f)?;
    let low =
        grid::from_spectrum(&spec.times_real(&rho.iter().map(|r| r * r).collect::<Vec<_>>()))?;
    let base = f.l2_norm();
    if base == 0.0 {
        return Err(Error::UndefinedRatio("residue of the zero field".into()));
    }
    Ok(f.sub(&high).sub(&low).l2_norm() / base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DirectionSet;
    use std::f64::consts::PI;

    fn family(size: usize) -> PacketFamily {
        let g = SpatialGrid::new(2, size, 2.0 * PI).unwrap();
        PacketFamily::new(g, DirectionSet::new(2, 16).unwrap()).unwrap()
    }

    fn spec(tau: f64, p: f64) -> MoleculeSpec {
        MoleculeSpec::new(
            [0.3, -0.7, 0.0],
            Direction::from_angle(0.4),
            tau,
            MoleculeSpec::minimal_order(2, p),
            p,
        )
        .unwrap()
    }

    #[test]
    fn spec_invariants() {
        assert_eq!(MoleculeSpec::minimal_order(2, 2.0 / 3.0), 9.0);
        assert!(
            MoleculeSpec::new([0.0; 3], Direction::from_angle(0.0), 9.0, 9.0, 2.0 / 3.0).is_err()
        );
        assert!(
            MoleculeSpec::new([0.0; 3], Direction::from_angle(0.0), 1.0, 8.0, 2.0 / 3.0).is_err()
        );
        assert!(MoleculeSpec::new([0.0; 3], Direction::from_angle(0.0), 1.0, 9.0, 1.5).is_err());
    }

    #[test]
    fn zero_field_is_a_molecule() {
        let fam = family(32);
        let r = molecule_validate(&GridField::zeros(*fam.grid()), &spec(1.0, 1.0)).unwrap();
        assert!(r.valid && r.margin.is_infinite());
    }

    #[test]
    fn packet_molecules_validate_and_scaling_breaks_decay() {
        let fam = family(64);
        for (tau, p) in [(0.5, 2.0 / 3.0), (1.0, 1.0), (2.0, 0.5)] {
            let s = spec(tau, p).snapped(fam.grid());
            let f = molecule_from_packet(&fam, &s).unwrap();
            let r = molecule_validate(&f, &s).unwrap();
            assert!(r.valid, "{r:?}");
            assert!((r.weighted / r.bound - SATURATION).abs() < 1e-12);
            let big = molecule_validate(&f.scale(Complex64::new(10.0, 0.0)), &s).unwrap();
            assert!(!big.decay_ok && big.support_ok);
            assert!((r.margin / big.margin - 100.0).abs() < 1e-9);
            let lower = MoleculeSpec {
                order: s.order - 1.0,
                ..s
            };
            if lower.validate(2).is_ok() {
                assert!(molecule_validate(&f, &lower).unwrap().valid);
            }
        }
    }

    #[test]
    fn off_cone_spectrum_is_rejected() {
        let fam = family(64);
        let s = spec(1.0, 1.0);
        let f = molecule_from_packet(&fam, &s).unwrap();
        let turned = MoleculeSpec {
            direction: Direction::from_angle(0.4 + PI),
            ..s
        };
        let r = molecule_validate(&f, &turned).unwrap();
        assert!(!r.support_ok && r.support_ratio > 0.5);
    }

    #[test]
    fn translated_centers_translate_fields() {
        let fam = family(32);
        let g = *fam.grid();
        let a = spec(1.0, 1.0);
        let y = g.point(g.nearest_index(&a.center));
        let shifted = [y[0] + 3.0 * g.h(), y[1] - 2.0 * g.h(), 0.0];
        let b = MoleculeSpec {
            center: shifted,
            ..a
        };
        let fa = molecule_from_packet(&fam, &a).unwrap();
        let fb = molecule_from_packet(&fam, &b).unwrap();
        assert!(fa.translate(&[3, -2]).rel_l2_error(&fb) < 1e-12);
    }

    #[test]
    fn unresolvable_scales_are_refused() {
        let fam = family(32);
        assert!(matches!(
            molecule_from_packet(&fam, &spec(0.25, 1.0)),
            Err(Error::Resolution(_))
        ));
    }
}
