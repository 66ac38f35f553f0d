//! Deterministic test fields and the fixed 20-field standard family.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Direction;
use crate::grid::{self, norm, GridField, SpatialGrid, SpectralField};
use crate::packets::{packet_constant, AngularBump, RadialProfile};
use crate::quad::smooth_step;

/// Frequency radius of the band-limited random fields.
pub const BAND_LIMIT: f64 = 16.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFieldKind {
    /// `exp(-|x|^2 / (2 w^2))` with `w` in `[0.35, 0.7]` drawn from the seed.
    GaussianBump,
    /// Random coefficients on `|xi| <= 16` with a smooth taper.
    BandLimitedRandom,
    /// `F^{-1} psi_{omega,sigma}`; `angle` is the direction of `omega` (n = 2),
    /// or `omega = e_1` when `n = 3`.
    CoherentPacket { angle: f64, sigma: f64 },
    /// `F^{-1} Psi(sigma |.|)`.
    RadialAnnulus { sigma: f64 },
}

impl TestFieldKind {
    pub fn label(&self) -> String {
        match self {
            TestFieldKind::GaussianBump => "gaussian-bump".into(),
            TestFieldKind::BandLimitedRandom => "band-limited-random".into(),
            TestFieldKind::CoherentPacket { angle, sigma } => {
                format!("coherent-packet({angle:.3},{sigma:.4})")
            }
            TestFieldKind::RadialAnnulus { sigma } => format!("radial-annulus({sigma:.4})"),
        }
    }
}

fn check_scale(grid: &SpatialGrid, sigma: f64) -> Result<()> {
    if !(sigma > 0.0) {
        return Err(Error::Parameter(format!("scale {sigma} must be positive")));
    }
    if 2.0 / sigma > grid.nyquist() {
        return Err(Error::Resolution(format!(
            "scale {sigma} reaches |xi| = {}, beyond Nyquist {}",
            2.0 / sigma,
            grid.nyquist()
        )));
    }
    Ok(())
}

fn normalized(f: GridField) -> Result<GridField> {
    let n = f.l2_norm();
    if !(n > 0.0) {
        return Err(Error::Construction(
            "test field vanished on the lattice".into(),
        ));
    }
    Ok(f.scale(Complex64::new(1.0 / n, 0.0)))
}

/// A unit-`L^2` test field, deterministic in `seed`.
pub fn make_test_field(grid: &SpatialGrid, kind: TestFieldKind, seed: u64) -> Result<GridField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        TestFieldKind::GaussianBump => {
            let w: f64 = rng.gen_range(0.35..=0.7);
            normalized(GridField::from_fn(*grid, |x| {
                let r2: f64 = x[..grid.n].iter().map(|c| c * c).sum();
                Complex64::new((-r2 / (2.0 * w * w)).exp(), 0.0)
            }))
        }
        TestFieldKind::BandLimitedRandom => {
            let coeffs = (0..grid.len())
                .map(|i| {
                    let a = rng.gen_range(-1.0..1.0);
                    let b = rng.gen_range(-1.0..1.0);
                    let r = norm(&grid.frequency(i));
                    Complex64::new(a, b)
                        * (1.0 - smooth_step((r - 0.75 * BAND_LIMIT) / (0.25 * BAND_LIMIT)))
                })
                .collect();
            normalized(grid::from_spectrum(&SpectralField::new(*grid, coeffs)?)?)
        }
        TestFieldKind::CoherentPacket { angle, sigma } => {
            check_scale(grid, sigma)?;
            if sigma >= 1.0 {
                return Err(Error::Parameter(format!(
                    "packet scale {sigma} outside (0, 1)"
                )));
            }
            let omega = if grid.n == 2 {
                Direction::from_angle(angle)
            } else {
                Direction::e(0)
            };
            let radial = RadialProfile::build()?;
            let bump = AngularBump::standard();
            let c = packet_constant(grid.n, &bump, sigma)?;
            let coeffs = (0..grid.len())
                .map(|i| {
                    let xi = grid.frequency(i);
                    let r = norm(&xi);
                    if r == 0.0 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let chord = omega.chord(&Direction {
                        v: xi.map(|c| c / r),
                    });
                    Complex64::new(
                        radial.eval(sigma * r) * c * bump.eval(chord / sigma.sqrt()),
                        0.0,
                    )
                })
                .collect();
            normalized(grid::from_spectrum(&SpectralField::new(*grid, coeffs)?)?)
        }
        TestFieldKind::RadialAnnulus { sigma } => {
            check_scale(grid, sigma)?;
            let p = RadialProfile::build()?;
            let coeffs = (0..grid.len())
                .map(|i| Complex64::new(p.eval(sigma * norm(&grid.frequency(i))), 0.0))
                .collect();
            normalized(grid::from_spectrum(&SpectralField::new(*grid, coeffs)?)?)
        }
    }
}

/// One member of the standard family.
#[derive(Clone, Debug, Serialize)]
pub struct FamilyMember {
    pub label: String,
    pub kind: TestFieldKind,
    pub seed: u64,
}

/// The fixed 20-field corpus: five each of gaussian bumps, band-limited
/// random fields, coherent packets with `sigma` in `[1/8, 1/2]` and radial
/// annuli with `sigma` in `[1/8, 1]`.
pub fn standard_members() -> Vec<FamilyMember> {
    let packet_sigmas = [0.5, 0.25, 0.125, 0.25, 0.125];
    let mut members = Vec::new();
    for seed in 0..5u64 {
        members.push(FamilyMember {
            label: String::new(),
            kind: TestFieldKind::GaussianBump,
            seed,
        });
    }
    for seed in 0..5u64 {
        members.push(FamilyMember {
            label: String::new(),
            kind: TestFieldKind::BandLimitedRandom,
            seed,
        });
    }
    for seed in 0..5u64 {
        let angle = 0.3 + seed as f64 * 2.0 * std::f64::consts::PI / 5.0;
        let kind = TestFieldKind::CoherentPacket {
            angle,
            sigma: packet_sigmas[seed as usize],
        };
        members.push(FamilyMember {
            label: String::new(),
            kind,
            seed,
        });
    }
    for seed in 0..5u64 {
        let kind = TestFieldKind::RadialAnnulus {
            sigma: 2f64.powf(-0.75 * seed as f64),
        };
        members.push(FamilyMember {
            label: String::new(),
            kind,
            seed,
        });
    }
    for m in &mut members {
        m.label = format!("{}#{}", m.kind.label(), m.seed);
    }
    members
}

/// The standard family realized on `grid`.
pub fn standard_family(grid: &SpatialGrid) -> Result<Vec<(FamilyMember, GridField)>> {
    standard_members()
        .into_iter()
        .map(|m| {
            let f = make_test_field(grid, m.kind, m.seed)?;
            Ok((m, f))
        })
        .collect()
}
