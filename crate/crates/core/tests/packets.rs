use std::f64::consts::PI;

use fio_hardy::geometry::{Direction, DirectionSet};
use fio_hardy::grid::{self, GridField, SpatialGrid, SpectralField};
use fio_hardy::packets::{AngularBump, PacketFamily, SymbolKind};
use fio_hardy::quad::loglog_slope;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn family(size: usize, m: usize) -> PacketFamily {
    let grid = SpatialGrid::new(2, size, 2.0 * PI).unwrap();
    PacketFamily::new(grid, DirectionSet::new(2, m).unwrap()).unwrap()
}

// midpoint rule on the circle, independent of the library quadrature
fn brute_c_sigma(bump: &AngularBump, sigma: f64) -> f64 {
    let steps = 400_000;
    let mut s = 0.0;
    for i in 0..steps {
        let th = -PI + (i as f64 + 0.5) * 2.0 * PI / steps as f64;
        let chord = 2.0 * (th / 2.0).sin().abs();
        s += bump.eval(chord / sigma.sqrt()).powi(2);
    }
    (s / steps as f64).powf(-0.5)
}

#[test]
fn packet_constant_matches_brute_force_and_scales() {
    let fam = family(32, 8);
    let sigmas: Vec<f64> = (3..=7).map(|k| 2f64.powi(-k)).collect();
    let mut cs = Vec::new();
    for &s in &sigmas {
        let c = fam.c_sigma(s).unwrap();
        let brute = brute_c_sigma(fam.bump(), s);
        assert!((c - brute).abs() < 1e-6 * brute, "{c} vs {brute}");
        cs.push(brute);
    }
    let slope = loglog_slope(&sigmas, &cs);
    assert!((slope + 0.25).abs() < 0.05, "slope {slope}");
}

#[test]
fn phi_omega_peak_growth() {
    let fam = family(256, 64);
    let omega = Direction::e(0);
    let radii: Vec<f64> = (1..=6).map(|j| 2f64.powi(j)).collect();
    let peaks: Vec<f64> = radii
        .iter()
        .map(|&r| {
            (0..64)
                .map(|i| {
                    let rr = r * 2f64.powf(i as f64 / 64.0 - 0.5);
                    fam.phi_omega_at(&omega, &[rr, 0.0, 0.0])
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let slope = loglog_slope(&radii, &peaks);
    assert!((slope - 0.25).abs() < 0.1, "slope {slope}");
}

#[test]
fn m_growth() {
    let fam = family(256, 64);
    let radii: Vec<f64> = (0..=40)
        .map(|i| 2f64.powf(1.0 + 5.0 * i as f64 / 40.0))
        .collect();
    let m: Vec<f64> = radii.iter().map(|&r| fam.m_value(r)).collect();
    let slope = loglog_slope(&radii, &m);
    assert!((slope - 0.25).abs() < 0.05, "slope {slope}");
}

fn high_band_field(grid: SpatialGrid, seed: u64, lo: f64, hi: f64) -> GridField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = (0..grid.len())
        .map(|i| {
            let r = grid::norm(&grid.frequency(i));
            if r >= lo && r <= hi {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    grid::from_spectrum(&SpectralField::new(grid, coeffs).unwrap()).unwrap()
}

#[test]
fn reproducing_identity_on_high_frequencies() {
    let fam = family(64, 64);
    for seed in 0..3 {
        let f = high_band_field(*fam.grid(), seed, 1.0, 16.0);
        let g = fam.reproduce(&f).unwrap();
        let err = g.rel_l2_error(&f);
        assert!(err <= 1e-3, "seed {seed}: {err}");
    }
}

#[test]
fn packet_peak_scaling_and_decay_constant() {
    let fam = family(256, 64);
    let sigmas: Vec<f64> = (3..=6).map(|k| 2f64.powi(-k)).collect();
    let mut peaks = Vec::new();
    let mut consts = Vec::new();
    let mut along = Vec::new();
    let mut across = Vec::new();
    for &s in &sigmas {
        let rep = fam.decay_check(SymbolKind::Psi, 0, s, 5.0, 200.0).unwrap();
        println!("{rep:?}");
        peaks.push(rep.peak);
        consts.push(rep.constant);
        along.push(rep.width_along);
        across.push(rep.width_across);
    }
    let slope = loglog_slope(&sigmas, &peaks);
    assert!((slope + 1.75).abs() < 0.1, "peak slope {slope}");
    let spread = |v: &[f64]| {
        v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    assert!(spread(&consts) <= 2.0, "C_5 spread {consts:?}");
    assert!(spread(&along) <= 2.0, "along {along:?}");
    assert!(spread(&across) <= 2.0, "across {across:?}");
    assert!(along
        .iter()
        .zip(&across)
        .all(|(a, b)| a.is_finite() && b.is_finite()));
}

#[test]
fn decay_constant_is_rotation_invariant() {
    let fam = family(256, 64);
    let s = 2f64.powi(-4);
    let a = fam.decay_check(SymbolKind::Psi, 0, s, 5.0, 200.0).unwrap();
    let b = fam.decay_check(SymbolKind::Psi, 16, s, 5.0, 200.0).unwrap();
    assert!(a.constant.is_finite() && a.constant > 0.0);
    let r = a.constant / b.constant;
    assert!((0.5..=2.0).contains(&r), "{} vs {}", a.constant, b.constant);
    let t = fam
        .decay_check(SymbolKind::Theta, 0, s, 5.0, 200.0)
        .unwrap();
    assert!(t.constant.is_finite() && t.constant > 0.0);
}
