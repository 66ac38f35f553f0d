use std::f64::consts::PI;
use std::sync::Arc;

use fio_hardy::families::{make_test_field, standard_family, TestFieldKind};
use fio_hardy::geometry::DirectionSet;
use fio_hardy::grid::{GridField, SpatialGrid};
use fio_hardy::packets::PacketFamily;
use fio_hardy::transform::{Part, PhaseSpaceField, ScaleLadder, WaveTransform};

fn family(size: usize, m: usize) -> Arc<PacketFamily> {
    let grid = SpatialGrid::new(2, size, 2.0 * PI).unwrap();
    Arc::new(PacketFamily::new(grid, DirectionSet::new(2, m).unwrap()).unwrap())
}

#[test]
fn quadrature_error_and_reconstruction_refine_with_q() {
    let fam = family(128, 64);
    let fields = standard_family(fam.grid()).unwrap();
    let mut prev_sup = f64::INFINITY;
    let mut prev_err = vec![f64::INFINITY; fields.len()];
    for q in [4, 8, 16] {
        let t = WaveTransform::new(fam.clone(), ScaleLadder::new(5, q).unwrap()).unwrap();
        let gram = t.gram_symbol().unwrap();
        let sup = (0..fam.grid().len())
            .filter(|&i| {
                let r = fio_hardy::grid::norm(&fam.grid().frequency(i));
                r <= 16.0
            })
            .map(|i| (gram[i] - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(sup < prev_sup, "Q={q}: sup {sup} !< {prev_sup}");
        prev_sup = sup;
        for (i, (m, f)) in fields.iter().enumerate() {
            let d = t.isometry_defect(f).unwrap();
            let e = t.reconstruct(f).unwrap().rel_l2_error(f);
            assert!(d <= sup, "{}: defect {d} above symbol error {sup}", m.label);
            if q == 4 {
                assert!(e <= 1e-2, "{}: {e}", m.label);
            }
            assert!(e < prev_err[i], "{}: {e} !< {}", m.label, prev_err[i]);
            prev_err[i] = e;
        }
    }
}

#[test]
fn adjointness_on_random_pairs() {
    let fam = family(32, 16);
    let t = WaveTransform::new(fam.clone(), ScaleLadder::new(3, 2).unwrap()).unwrap();
    for seed in 0..5 {
        let f = make_test_field(fam.grid(), TestFieldKind::BandLimitedRandom, seed).unwrap();
        let g = PhaseSpaceField::random(*fam.grid(), t.ladder().clone(), 16, 100 + seed);
        let lhs = t.analyze(&f, Part::Full).unwrap().inner(&g).unwrap();
        let rhs = f.inner(&t.synthesize(&g).unwrap());
        assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm(), "{lhs} vs {rhs}");
    }
}

#[test]
fn coherent_packet_energy_is_concentrated() {
    let fam = family(128, 64);
    let t = WaveTransform::new(fam.clone(), ScaleLadder::new(5, 4).unwrap()).unwrap();
    let (angle, sigma0) = (0.7, 1.0 / 16.0);
    let f = make_test_field(
        fam.grid(),
        TestFieldKind::CoherentPacket {
            angle,
            sigma: sigma0,
        },
        0,
    )
    .unwrap();
    let w = t.analyze(&f, Part::Full).unwrap();
    let total = w.norm_sq();
    let omega0 = fio_hardy::geometry::Direction::from_angle(angle);
    let mut near = 0.0;
    for (i, node) in t.ladder().nodes.iter().enumerate() {
        if (node.sigma / sigma0).log2().abs() > 2.0 {
            continue;
        }
        for k in 0..64 {
            if fam.directions().dirs[k].chord(&omega0) <= 4.0 * sigma0.sqrt() {
                let e: f64 = w.slice(i, k).iter().map(|c| c.norm_sqr()).sum();
                near += e * node.weight / 64.0 * fam.grid().cell();
            }
        }
    }
    assert!(near / total >= 0.99, "fraction {}", near / total);
}

#[test]
fn linearity_of_analysis() {
    let fam = family(32, 16);
    let t = WaveTransform::new(fam.clone(), ScaleLadder::new(3, 2).unwrap()).unwrap();
    let f = make_test_field(fam.grid(), TestFieldKind::GaussianBump, 1).unwrap();
    let g = make_test_field(fam.grid(), TestFieldKind::BandLimitedRandom, 2).unwrap();
    let (a, b) = (
        num_complex::Complex64::new(2.0, -1.0),
        num_complex::Complex64::new(0.5, 3.0),
    );
    let combo = GridField::new(
        *fam.grid(),
        f.values
            .iter()
            .zip(&g.values)
            .map(|(x, y)| a * x + b * y)
            .collect(),
    )
    .unwrap();
    let lhs = t.analyze(&combo, Part::Full).unwrap();
    let rhs = t
        .analyze(&f, Part::Full)
        .unwrap()
        .scale(a)
        .add(&t.analyze(&g, Part::Full).unwrap().scale(b))
        .unwrap();
    let diff = lhs
        .add(&rhs.scale(num_complex::Complex64::new(-1.0, 0.0)))
        .unwrap()
        .norm_sq();
    assert!(diff <= 1e-24 * lhs.norm_sq());
}
