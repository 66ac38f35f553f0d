//! The quasi-metric on the cosphere bundle `R^n x S^{n-1}`, balls, direction
//! sets, Monte Carlo ball volumes and the maximal operators.

mod averager;
mod maximal;

pub use averager::{BallAverager, KernelMode, KernelStats};
pub(crate) use maximal::max_ratio;
pub use maximal::{
    diameter, dyadic_radii, kernel_domination_check, kernel_weighted_average, m_lambda,
    peak_maximal, peak_maximal_window, real_spectra, strided_outputs, DominationReport,
    PeakOptions,
};

use crate::error::{Error, Result};
use crate::grid::{dot, norm, Point, SpatialGrid, MAX_DIM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Direction {
    pub v: Point,
}

impl Direction {
    pub fn from_angle(theta: f64) -> Self {
        Direction {
            v: [theta.cos(), theta.sin(), 0.0],
        }
    }

    pub fn from_vector(v: &[f64]) -> Result<Self> {
        let mut p = [0.0; MAX_DIM];
        p[..v.len()].copy_from_slice(v);
        let r = norm(&p);
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidInput(
                "direction must be a nonzero vector".into(),
            ));
        }
        for c in p.iter_mut() {
            *c /= r;
        }
        Ok(Direction { v: p })
    }

    pub fn e(axis: usize) -> Self {
        let mut v = [0.0; MAX_DIM];
        v[axis] = 1.0;
        Direction { v }
    }

    pub fn angle(&self) -> f64 {
        self.v[1].atan2(self.v[0])
    }

    /// Chordal distance `|omega - nu|`.
    pub fn chord(&self, other: &Direction) -> f64 {
        let d = [
            self.v[0] - other.v[0],
            self.v[1] - other.v[1],
            self.v[2] - other.v[2],
        ];
        norm(&d)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionSet {
    pub n: usize,
    pub dirs: Vec<Direction>,
    pub weights: Vec<f64>,
}

impl DirectionSet {
    /// `m` equispaced angles (n = 2) or a Fibonacci lattice (n = 3), equal
    /// weights for the unit-normalized sphere measure.
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if m < 4 {
            return Err(Error::InvalidInput(format!("direction count {m} < 4")));
        }
        let dirs = match n {
            2 => (0..m)
                .map(|k| Direction::from_angle(2.0 * PI * k as f64 / m as f64))
                .collect(),
            3 => {
                let golden = PI * (3.0 - 5f64.sqrt());
                (0..m)
                    .map(|k| {
                        let z = 1.0 - (2 * k + 1) as f64 / m as f64;
                        let r = (1.0 - z * z).sqrt();
                        let phi = golden * k as f64;
                        Direction {
                            v: [r * phi.cos(), r * phi.sin(), z],
                        }
                    })
                    .collect()
            }
            _ => return Err(Error::Unsupported(format!("direction sets for n = {n}"))),
        };
        Ok(DirectionSet {
            n,
            dirs,
            weights: vec![1.0 / m as f64; m],
        })
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    /// Largest distance from a point of the sphere to the nearest direction
    /// (n = 2: half the angular spacing).
    pub fn spacing(&self) -> f64 {
        match self.n {
            2 => 2.0 * PI / self.len() as f64,
            _ => (4.0 * PI / self.len() as f64).sqrt() * 1.2,
        }
    }

    /// Index of the direction nearest to `d`.
    pub fn nearest(&self, d: &Direction) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, w) in self.dirs.iter().enumerate() {
            let c = w.chord(d);
            if c < best.1 {
                best = (i, c);
            }
        }
        best.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhasePoint {
    pub x: Point,
    pub omega: Direction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricBall {
    pub center: PhasePoint,
    pub radius: f64,
}

/// Squared quasi-distance for a spatial difference `z` (already periodically
/// reduced) and directions `omega`, `nu`:
/// `(|omega.z| + |nu.z|)/2 + |z|^2 + |omega - nu|^2`.
pub fn quasi_distance_sq(z: &Point, omega: &Direction, nu: &Direction) -> f64 {
    let lin = 0.5 * (dot(&omega.v, z).abs() + dot(&nu.v, z).abs());
    lin + dot(z, z) + omega.chord(nu).powi(2)
}

pub fn quasi_distance(grid: &SpatialGrid, p: &PhasePoint, q: &PhasePoint) -> f64 {
    let z = grid.periodic_diff(&p.x, &q.x);
    quasi_distance_sq(&z, &p.omega, &q.omega).sqrt()
}

/// Quasi-distance in `R^n x S^{n-1}` without periodic reduction.
pub fn quasi_distance_free(p: &PhasePoint, q: &PhasePoint) -> f64 {
    let z = [p.x[0] - q.x[0], p.x[1] - q.x[1], p.x[2] - q.x[2]];
    quasi_distance_sq(&z, &p.omega, &q.omega).sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct BallMembers {
    /// `(grid index, direction index)` pairs.
    pub members: Vec<(usize, usize)>,
    /// `sum h^n w(nu)` over the members.
    pub measure: f64,
    pub fallback: bool,
}

pub fn ball_members(grid: &SpatialGrid, dirs: &DirectionSet, ball: &MetricBall) -> BallMembers {
    let tau = ball.radius;
    let h = grid.h();
    let reach = (tau / h).ceil() as i64 + 1;
    let full = reach * 2 + 1 >= grid.size as i64;
    let center = grid.nearest_index(&ball.center.x);
    let cm = grid.unflatten(center);
    let mut members = Vec::new();
    let mut measure = 0.0;
    let near_dirs: Vec<usize> = (0..dirs.len())
        .filter(|&k| dirs.dirs[k].chord(&ball.center.omega) < tau)
        .collect();
    if !near_dirs.is_empty() {
        let offsets = box_offsets(grid, if full { None } else { Some(reach) });
        let mut spatial: Vec<usize> = Vec::new();
        for off in offsets {
            let mut m = [0usize; MAX_DIM];
            for a in 0..grid.n {
                m[a] = (cm[a] as i64 + off[a]).rem_euclid(grid.size as i64) as usize;
            }
            spatial.push(grid.flatten(&m));
        }
        spatial.sort_unstable();
        spatial.dedup();
        for &i in &spatial {
            let z = grid.periodic_diff(&grid.point(i), &ball.center.x);
            for &k in &near_dirs {
                if quasi_distance_sq(&z, &ball.center.omega, &dirs.dirs[k]) < tau * tau {
                    members.push((i, k));
                    measure += grid.cell() * dirs.weights[k];
                }
            }
        }
    }
    if members.is_empty() {
        let k = dirs.nearest(&ball.center.omega);
        return BallMembers {
            members: vec![(center, k)],
            measure: grid.cell() * dirs.weights[k],
            fallback: true,
        };
    }
    BallMembers {
        members,
        measure,
        fallback: false,
    }
}

fn box_offsets(grid: &SpatialGrid, reach: Option<i64>) -> Vec<[i64; MAX_DIM]> {
    let (lo, hi) = match reach {
        Some(r) => (-r, r),
        None => (-(grid.size as i64) / 2, grid.size as i64 / 2 - 1),
    };
    let mut out = Vec::new();
    let span = (hi - lo + 1) as usize;
    let total = span.pow(grid.n as u32);
    for t in 0..total {
        let mut rem = t;
        let mut off = [0i64; MAX_DIM];
        for a in (0..grid.n).rev() {
            off[a] = lo + (rem % span) as i64;
            rem /= span;
        }
        out.push(off);
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeEstimate {
    pub radius: f64,
    pub value: f64,
    pub std_error: f64,
    /// Independent estimate around a second, rotated center.
    pub second_center: f64,
    pub samples: usize,
    pub seed: u64,
    pub precision_warning: bool,
}

/// Monte Carlo volume of `B_tau` in `R^n x S^{n-1}` under `dx d omega`
/// (normalized sphere measure).
pub fn ball_volume_estimate(
    n: usize,
    tau: f64,
    samples: usize,
    seed: u64,
) -> Result<VolumeEstimate> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "radius {tau} must be positive"
        )));
    }
    if n != 2 && n != 3 {
        return Err(Error::Unsupported(format!("volume estimates for n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (value, std_error) = mc_volume(n, tau, samples.max(1), &mut rng, 0.0);
    let alpha = rng.gen_range(0.0..2.0 * PI);
    let (second, _) = mc_volume(n, tau, samples.max(1), &mut rng, alpha);
    Ok(VolumeEstimate {
        radius: tau,
        value,
        std_error,
        second_center: second,
        samples,
        seed,
        precision_warning: samples < 1000,
    })
}

fn mc_volume(n: usize, tau: f64, samples: usize, rng: &mut ChaCha8Rng, alpha: f64) -> (f64, f64) {
    let t2 = tau * tau;
    let along = tau.min(2.0 * t2);
    let across = tau;
    let cap = 2.0 * (0.5 * tau).min(1.0).asin();
    let (omega, frame) = rotated_frame(n, alpha);
    let cap_measure = if n == 2 {
        cap / PI
    } else {
        0.5 * (1.0 - cap.cos())
    };
    let box_volume = 2.0 * along * (2.0 * across).powi(n as i32 - 1);
    let mut hits = 0usize;
    for _ in 0..samples {
        let mut z = [0.0; MAX_DIM];
        let u = rng.gen_range(-along..along);
        for a in 0..n {
            z[a] += u * frame[0][a];
        }
        for f in frame.iter().take(n).skip(1) {
            let v = rng.gen_range(-across..across);
            for a in 0..n {
                z[a] += v * f[a];
            }
        }
        let nu = if n == 2 {
            let d = rng.gen_range(-cap..cap);
            Direction::from_angle(alpha + d)
        } else {
            let c = rng.gen_range(cap.cos()..1.0);
            let s = (1.0 - c * c).sqrt();
            let phi = rng.gen_range(0.0..2.0 * PI);
            let mut v = [0.0; MAX_DIM];
            for a in 0..3 {
                v[a] = c * frame[0][a] + s * (phi.cos() * frame[1][a] + phi.sin() * frame[2][a]);
            }
            Direction { v }
        };
        if quasi_distance_sq(&z, &omega, &nu) < t2 {
            hits += 1;
        }
    }
    let frac = hits as f64 / samples as f64;
    let scale = box_volume * cap_measure;
    (
        scale * frac,
        scale * (frac * (1.0 - frac) / samples as f64).sqrt(),
    )
}

fn rotated_frame(n: usize, alpha: f64) -> (Direction, [Point; 3]) {
    if n == 2 {
        let w = Direction::from_angle(alpha);
        let p = Direction::from_angle(alpha + 0.5 * PI);
        (w, [w.v, p.v, [0.0, 0.0, 1.0]])
    } else {
        let w = [alpha.cos() * 0.6, alpha.sin() * 0.6, 0.8];
        let a = [-alpha.sin(), alpha.cos(), 0.0];
        let b = [
            w[1] * a[2] - w[2] * a[1],
            w[2] * a[0] - w[0] * a[2],
            w[0] * a[1] - w[1] * a[0],
        ];
        (Direction { v: w }, [w, a, b])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        let e1 = Direction::e(0);
        let e2 = Direction::e(1);
        let z = [0.0, 1.0, 0.0];
        assert!((quasi_distance_sq(&z, &e1, &e1).sqrt() - 1.0).abs() < 1e-15);
        assert!((quasi_distance_sq(&[0.0; 3], &e1, &e2).sqrt() - 2f64.sqrt()).abs() < 1e-15);
        let g = SpatialGrid::standard();
        let p = PhasePoint {
            x: [0.3, -0.2, 0.0],
            omega: Direction::from_angle(0.4),
        };
        assert_eq!(quasi_distance(&g, &p, &p), 0.0);
    }

    #[test]
    fn direction_weights_sum_to_one() {
        for (n, m) in [(2, 64), (3, 50)] {
            let d = DirectionSet::new(n, m).unwrap();
            assert!((d.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for w in &d.dirs {
                assert!((norm(&w.v) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn huge_ball_is_everything() {
        let g = SpatialGrid::new(2, 16, 2.0 * PI).unwrap();
        let d = DirectionSet::new(2, 8).unwrap();
        let ball = MetricBall {
            center: PhasePoint {
                x: [0.0; 3],
                omega: Direction::e(0),
            },
            radius: 100.0,
        };
        let b = ball_members(&g, &d, &ball);
        assert_eq!(b.members.len(), 256 * 8);
        assert!((b.measure - g.length.powi(2)).abs() < 1e-10);
        assert!(!b.fallback);
    }

    #[test]
    fn tiny_ball_falls_back() {
        let g = SpatialGrid::new(2, 32, 2.0 * PI).unwrap();
        let d = DirectionSet::new(2, 16).unwrap();
        let ball = MetricBall {
            center: PhasePoint {
                x: [0.05, 0.0, 0.0],
                omega: Direction::from_angle(0.1),
            },
            radius: 0.5 * g.h(),
        };
        let b = ball_members(&g, &d, &ball);
        assert!(b.fallback);
        assert_eq!(b.members.len(), 1);
    }

    #[test]
    fn volume_is_deterministic_and_center_free() {
        let a = ball_volume_estimate(2, 0.25, 200_000, 7).unwrap();
        let b = ball_volume_estimate(2, 0.25, 200_000, 7).unwrap();
        assert_eq!(a.value, b.value);
        assert!((a.value - a.second_center).abs() < 5.0 * a.std_error.max(1e-12) + 0.02 * a.value);
        assert!(
            ball_volume_estimate(2, 0.25, 10, 7)
                .unwrap()
                .precision_warning
        );
    }
}
