//! Maximal operators on phase-space slices `g(x, omega)`, stored as one
//! `Vec<f64>` of moduli per direction.

use super::{quasi_distance_sq, BallAverager, KernelMode};
use crate::grid::{SpatialGrid, MAX_DIM};
use num_complex::Complex64;
use serde::Serialize;

/// Largest quasi-distance between two points of the torus bundle.
pub fn diameter(grid: &SpatialGrid) -> f64 {
    let half = 0.5 * grid.length;
    let z2 = grid.n as f64 * half * half;
    (z2 + z2.sqrt() + 4.0).sqrt()
}

/// Radius menu `diam 2^{-k}`, stopping above the grid spacing.
pub fn dyadic_radii(grid: &SpatialGrid) -> Vec<f64> {
    let mut r = diameter(grid);
    let mut out = Vec::new();
    while r >= grid.h() {
        out.push(r);
        r *= 0.5;
    }
    out
}

/// Unnormalized forward FFTs of real slices, two slices per complex
/// transform. All-zero slices give `None`.
pub fn real_spectra(grid: &SpatialGrid, slices: &[Vec<f64>]) -> Vec<Option<Vec<Complex64>>> {
    let plan = crate::fft::plan(grid.n, grid.size);
    let live: Vec<usize> = (0..slices.len())
        .filter(|&k| slices[k].iter().any(|&v| v != 0.0))
        .collect();
    let mut out = vec![None; slices.len()];
    let neg = negated_indices(grid);
    for pair in live.chunks(2) {
        let a = &slices[pair[0]];
        let mut buf: Vec<Complex64> = match pair.get(1) {
            Some(&j) => a
                .iter()
                .zip(&slices[j])
                .map(|(&x, &y)| Complex64::new(x, y))
                .collect(),
            None => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        };
        plan.forward(&mut buf);
        if pair.len() == 1 {
            out[pair[0]] = Some(buf);
            continue;
        }
        let first = (0..buf.len())
            .map(|k| 0.5 * (buf[k] + buf[neg[k] as usize].conj()))
            .collect();
        let second = (0..buf.len())
            .map(|k| Complex64::new(0.0, -0.5) * (buf[k] - buf[neg[k] as usize].conj()))
            .collect();
        out[pair[0]] = Some(first);
        out[pair[1]] = Some(second);
    }
    out
}

/// Flat index of `-kappa` for every flat index `kappa`.
pub(crate) fn negated_indices(grid: &SpatialGrid) -> Vec<u32> {
    (0..grid.len())
        .map(|i| {
            let m = grid.unflatten(i);
            let mut r = [0usize; MAX_DIM];
            for a in 0..grid.n {
                r[a] = (grid.size - m[a]) % grid.size;
            }
            grid.flatten(&r[..grid.n]) as u32
        })
        .collect()
}

/// `(M(|g|^lambda))^{1/lambda}` with the centered maximal function over the
/// dyadic radius menu (and the sample itself as the zero radius).
pub fn m_lambda(averager: &BallAverager, g: &[Vec<f64>], lambda: f64) -> Vec<Vec<f64>> {
    let powered: Vec<Vec<f64>> = g
        .iter()
        .map(|s| s.iter().map(|v| v.abs().powf(lambda)).collect())
        .collect();
    let spectra = real_spectra(averager.grid(), &powered);
    let mut best = powered.clone();
    for r in dyadic_radii(averager.grid()) {
        let avg = averager.average_spectra(r, &spectra);
        for (b, a) in best.iter_mut().zip(&avg) {
            for (bv, av) in b.iter_mut().zip(a) {
                if *av > *bv {
                    *bv = *av;
                }
            }
        }
    }
    best.iter()
        .map(|s| s.iter().map(|v| v.powf(1.0 / lambda)).collect())
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct PeakOptions {
    /// Spatial stride of output points (1 = every grid point).
    pub out_stride: usize,
    /// Stride of output directions.
    pub dir_stride: usize,
    /// Spatial stride of the source samples scanned for the supremum.
    pub source_stride: usize,
}

impl Default for PeakOptions {
    fn default() -> Self {
        PeakOptions {
            out_stride: 1,
            dir_stride: 1,
            source_stride: 1,
        }
    }
}

/// Output sample list `(grid index, direction index)` for given strides.
pub fn strided_outputs(grid: &SpatialGrid, dirs: usize, opts: &PeakOptions) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..grid.len() {
        let m = grid.unflatten(i);
        if (0..grid.n).all(|a| m[a] % opts.out_stride == 0) {
            for k in (0..dirs).step_by(opts.dir_stride) {
                out.push((i, k));
            }
        }
    }
    out
}

/// `sup_{(y,nu)} (1 + rho^2/sigma)^{-N} |g(y, nu)|` at the requested output
/// points. The scan window around each output is sized so that no sample
/// outside it can beat the value already found, so the result is the exact
/// discrete supremum over the (strided) source lattice and the output
/// sample itself.
pub fn peak_maximal(
    grid: &SpatialGrid,
    dirs: &super::DirectionSet,
    g: &[Vec<f64>],
    power: f64,
    sigma: f64,
    outputs: &[(usize, usize)],
    source_stride: usize,
) -> Vec<f64> {
    let global = g
        .iter()
        .flat_map(|s| s.iter())
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    if global == 0.0 {
        return vec![0.0; outputs.len()];
    }
    outputs
        .iter()
        .map(|&(i, k)| {
            let own = g[k][i].abs();
            let local = scan(grid, dirs, g, power, sigma, i, k, sigma, source_stride, own);
            let best = local.max(own);
            let r2 = if best > 0.0 {
                sigma * ((global / best).powf(1.0 / power) - 1.0)
            } else {
                f64::INFINITY
            };
            if r2 <= sigma {
                best
            } else {
                scan(grid, dirs, g, power, sigma, i, k, r2, source_stride, best)
            }
        })
        .collect()
}

/// Lower and upper bounds for `peak_maximal` from a scan of the window
/// `rho^2 < window * sigma`: the window supremum, and the larger of it and
/// the largest weight any sample outside the window can reach.
#[allow(clippy::too_many_arguments)]
pub fn peak_maximal_window(
    grid: &SpatialGrid,
    dirs: &super::DirectionSet,
    g: &[Vec<f64>],
    power: f64,
    sigma: f64,
    outputs: &[(usize, usize)],
    source_stride: usize,
    window: f64,
) -> Vec<(f64, f64)> {
    let global = g
        .iter()
        .flat_map(|s| s.iter())
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    let tail = global * (1.0 + window).powf(-power);
    outputs
        .iter()
        .map(|&(i, k)| {
            let own = g[k][i].abs();
            let low = scan(
                grid,
                dirs,
                g,
                power,
                sigma,
                i,
                k,
                window * sigma,
                source_stride,
                own,
            )
            .max(own);
            (low, low.max(tail))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn scan(
    grid: &SpatialGrid,
    dirs: &super::DirectionSet,
    g: &[Vec<f64>],
    power: f64,
    sigma: f64,
    i: usize,
    k: usize,
    r2: f64,
    stride: usize,
    start: f64,
) -> f64 {
    let h = grid.h();
    let omega = dirs.dirs[k];
    let reach = if r2.is_finite() {
        (r2.sqrt() / h).ceil() as i64 + 1
    } else {
        grid.size as i64
    };
    let full = 2 * reach + 1 >= grid.size as i64;
    let (lo, hi) = if full {
        (-(grid.size as i64) / 2, grid.size as i64 / 2 - 1)
    } else {
        (-reach, reach)
    };
    let m = grid.unflatten(i);
    let near: Vec<usize> = (0..dirs.len())
        .filter(|&j| omega.chord(&dirs.dirs[j]).powi(2) < r2)
        .collect();
    let mut best = start;
    let s = stride as i64;
    let mut off = [lo; MAX_DIM];
    for a in grid.n..MAX_DIM {
        off[a] = 0;
    }
    loop {
        let mut idx = [0usize; MAX_DIM];
        let mut aligned = true;
        let mut z = [0.0; MAX_DIM];
        for a in 0..grid.n {
            let t = (m[a] as i64 + off[a]).rem_euclid(grid.size as i64);
            if t % s != 0 {
                aligned = false;
            }
            idx[a] = t as usize;
            z[a] = off[a] as f64 * h;
        }
        if aligned {
            let zz = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
            if zz < r2 {
                let flat = grid.flatten(&idx);
                for &j in &near {
                    let v = g[j][flat].abs();
                    if v <= best {
                        continue;
                    }
                    let d2 = quasi_distance_sq(&z, &omega, &dirs.dirs[j]);
                    let w = (1.0 + d2 / sigma).powf(-power) * v;
                    if w > best {
                        best = w;
                    }
                }
            }
        }
        let mut a = grid.n;
        loop {
            if a == 0 {
                return best;
            }
            a -= 1;
            off[a] += 1;
            if off[a] <= hi {
                break;
            }
            off[a] = lo;
        }
    }
}

/// `sigma^{-n} sum_{(y,nu)} (1 + rho^2/sigma)^{-power} |g(y,nu)| h^n w_nu`,
/// with the weight truncated where it falls below `cutoff`.
pub fn kernel_weighted_average(
    grid: &SpatialGrid,
    dirs: &super::DirectionSet,
    g: &[Vec<f64>],
    sigma: f64,
    power: f64,
    cutoff: f64,
) -> Vec<Vec<f64>> {
    let reach = (sigma * (cutoff.powf(-1.0 / power) - 1.0)).sqrt();
    let av =
        BallAverager::with_cache_limit(*grid, dirs.clone(), KernelMode::Decay { sigma, power }, 0);
    let spectra = real_spectra(
        grid,
        &g.iter()
            .map(|s| s.iter().map(|v| v.abs()).collect())
            .collect::<Vec<_>>(),
    );
    let scale = sigma.powi(-(grid.n as i32));
    av.sum_spectra(reach, &spectra)
        .into_iter()
        .map(|s| s.into_iter().map(|v| v * scale).collect())
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationReport {
    pub sigma: f64,
    pub power: f64,
    pub max_ratio: f64,
    pub argmax: (usize, usize),
    pub cutoff: f64,
    pub excluded_points: usize,
}

/// Max over samples of `kernel_weighted_average(g) / M(g)`.
pub fn kernel_domination_check(
    averager: &BallAverager,
    g: &[Vec<f64>],
    sigma: f64,
    power: f64,
) -> crate::error::Result<DominationReport> {
    let grid = averager.grid();
    if power <= grid.n as f64 {
        return Err(crate::error::Error::Precondition(format!(
            "decay power {power} must exceed n = {}",
            grid.n
        )));
    }
    let cutoff = 1e-10;
    let lhs = kernel_weighted_average(grid, averager.directions(), g, sigma, power, cutoff);
    let rhs = m_lambda(averager, g, 1.0);
    let (max_ratio, argmax, excluded) = max_ratio(&lhs, &rhs, 1e-8);
    Ok(DominationReport {
        sigma,
        power,
        max_ratio,
        argmax,
        cutoff,
        excluded_points: excluded,
    })
}

/// Max pointwise `lhs / rhs` over samples where `rhs` exceeds `floor` times
/// its maximum. Returns 1 when both sides vanish identically.
pub(crate) fn max_ratio(
    lhs: &[Vec<f64>],
    rhs: &[Vec<f64>],
    floor: f64,
) -> (f64, (usize, usize), usize) {
    let top = rhs
        .iter()
        .flat_map(|s| s.iter())
        .fold(0.0f64, |a, &b| a.max(b));
    let ltop = lhs
        .iter()
        .flat_map(|s| s.iter())
        .fold(0.0f64, |a, &b| a.max(b));
    if top == 0.0 {
        return (if ltop == 0.0 { 1.0 } else { f64::INFINITY }, (0, 0), 0);
    }
    let mut best = (0.0, (0, 0));
    let mut excluded = 0;
    for (k, (l, r)) in lhs.iter().zip(rhs).enumerate() {
        for (i, (a, b)) in l.iter().zip(r).enumerate() {
            if *b <= floor * top {
                excluded += 1;
                continue;
            }
            let q = a / b;
            if q > best.0 {
                best = (q, (i, k));
            }
        }
    }
    (best.0, best.1, excluded)
}
