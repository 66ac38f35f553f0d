//! One-dimensional quadrature and small numeric helpers.

use crate::error::{Error, Result};

/// Romberg integration of a smooth integrand on `[a, b]`.
///
/// Stops when two successive extrapolated estimates differ by less than
/// `tol * max(1, |I|)`.
pub fn romberg(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    const LEVELS: usize = 22;
    let mut prev: Vec<f64> = Vec::with_capacity(LEVELS);
    let mut h = b - a;
    let mut trap = 0.5 * h * (f(a) + f(b));
    prev.push(trap);
    for level in 1..LEVELS {
        let count = 1usize << (level - 1);
        h *= 0.5;
        let mut mid = 0.0;
        for i in 0..count {
            mid += f(a + (2 * i + 1) as f64 * h);
        }
        trap = 0.5 * trap + h * mid;
        let mut row = Vec::with_capacity(level + 1);
        row.push(trap);
        let mut factor = 1.0;
        for k in 1..=level {
            factor *= 4.0;
            let v = row[k - 1] + (row[k - 1] - prev[k - 1]) / (factor - 1.0);
            row.push(v);
        }
        let best = row[level];
        let last = prev[level - 1];
        if level >= 4 && (best - last).abs() <= tol * best.abs().max(1.0) {
            return Ok(best);
        }
        prev = row;
    }
    Err(Error::Construction(format!(
        "quadrature on [{a}, {b}] did not converge"
    )))
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`, C-infinity in between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn romberg_polynomial_and_transcendental() {
        let v = romberg(|x| x * x, 0.0, 3.0, 1e-14).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        let v = romberg(f64::sin, 0.0, std::f64::consts::PI, 1e-14).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_step_limits() {
        assert_eq!(smooth_step(-1.0), 0.0);
        assert_eq!(smooth_step(2.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        assert!(smooth_step(0.3) < smooth_step(0.31));
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.25)).collect();
        assert!((loglog_slope(&x, &y) + 0.25).abs() < 1e-12);
    }
}
