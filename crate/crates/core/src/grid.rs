//! Periodic box discretization, the discrete Fourier transform contract and
//! Fourier multipliers.
//!
//! Grid points are `x_j = -L/2 + j h` on every axis, frequencies are
//! `xi_k = (2 pi / L) k` with `k` in FFT order. The transform pair is
//!
//! ```text
//! fhat(xi) = (2 pi)^{-n} h^n sum_x e^{-i x.xi} f(x)
//! f(x)     = (2 pi / L)^n sum_xi e^{i x.xi} fhat(xi)
//! ```

use crate::error::{Error, Result};
use crate::fft;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};

pub const MAX_DIM: usize = 3;
pub type Point = [f64; MAX_DIM];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub n: usize,
    #[serde(rename = "N")]
    pub size: usize,
    #[serde(rename = "L")]
    pub length: f64,
}

impl SpatialGrid {
    pub fn new(n: usize, size: usize, length: f64) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::InvalidInput(format!(
                "dimension n = {n} not in 2..={MAX_DIM}"
            )));
        }
        if size < 8 || !size.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "N = {size} must be a power of two >= 8"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidInput(format!(
                "box length L = {length} must be positive"
            )));
        }
        Ok(SpatialGrid { n, size, length })
    }

    /// The default torus: n = 2, N = 256, L = 2 pi.
    pub fn standard() -> Self {
        SpatialGrid {
            n: 2,
            size: 256,
            length: 2.0 * PI,
        }
    }

    pub fn h(&self) -> f64 {
        self.length / self.size as f64
    }

    pub fn len(&self) -> usize {
        self.size.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Frequency lattice spacing `2 pi / L`.
    pub fn dxi(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Largest resolvable frequency magnitude along an axis.
    pub fn nyquist(&self) -> f64 {
        (self.size / 2) as f64 * self.dxi()
    }

    /// `h^n`, the cell volume.
    pub fn cell(&self) -> f64 {
        self.h().powi(self.n as i32)
    }

    /// Multi-index of a flat row-major index.
    pub fn unflatten(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0usize; MAX_DIM];
        for a in (0..self.n).rev() {
            out[a] = idx % self.size;
            idx /= self.size;
        }
        out
    }

    pub fn flatten(&self, multi: &[usize]) -> usize {
        multi[..self.n]
            .iter()
            .fold(0, |acc, &m| acc * self.size + m)
    }

    /// Spatial coordinates of a flat index.
    pub fn point(&self, idx: usize) -> Point {
        let m = self.unflatten(idx);
        let mut p = [0.0; MAX_DIM];
        for a in 0..self.n {
            p[a] = -0.5 * self.length + m[a] as f64 * self.h();
        }
        p
    }

    /// Signed integer wave vector of a flat index in FFT order.
    pub fn wave_index(&self, idx: usize) -> [i64; MAX_DIM] {
        let m = self.unflatten(idx);
        let mut k = [0i64; MAX_DIM];
        for a in 0..self.n {
            k[a] = signed_index(m[a], self.size);
        }
        k
    }

    /// Frequency `xi` of a flat index in FFT order.
    pub fn frequency(&self, idx: usize) -> Point {
        let k = self.wave_index(idx);
        let mut xi = [0.0; MAX_DIM];
        for a in 0..self.n {
            xi[a] = k[a] as f64 * self.dxi();
        }
        xi
    }

    /// `|xi|` for every lattice point, FFT order.
    pub fn frequency_norms(&self) -> Vec<f64> {
        (0..self.len()).map(|i| norm(&self.frequency(i))).collect()
    }

    /// Index of the grid point nearest to `x` (periodically).
    pub fn nearest_index(&self, x: &[f64]) -> usize {
        let mut m = [0usize; MAX_DIM];
        for a in 0..self.n {
            let j = ((x[a] + 0.5 * self.length) / self.h()).round() as i64;
            m[a] = j.rem_euclid(self.size as i64) as usize;
        }
        self.flatten(&m)
    }

    /// Shortest periodic representative of `x - y`.
    pub fn periodic_diff(&self, x: &[f64], y: &[f64]) -> Point {
        let mut d = [0.0; MAX_DIM];
        for a in 0..self.n {
            d[a] = wrap(x[a] - y[a], self.length);
        }
        d
    }

    pub fn check_same(&self, other: &SpatialGrid) -> Result<()> {
        if self != other {
            return Err(Error::InvalidInput(format!(
                "grid mismatch: {self:?} vs {other:?}"
            )));
        }
        Ok(())
    }
}

pub fn signed_index(m: usize, size: usize) -> i64 {
    if m < size / 2 {
        m as i64
    } else {
        m as i64 - size as i64
    }
}

/// Reduce `d` to `[-L/2, L/2)`.
pub fn wrap(d: f64, length: f64) -> f64 {
    let mut r = (d + 0.5 * length).rem_euclid(length) - 0.5 * length;
    if r >= 0.5 * length {
        r -= length;
    }
    r
}

pub fn norm(v: &Point) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub grid: SpatialGrid,
    pub values: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub grid: SpatialGrid,
    /// Coefficients in FFT order.
    pub coeffs: Vec<Complex64>,
}

impl GridField {
    pub fn new(grid: SpatialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "field has {} samples, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values
            .iter()
            .position(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::InvalidInput(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(GridField { grid, values })
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        GridField {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(&Point) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        GridField { grid, values }
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// `(h^n sum |f|^2)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Discrete `L^p` quasi-norm; `p = inf` gives the max modulus.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_of_moduli(self.values.iter().map(|v| v.norm()), p, self.grid.cell())
    }

    /// `<f, g> = h^n sum f conj(g)`.
    pub fn inner(&self, other: &GridField) -> Complex64 {
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum();
        s * self.grid.cell()
    }

    pub fn scale(&self, c: Complex64) -> GridField {
        GridField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &GridField) -> GridField {
        GridField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &GridField) -> GridField {
        GridField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Relative L2 distance `|f - g| / |g|`.
    pub fn rel_l2_error(&self, reference: &GridField) -> f64 {
        self.sub(reference).l2_norm() / reference.l2_norm()
    }

    /// Cyclic translation by the integer grid vector `shift`: `g(x) = f(x - shift h)`.
    pub fn translate(&self, shift: &[i64]) -> GridField {
        let g = self.grid;
        let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
        for (i, v) in self.values.iter().enumerate() {
            let m = g.unflatten(i);
            let mut t = [0usize; MAX_DIM];
            for a in 0..g.n {
                t[a] = (m[a] as i64 + shift[a]).rem_euclid(g.size as i64) as usize;
            }
            out[g.flatten(&t)] = *v;
        }
        GridField {
            grid: g,
            values: out,
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(FIELD_MAGIC)?;
        write_header(&mut w, &self.grid)?;
        write_samples(&mut w, &self.values)
    }

    pub fn read_from(mut r: impl Read) -> Result<GridField> {
        expect_magic(&mut r, FIELD_MAGIC)?;
        let grid = read_header(&mut r)?;
        let values = read_samples(&mut r, grid.len())?;
        GridField::new(grid, values)
    }

    pub fn save(&self, path: &str) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &str) -> Result<GridField> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        GridField::read_from(std::io::BufReader::new(file))
    }
}

pub(crate) fn lp_of_moduli(moduli: impl Iterator<Item = f64>, p: f64, cell: f64) -> f64 {
    if p.is_infinite() {
        moduli.fold(0.0, f64::max)
    } else {
        (cell * moduli.map(|m| m.powf(p)).sum::<f64>()).powf(1.0 / p)
    }
}

impl SpectralField {
    pub fn new(grid: SpatialGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "spectrum has {} coefficients, grid needs {}",
                coeffs.len(),
                grid.len()
            )));
        }
        if coeffs
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(SpectralField { grid, coeffs })
    }

    /// Coefficients multiplied pointwise by a real symbol array.
    pub fn times_real(&self, symbol: &[f64]) -> SpectralField {
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(symbol).map(|(c, m)| c * m).collect(),
        }
    }

    /// `(2 pi)^n (2 pi / L)^n sum |fhat|^2`, equal to the squared L2 norm.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * spectral_measure(&self.grid)
    }
}

/// Weight turning `sum |fhat|^2` into `|f|_2^2`.
pub fn spectral_measure(grid: &SpatialGrid) -> f64 {
    (2.0 * PI).powi(grid.n as i32) * grid.dxi().powi(grid.n as i32)
}

fn parity_sign(grid: &SpatialGrid, idx: usize) -> f64 {
    let k = grid.wave_index(idx);
    let s: i64 = k[..grid.n].iter().sum();
    if s.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Forward transform into a caller-owned buffer, in place.
pub fn forward_in_place(grid: &SpatialGrid, data: &mut [Complex64]) {
    fft::plan(grid.n, grid.size).forward(data);
    let c = (grid.h() / (2.0 * PI)).powi(grid.n as i32);
    apply_parity(grid, data, c);
}

/// Inverse transform into a caller-owned buffer, in place.
pub fn inverse_in_place(grid: &SpatialGrid, data: &mut [Complex64]) {
    apply_parity(grid, data, grid.dxi().powi(grid.n as i32));
    fft::plan(grid.n, grid.size).inverse(data);
}

fn apply_parity(grid: &SpatialGrid, data: &mut [Complex64], scale: f64) {
    if grid.n == 2 {
        // Fast path: sign is (-1)^(k0 + k1), and N is even so (-1)^k = (-1)^m.
        let n = grid.size;
        for r in 0..n {
            let row = &mut data[r * n..(r + 1) * n];
            for (c, v) in row.iter_mut().enumerate() {
                *v *= if (r + c) % 2 == 0 { scale } else { -scale };
            }
        }
    } else {
        for (i, v) in data.iter_mut().enumerate() {
            *v *= scale * parity_sign(grid, i);
        }
    }
}

pub fn to_spectrum(f: &GridField) -> Result<SpectralField> {
    if !f.is_finite() {
        return Err(Error::InvalidInput("non-finite field sample".into()));
    }
    if f.values.len() != f.grid.len() {
        return Err(Error::InvalidInput(
            "field length does not match grid".into(),
        ));
    }
    let mut data = f.values.clone();
    forward_in_place(&f.grid, &mut data);
    Ok(SpectralField {
        grid: f.grid,
        coeffs: data,
    })
}

pub fn from_spectrum(s: &SpectralField) -> Result<GridField> {
    if s.coeffs.len() != s.grid.len() {
        return Err(Error::InvalidInput(format!(
            "spectrum has {} coefficients, grid needs {}",
            s.coeffs.len(),
            s.grid.len()
        )));
    }
    if s.coeffs
        .iter()
        .any(|v| !v.re.is_finite() || !v.im.is_finite())
    {
        return Err(Error::InvalidInput("non-finite coefficient".into()));
    }
    let mut data = s.coeffs.clone();
    inverse_in_place(&s.grid, &mut data);
    Ok(GridField {
        grid: s.grid,
        values: data,
    })
}

/// `m(D) f`, with `m` evaluated at every lattice frequency.
pub fn apply_multiplier(m: impl Fn(&Point) -> Complex64, f: &GridField) -> Result<GridField> {
    let mut spec = to_spectrum(f)?;
    for (i, c) in spec.coeffs.iter_mut().enumerate() {
        let xi = f.grid.frequency(i);
        let v = m(&xi);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::Evaluation {
                xi: xi[..f.grid.n].to_vec(),
                value: format!("{v}"),
            });
        }
        *c *= v;
    }
    from_spectrum(&spec)
}

/// `m(D) f` for a real radial symbol `m(|xi|)`.
pub fn apply_radial(m: impl Fn(f64) -> f64, f: &GridField) -> Result<GridField> {
    apply_multiplier(|xi| Complex64::new(m(norm(xi)), 0.0), f)
}

pub(crate) const FIELD_MAGIC: &[u8] = b"FIOH1";

pub(crate) fn expect_magic(r: &mut impl Read, magic: &[u8]) -> Result<()> {
    let mut buf = vec![0u8; magic.len()];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    if buf != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&buf),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

pub(crate) fn write_header(w: &mut impl Write, grid: &SpatialGrid) -> std::io::Result<()> {
    w.write_all(&(grid.n as u64).to_le_bytes())?;
    w.write_all(&(grid.size as u64).to_le_bytes())?;
    w.write_all(&grid.length.to_le_bytes())
}

pub(crate) fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_header(r: &mut impl Read) -> Result<SpatialGrid> {
    let n = read_u64(r)? as usize;
    let size = read_u64(r)? as usize;
    let length = f64::from_bits(read_u64(r)?);
    SpatialGrid::new(n, size, length).map_err(|e| Error::Format(e.to_string()))
}

pub(crate) fn write_samples(w: &mut impl Write, values: &[Complex64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 16);
    for v in values {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)
}

pub(crate) fn read_samples(r: &mut impl Read, count: usize) -> Result<Vec<Complex64>> {
    let mut buf = vec![0u8; count * 16];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated samples: {e}")))?;
    Ok(buf
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: SpatialGrid, seed: u64) -> GridField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        GridField::new(grid, values).unwrap()
    }

    fn small() -> SpatialGrid {
        SpatialGrid::new(2, 16, 2.0 * PI).unwrap()
    }

    /// Direct O(N^4) sum of the forward convention.
    fn direct_spectrum(f: &GridField) -> Vec<Complex64> {
        let g = f.grid;
        (0..g.len())
            .map(|k| {
                let xi = g.frequency(k);
                let s: Complex64 = (0..g.len())
                    .map(|j| f.values[j] * Complex64::from_polar(1.0, -dot(&g.point(j), &xi)))
                    .sum();
                s * (g.h() / (2.0 * PI)).powi(2)
            })
            .collect()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(SpatialGrid::new(1, 16, 1.0).is_err());
        assert!(SpatialGrid::new(2, 12, 1.0).is_err());
        assert!(SpatialGrid::new(2, 4, 1.0).is_err());
        assert!(SpatialGrid::new(2, 16, -1.0).is_err());
    }

    #[test]
    fn zero_field_has_zero_spectrum() {
        let s = to_spectrum(&GridField::zeros(small())).unwrap();
        assert!(s.coeffs.iter().all(|c| c.norm() == 0.0));
        let f = from_spectrum(&SpectralField {
            grid: small(),
            coeffs: vec![Complex64::new(0.0, 0.0); 256],
        })
        .unwrap();
        assert!(f.values.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn plane_wave_has_single_coefficient() {
        let g = small();
        let f = GridField::from_fn(g, |x| Complex64::from_polar(1.0, g.dxi() * x[0]));
        let s = to_spectrum(&f).unwrap();
        for (i, c) in s.coeffs.iter().enumerate() {
            let k = g.wave_index(i);
            if k[0] == 1 && k[1] == 0 {
                assert!((c - Complex64::new((g.length / (2.0 * PI)).powi(2), 0.0)).norm() < 1e-12);
            } else {
                assert!(c.norm() < 1e-13);
            }
        }
    }

    #[test]
    fn frequency_delta_is_scaled_plane_wave() {
        let g = small();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); g.len()];
        let k0 = g.flatten(&[3, 14]);
        coeffs[k0] = Complex64::new(1.0, 0.0);
        let xi0 = g.frequency(k0);
        let f = from_spectrum(&SpectralField::new(g, coeffs).unwrap()).unwrap();
        for (j, v) in f.values.iter().enumerate() {
            let expect = Complex64::from_polar(g.dxi().powi(2), dot(&g.point(j), &xi0));
            assert!((v - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn fft_matches_direct_sum_convention() {
        let g = SpatialGrid::new(2, 8, 3.0).unwrap();
        let f = random_field(g, 1);
        let fast = to_spectrum(&f).unwrap();
        for (a, b) in fast.coeffs.iter().zip(direct_spectrum(&f)) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        for seed in 0..10 {
            let f = random_field(SpatialGrid::new(2, 32, 5.0).unwrap(), seed);
            let s = to_spectrum(&f).unwrap();
            let back = from_spectrum(&s).unwrap();
            assert!(back.rel_l2_error(&f) < 1e-12);
            let e = f.l2_norm().powi(2);
            assert!((s.energy() - e).abs() / e < 1e-10);
        }
    }

    #[test]
    fn identity_and_shift_multipliers() {
        let g = small();
        let f = random_field(g, 3);
        let same = apply_multiplier(|_| Complex64::new(1.0, 0.0), &f).unwrap();
        assert!(same.rel_l2_error(&f) < 1e-13);
        let shift = [3i64, -2];
        let x0 = [3.0 * g.h(), -2.0 * g.h(), 0.0];
        let moved = apply_multiplier(|xi| Complex64::from_polar(1.0, -dot(&x0, xi)), &f).unwrap();
        assert!(moved.rel_l2_error(&f.translate(&shift)) < 1e-12);
    }

    #[test]
    fn non_finite_symbol_names_frequency() {
        let f = random_field(small(), 4);
        let err = apply_multiplier(|xi| Complex64::new(1.0 / xi[0], 0.0), &f).unwrap_err();
        match err {
            Error::Evaluation { xi, .. } => assert_eq!(xi[0], 0.0),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn file_round_trip() {
        let f = random_field(small(), 5);
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..5], b"FIOH1");
        assert_eq!(buf.len(), 5 + 24 + 16 * 256);
        let g = GridField::read_from(buf.as_slice()).unwrap();
        assert_eq!(f, g);
        buf[0] = b'X';
        assert!(matches!(
            GridField::read_from(buf.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn wrap_gives_minimal_representative() {
        let l = 2.0 * PI;
        assert!((wrap(0.9 * l, l) + 0.1 * l).abs() < 1e-12);
        assert!((wrap(-0.6 * l, l) - 0.4 * l).abs() < 1e-12);
        assert!(wrap(0.5 * l, l) < 0.0);
    }
}
