//! Function-space quasi-norms: the local Hardy spaces `h^{s,p}`,
//! `H^{s,p}_FIO` by definition and by its equivalent characterizations,
//! the loss exponent `s(p)` and the Sobolev embedding experiment.

use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{make_test_field, TestFieldKind};
use crate::geometry::DirectionSet;
use crate::grid::{self, lp_of_moduli, GridField, SpatialGrid};
use crate::packets::{PacketFamily, SymbolKind};
use crate::quad::{loglog_slope, smooth_step};
use crate::tent::{BallMenu, Slice, TentSpace};
use crate::transform::{Part, ScaleLadder, WaveTransform};

/// `s(p) = (n - 1)/2 |1/p - 1/2|`.
pub fn sp_exponent(n: usize, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Parameter(format!(
            "exponent p = {p} must be positive"
        )));
    }
    Ok((n as f64 - 1.0) / 2.0 * (1.0 / p - 0.5).abs())
}

/// Low-frequency cutoff `q`: 1 on `|xi| <= 2`, 0 on `|xi| >= 3`.
pub fn low_cutoff(r: f64) -> f64 {
    1.0 - smooth_step(r - 2.0)
}

/// `<D>^s f` with the lattice multiplier `(1 + |xi|^2)^{s/2}`.
pub fn bessel(f: &GridField, s: f64) -> Result<GridField> {
    if s == 0.0 {
        return Ok(f.clone());
    }
    grid::apply_radial(|r| (1.0 + r * r).powf(0.5 * s), f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    LocalHardy,
    Hpfio,
    HpfioEquivalentA,
    HpfioThetaS,
    HpfioDirectional,
}

impl SpaceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SpaceKind::LocalHardy => "hp",
            SpaceKind::Hpfio => "hpfio",
            SpaceKind::HpfioEquivalentA => "hpfio-A",
            SpaceKind::HpfioThetaS => "hpfio-theta",
            SpaceKind::HpfioDirectional => "hpfio-dir",
        }
    }
}

impl FromStr for SpaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hp" | "local-hardy" => Ok(SpaceKind::LocalHardy),
            "hpfio" => Ok(SpaceKind::Hpfio),
            "hpfio-A" | "hpfio-equivalent-A" => Ok(SpaceKind::HpfioEquivalentA),
            "hpfio-theta" | "hpfio-theta-S" => Ok(SpaceKind::HpfioThetaS),
            "hpfio-dir" | "hpfio-directional" => Ok(SpaceKind::HpfioDirectional),
            other => Err(Error::Parameter(format!("unknown space '{other}'"))),
        }
    }
}

/// Settings behind a norm value.
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub size: usize,
    pub length: f64,
    pub octaves: usize,
    pub per_octave: usize,
    pub hardy_octaves: usize,
    pub directions: usize,
    pub fallback_balls: usize,
}

/// An evaluated quasi-norm. `value` is `low + square` for the two-term
/// characterizations; for `hpfio` it is the definition-mode value and
/// `weighted` carries the `|W f|_{T^p_s}` mode.
#[derive(Clone, Debug, Serialize)]
pub struct NormResult {
    pub space: SpaceKind,
    pub p: f64,
    pub s: f64,
    pub value: f64,
    pub low: f64,
    pub square: f64,
    pub weighted: Option<f64>,
    pub mode_ratio: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// All `H^{s,p}_FIO` evaluation modes of one field at one `(p, s)`.
#[derive(Clone, Debug, Serialize)]
pub struct ModeValues {
    pub p: f64,
    pub s: f64,
    /// `|W <D>^s f|_{T^p}`.
    pub definition: f64,
    /// `|W f|_{T^p_s}`.
    pub weighted: f64,
    /// `|q(D) f|_p + |A_s W_h f|_p`.
    pub equivalent_a: f64,
    /// `|q(D) <D>^s f|_p + |S_h <D>^s f|_p`.
    pub theta: f64,
    /// `|q(D) f|_p + (int |phi_omega(D) f|^p_{h^{s,p}} d omega)^{1/p}`.
    pub directional: f64,
}

impl ModeValues {
    pub fn values(&self) -> [f64; 5] {
        [
            self.definition,
            self.weighted,
            self.equivalent_a,
            self.theta,
            self.directional,
        ]
    }

    pub const NAMES: [&'static str; 5] = [
        "definition",
        "weighted",
        "equivalent-A",
        "theta-S",
        "directional",
    ];

    /// Largest over smallest mode value.
    pub fn spread(&self) -> f64 {
        let v = self.values();
        let hi = v.iter().cloned().fold(f64::MIN, f64::max);
        let lo = v.iter().cloned().fold(f64::MAX, f64::min);
        hi / lo
    }
}

/// Evaluator for the function-space quasi-norms on one grid, direction set
/// and ladder.
pub struct FunctionSpaces {
    transform: WaveTransform,
    tent: TentSpace,
    hardy: ScaleLadder,
    hardy_symbols: Vec<Vec<f64>>,
    low_symbol: Vec<f64>,
    phi: OnceLock<Vec<Vec<f64>>>,
    menu: BallMenu,
}

impl FunctionSpaces {
    pub fn new(family: Arc<PacketFamily>, ladder: ScaleLadder) -> Result<Self> {
        let grid = *family.grid();
        let dirs = family.directions().clone();
        let transform = WaveTransform::new(family.clone(), ladder.clone())?;
        let tent = TentSpace::new(grid, dirs);
        let norms = grid.frequency_norms();
        let corner = grid.nyquist() * (grid.n as f64).sqrt();
        let octaves = (2.0 * corner).log2().ceil() as usize + 1;
        let hardy = ScaleLadder::new(octaves, ladder.per_octave)?;
        let radial = family.radial().clone();
        let hardy_symbols = hardy
            .nodes
            .iter()
            .map(|node| {
                norms
                    .iter()
                    .map(|&r| radial.eval(node.sigma * r) * (1.0 - low_cutoff(r)))
                    .collect()
            })
            .collect();
        let low_symbol = norms.iter().map(|&r| low_cutoff(r)).collect();
        let menu = BallMenu::standard(&grid);
        Ok(Self {
            transform,
            tent,
            hardy,
            hardy_symbols,
            low_symbol,
            phi: OnceLock::new(),
            menu,
        })
    }

    /// Grid of `size^2` points on `[-pi, pi)^2` with `m` directions.
    pub fn standard(size: usize, m: usize, ladder: ScaleLadder) -> Result<Self> {
        Self::on_grid(
            SpatialGrid::new(2, size, 2.0 * std::f64::consts::PI)?,
            m,
            ladder,
        )
    }

    /// Spaces over `grid` with `m` directions.
    pub fn on_grid(grid: SpatialGrid, m: usize, ladder: ScaleLadder) -> Result<Self> {
        Self::new(
            Arc::new(PacketFamily::new(grid, DirectionSet::new(grid.n, m)?)?),
            ladder,
        )
    }

    /// Ball menu used for `p = inf`.
    pub fn with_menu(mut self, menu: BallMenu) -> Self {
        self.menu = menu;
        self
    }

    pub fn grid(&self) -> SpatialGrid {
        self.transform.grid()
    }

    pub fn transform(&self) -> &WaveTransform {
        &self.transform
    }

    pub fn tent(&self) -> &TentSpace {
        &self.tent
    }

    pub fn family(&self) -> &PacketFamily {
        self.transform.family()
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let grid = self.grid();
        Diagnostics {
            size: grid.size,
            length: grid.length,
            octaves: self.transform.ladder().octaves,
            per_octave: self.transform.ladder().per_octave,
            hardy_octaves: self.hardy.octaves,
            directions: self.transform.directions(),
            fallback_balls: self.tent.averager().stats().fallback_balls,
        }
    }

    fn cell(&self) -> f64 {
        self.grid().cell()
    }

    /// `|q(D) g|_p`.
    pub fn low_norm(&self, g: &GridField, p: f64) -> Result<f64> {
        let spec = grid::to_spectrum(g)?;
        Ok(self.low_part(&spec.coeffs).lp_norm(p))
    }

    fn low_part(&self, spec: &[Complex64]) -> GridField {
        let mut data: Vec<Complex64> = spec
            .iter()
            .zip(&self.low_symbol)
            .map(|(c, q)| c * q)
            .collect();
        grid::inverse_in_place(&self.grid(), &mut data);
        GridField {
            grid: self.grid(),
            values: data,
        }
    }

    /// `(int_0^inf |Psi(sigma D)(1 - q(D)) g|^2 dsigma/sigma)^{1/2}` pointwise,
    /// from the spectrum of `g`.
    fn hardy_square(&self, spec: &[Complex64]) -> Vec<f64> {
        let grid = self.grid();
        let mut acc = vec![0.0; grid.len()];
        for (node, sym) in self.hardy.nodes.iter().zip(&self.hardy_symbols) {
            let mut data: Vec<Complex64> = spec.iter().zip(sym).map(|(c, m)| c * m).collect();
            if data.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
                continue;
            }
            grid::inverse_in_place(&grid, &mut data);
            acc.iter_mut()
                .zip(&data)
                .for_each(|(a, c)| *a += node.weight * c.norm_sqr());
        }
        acc.into_iter().map(f64::sqrt).collect()
    }

    /// `|f|_{h^{s,p}} = |q(D) <D>^s f|_p + |(1 - q(D)) <D>^s f|_{H^p}`.
    pub fn local_hardy(&self, f: &GridField, p: f64, s: f64) -> Result<NormResult> {
        check_p(p)?;
        let spec = grid::to_spectrum(&bessel(f, s)?)?.coeffs;
        let low = self.low_part(&spec).lp_norm(p);
        let square = lp_of_moduli(self.hardy_square(&spec).into_iter(), p, self.cell());
        Ok(self.result(SpaceKind::LocalHardy, p, s, low, square))
    }

    fn result(&self, space: SpaceKind, p: f64, s: f64, low: f64, square: f64) -> NormResult {
        NormResult {
            space,
            p,
            s,
            value: low + square,
            low,
            square,
            weighted: None,
            mode_ratio: None,
            diagnostics: self.diagnostics(),
        }
    }

    /// `|F|_{T^p_s}` of the phase-space transform of `g` with the given
    /// symbol kind and part.
    fn tent_value(
        &self,
        g: &GridField,
        kind: SymbolKind,
        part: Part,
        p: f64,
        s: f64,
    ) -> Result<f64> {
        let src = self.transform.source(g, kind, part)?;
        if p.is_finite() {
            Ok(self.tent.lp_norm(&self.tent.lusin(&src, s)?, p))
        } else {
            self.tent.carleson_sup(&src, s, 0.0, &self.menu)
        }
    }

    /// `H^{s,p}_FIO` by definition, `|W <D>^s f|_{T^p}`, with the weighted
    /// mode `|W f|_{T^p_s}` and their ratio.
    pub fn hpfio(&self, f: &GridField, p: f64, s: f64) -> Result<NormResult> {
        check_p(p)?;
        let definition = self.tent_value(&bessel(f, s)?, SymbolKind::Psi, Part::Full, p, 0.0)?;
        let weighted = if s == 0.0 {
            definition
        } else {
            self.tent_value(f, SymbolKind::Psi, Part::Full, p, s)?
        };
        let mut r = self.result(SpaceKind::Hpfio, p, s, 0.0, definition);
        r.weighted = Some(weighted);
        r.mode_ratio = Some(ratio(definition, weighted));
        Ok(r)
    }

    /// Definition-mode `|f|_{H^{s,p}_FIO}` for several finite `p` at once.
    pub fn hpfio_norms(&self, f: &GridField, ps: &[f64], s: f64) -> Result<Vec<f64>> {
        for &p in ps {
            check_p(p)?;
        }
        let src = self
            .transform
            .source(&bessel(f, s)?, SymbolKind::Psi, Part::Full)?;
        self.tent.tent_norms(&src, ps, 0.0)
    }

    /// `|q(D) f|_p + |A_s W_h f|_p` (`C_s` in place of `A_s` for `p = inf`).
    pub fn equivalent_a(&self, f: &GridField, p: f64, s: f64) -> Result<NormResult> {
        check_p(p)?;
        let low = self.low_norm(f, p)?;
        let square = self.tent_value(f, SymbolKind::Psi, Part::High, p, s)?;
        Ok(self.result(SpaceKind::HpfioEquivalentA, p, s, low, square))
    }

    /// `|q(D) g|_p + |S_h g|_p` with `g = <D>^s f`, where `S_h` is the
    /// conical square function of the `theta` packets.
    pub fn theta_square(&self, f: &GridField, p: f64, s: f64) -> Result<NormResult> {
        check_p(p)?;
        let g = bessel(f, s)?;
        let low = self.low_norm(&g, p)?;
        let square = self.tent_value(&g, SymbolKind::Theta, Part::High, p, 0.0)?;
        Ok(self.result(SpaceKind::HpfioThetaS, p, s, low, square))
    }

    fn phi(&self) -> &[Vec<f64>] {
        self.phi.get_or_init(|| {
            let fam = self.family();
            fam.directions()
                .dirs
                .par_iter()
                .map(|omega| fam.phi_omega(omega))
                .collect()
        })
    }

    /// `(low_k, square_k)` pointwise parts of `|phi_k(D) f|_{h^{s,p}}` for
    /// every direction, reduced to `|.|_p` for each requested `p`.
    fn directional_parts(&self, f: &GridField, ps: &[f64], s: f64) -> Result<Vec<Vec<f64>>> {
        let spec = grid::to_spectrum(&bessel(f, s)?)?.coeffs;
        let cell = self.cell();
        Ok(self
            .phi()
            .par_iter()
            .map(|phi| {
                let g: Vec<Complex64> = spec.iter().zip(phi).map(|(c, m)| c * m).collect();
                let low = self.low_part(&g);
                let square = self.hardy_square(&g);
                ps.iter()
                    .map(|&p| low.lp_norm(p) + lp_of_moduli(square.iter().cloned(), p, cell))
                    .collect()
            })
            .collect())
    }

    /// `|q(D) f|_p + (int_S |phi_omega(D) f|^p_{h^{s,p}} d omega)^{1/p}`.
    pub fn directional(&self, f: &GridField, p: f64, s: f64) -> Result<NormResult> {
        check_p(p)?;
        if p.is_infinite() {
            return Err(Error::Unsupported(
                "directional characterization for p = inf".into(),
            ));
        }
        let low = self.low_norm(f, p)?;
        let parts = self.directional_parts(f, &[p], s)?;
        let square = self.sphere_average(&parts, 0, p);
        Ok(self.result(SpaceKind::HpfioDirectional, p, s, low, square))
    }

    /// Per-direction `|phi_omega(D) f|_{h^{s,p}}`.
    pub fn directional_profile(&self, f: &GridField, p: f64, s: f64) -> Result<Vec<f64>> {
        check_p(p)?;
        Ok(self
            .directional_parts(f, &[p], s)?
            .into_iter()
            .map(|v| v[0])
            .collect())
    }

    fn sphere_average(&self, parts: &[Vec<f64>], j: usize, p: f64) -> f64 {
        let w = &self.family().directions().weights;
        let sum: f64 = parts.iter().zip(w).map(|(v, w)| w * v[j].powf(p)).sum();
        sum.powf(1.0 / p)
    }

    /// Any one evaluation mode by kind.
    pub fn norm(&self, space: SpaceKind, f: &GridField, p: f64, s: f64) -> Result<NormResult> {
        match space {
            SpaceKind::LocalHardy => self.local_hardy(f, p, s),
            SpaceKind::Hpfio => self.hpfio(f, p, s),
            SpaceKind::HpfioEquivalentA => self.equivalent_a(f, p, s),
            SpaceKind::HpfioThetaS => self.theta_square(f, p, s),
            SpaceKind::HpfioDirectional => self.directional(f, p, s),
        }
    }

    /// Every `H^{s,p}_FIO` mode for each `(p, s)` in `pairs` (finite `p`),
    /// sharing the conical averages between pairs with the same `s`.
    pub fn modes(&self, f: &GridField, pairs: &[(f64, f64)]) -> Result<Vec<ModeValues>> {
        for &(p, _) in pairs {
            check_p(p)?;
            if p.is_infinite() {
                return Err(Error::Unsupported("mode web for p = inf".into()));
            }
        }
        let mut svals: Vec<f64> = Vec::new();
        for &(_, s) in pairs {
            if !svals.contains(&s) {
                svals.push(s);
            }
        }
        let ps: Vec<f64> = pairs.iter().map(|x| x.0).collect();
        let tent = &self.tent;
        let high = tent.lusin_squares(
            &self.transform.source(f, SymbolKind::Psi, Part::High)?,
            &svals,
        )?;
        let low = tent.lusin_squares(
            &self.transform.source(f, SymbolKind::Psi, Part::Low)?,
            &svals,
        )?;
        let mut out = Vec::with_capacity(pairs.len());
        for (j, &s) in svals.iter().enumerate() {
            let g = bessel(f, s)?;
            let definition = if s == 0.0 {
                add_sqrt(&high[j], &low[j])
            } else {
                let h = tent.lusin_squares(
                    &self.transform.source(&g, SymbolKind::Psi, Part::High)?,
                    &[0.0],
                )?;
                let l = tent.lusin_squares(
                    &self.transform.source(&g, SymbolKind::Psi, Part::Low)?,
                    &[0.0],
                )?;
                add_sqrt(&h[0], &l[0])
            };
            let weighted = add_sqrt(&high[j], &low[j]);
            let a_high = sqrt_slice(&high[j]);
            let theta = tent.lusin_squares(
                &self.transform.source(&g, SymbolKind::Theta, Part::High)?,
                &[0.0],
            )?;
            let theta = sqrt_slice(&theta[0]);
            let parts = self.directional_parts(f, &ps, s)?;
            for (i, &(p, _)) in pairs.iter().enumerate().filter(|(_, x)| x.1 == s) {
                let low_f = self.low_norm(f, p)?;
                out.push((
                    i,
                    ModeValues {
                        p,
                        s,
                        definition: tent.lp_norm(&definition, p),
                        weighted: tent.lp_norm(&weighted, p),
                        equivalent_a: low_f + tent.lp_norm(&a_high, p),
                        theta: self.low_norm(&g, p)? + tent.lp_norm(&theta, p),
                        directional: low_f + self.sphere_average(&parts, i, p),
                    },
                ));
            }
        }
        out.sort_by_key(|x| x.0);
        Ok(out.into_iter().map(|x| x.1).collect())
    }

    /// Sobolev sandwich on a family `f_sigma`: the norms in
    /// `h^{s+s(p),p}`, `H^{s,p}_FIO` and `h^{s-s(p),p}` per `sigma`, the two
    /// one-sided ratios and the log-log slopes of the outer norms.
    pub fn embedding_experiment(
        &self,
        family: &[(f64, GridField)],
        p: f64,
        s: f64,
    ) -> Result<EmbeddingReport> {
        let sp = sp_exponent(self.grid().n, p)?;
        if family.len() < 2 {
            return Err(Error::InvalidInput(
                "embedding experiment needs at least two scales".into(),
            ));
        }
        let mut rows = Vec::new();
        for (sigma, f) in family {
            let upper = self.local_hardy(f, p, s + sp)?.value;
            let fio = self.hpfio(f, p, s)?.value;
            let lower = self.local_hardy(f, p, s - sp)?.value;
            rows.push(EmbeddingRow {
                sigma: *sigma,
                upper,
                fio,
                lower,
                upper_ratio: fio / upper,
                lower_ratio: lower / fio,
            });
        }
        let sig: Vec<f64> = rows.iter().map(|r| r.sigma).collect();
        let slope_upper = loglog_slope(&sig, &rows.iter().map(|r| r.upper).collect::<Vec<_>>());
        let slope_lower = loglog_slope(&sig, &rows.iter().map(|r| r.lower).collect::<Vec<_>>());
        Ok(EmbeddingReport {
            p,
            s,
            sp,
            max_upper_ratio: rows.iter().map(|r| r.upper_ratio).fold(0.0, f64::max),
            max_lower_ratio: rows.iter().map(|r| r.lower_ratio).fold(0.0, f64::max),
            slope_upper,
            slope_lower,
            slope_gap: slope_lower - slope_upper,
            rows,
        })
    }
}

/// Coherent packets `F^{-1} psi_{omega, sigma}` at one angle, one per scale
/// (unit `L^2`).
pub fn coherent_family(
    grid: &SpatialGrid,
    angle: f64,
    sigmas: &[f64],
) -> Result<Vec<(f64, GridField)>> {
    sigmas
        .iter()
        .map(|&sigma| {
            Ok((
                sigma,
                make_test_field(grid, TestFieldKind::CoherentPacket { angle, sigma }, 0)?,
            ))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingRow {
    pub sigma: f64,
    /// `|f|_{h^{s+s(p),p}}`.
    pub upper: f64,
    /// `|f|_{H^{s,p}_FIO}`.
    pub fio: f64,
    /// `|f|_{h^{s-s(p),p}}`.
    pub lower: f64,
    pub upper_ratio: f64,
    pub lower_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingReport {
    pub p: f64,
    pub s: f64,
    pub sp: f64,
    pub rows: Vec<EmbeddingRow>,
    pub max_upper_ratio: f64,
    pub max_lower_ratio: f64,
    pub slope_upper: f64,
    pub slope_lower: f64,
    /// `slope_lower - slope_upper`, equal to `2 s(p)` for pure `<D>` scaling.
    pub slope_gap: f64,
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0) {
        return Err(Error::Parameter(format!(
            "exponent p = {p} must be positive"
        )));
    }
    Ok(())
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        1.0
    } else {
        a / b
    }
}

fn sqrt_slice(a: &Slice) -> Slice {
    a.iter()
        .map(|s| s.iter().map(|v| v.max(0.0).sqrt()).collect())
        .collect()
}

fn add_sqrt(a: &Slice, b: &Slice) -> Slice {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(u, v)| (u + v).max(0.0).sqrt())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{make_test_field, TestFieldKind};

    fn spaces() -> FunctionSpaces {
        FunctionSpaces::standard(32, 16, ScaleLadder::new(3, 2).unwrap()).unwrap()
    }

    #[test]
    fn loss_exponent_values() {
        assert_eq!(sp_exponent(2, 2.0).unwrap(), 0.0);
        assert_eq!(sp_exponent(2, 1.0).unwrap(), 0.25);
        assert_eq!(sp_exponent(2, f64::INFINITY).unwrap(), 0.25);
        assert!(sp_exponent(2, 0.0).is_err());
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(low_cutoff(2.0), 1.0);
        assert_eq!(low_cutoff(0.0), 1.0);
        assert_eq!(low_cutoff(3.0), 0.0);
        assert!(low_cutoff(2.5) > 0.0 && low_cutoff(2.5) < 1.0);
    }

    #[test]
    fn low_frequency_field_has_no_square_part() {
        let sp = spaces();
        let g = sp.grid();
        let f = GridField::from_fn(g, |x| Complex64::new(1.0 + 0.3 * x[0].cos(), 0.0));
        let r = sp.local_hardy(&f, 1.0, 0.0).unwrap();
        assert!(r.square <= 1e-12 * r.value);
        assert!((r.value - f.lp_norm(1.0)).abs() < 1e-12 * r.value);
        let c = GridField::from_fn(g, |_| Complex64::new(2.0, 0.0));
        let a = sp.equivalent_a(&c, 1.0, 0.0).unwrap();
        assert!(a.square <= 1e-12 * a.value);
        assert!((a.value - c.lp_norm(1.0)).abs() < 1e-12 * a.value);
    }

    #[test]
    fn shift_and_homogeneity_are_exact() {
        let sp = spaces();
        let f = make_test_field(&sp.grid(), TestFieldKind::GaussianBump, 2).unwrap();
        let a = sp.local_hardy(&f, 0.7, 0.8).unwrap().value;
        let b = sp
            .local_hardy(&bessel(&f, 0.8).unwrap(), 0.7, 0.0)
            .unwrap()
            .value;
        assert_eq!(a, b);
        let two = f.scale(Complex64::new(2.0, 0.0));
        for kind in [
            SpaceKind::Hpfio,
            SpaceKind::HpfioEquivalentA,
            SpaceKind::HpfioThetaS,
            SpaceKind::HpfioDirectional,
        ] {
            let x = sp.norm(kind, &f, 2.0 / 3.0, 0.0).unwrap().value;
            let y = sp.norm(kind, &two, 2.0 / 3.0, 0.0).unwrap().value;
            assert!((y / x - 2.0).abs() < 1e-12, "{kind:?}");
        }
    }

    #[test]
    fn zero_field_vanishes_in_every_mode() {
        let sp = spaces();
        let z = GridField::zeros(sp.grid());
        for kind in [
            SpaceKind::LocalHardy,
            SpaceKind::Hpfio,
            SpaceKind::HpfioEquivalentA,
            SpaceKind::HpfioThetaS,
            SpaceKind::HpfioDirectional,
        ] {
            assert_eq!(sp.norm(kind, &z, 1.0, 0.0).unwrap().value, 0.0);
        }
        assert!(matches!(
            sp.directional(&z, f64::INFINITY, 0.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn mode_web_matches_single_evaluations() {
        let sp = spaces();
        let f = make_test_field(&sp.grid(), TestFieldKind::BandLimitedRandom, 1).unwrap();
        let web = sp.modes(&f, &[(1.0, 0.0), (2.0 / 3.0, 1.0)]).unwrap();
        for m in &web {
            let h = sp.hpfio(&f, m.p, m.s).unwrap();
            assert!((h.value - m.definition).abs() <= 1e-12 * h.value);
            assert!((h.weighted.unwrap() - m.weighted).abs() <= 1e-12 * m.weighted);
            let a = sp.equivalent_a(&f, m.p, m.s).unwrap().value;
            assert!((a - m.equivalent_a).abs() <= 1e-12 * a);
            let t = sp.theta_square(&f, m.p, m.s).unwrap().value;
            assert!((t - m.theta).abs() <= 1e-12 * t);
            let d = sp.directional(&f, m.p, m.s).unwrap().value;
            assert!((d - m.directional).abs() <= 1e-12 * d);
        }
    }

    #[test]
    fn two_norm_is_close_to_l2() {
        let sp = spaces();
        let f = make_test_field(&sp.grid(), TestFieldKind::GaussianBump, 0).unwrap();
        let h = sp.hpfio(&f, 2.0, 0.0).unwrap().value;
        let defect = sp.transform().isometry_defect(&f).unwrap();
        assert!(((h * h) - 1.0).abs() <= defect + 1e-9, "{h} {defect}");
        let lh = sp.local_hardy(&f, 2.0, 0.0).unwrap().value;
        assert!((0.5..=2.0).contains(&lh));
    }
}
