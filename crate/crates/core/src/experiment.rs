//! Reproducible experiment runs: a validated configuration, the acceptance
//! suites built on the library, and report bundles whose every number
//! carries the grid, ladder and seed it was measured with.

use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::standard_family;
use crate::fio::{
    apply_fio, apply_fio_direct, halfwave_growth_experiment, FioDescriptor, GrowthSetup,
    PhaseFunction, SymbolFunction, Verdict as GrowthVerdict, DIRECT_BUDGET,
};
use crate::geometry::{ball_volume_estimate, DirectionSet};
use crate::grid::SpatialGrid;
use crate::maximal_verify::maximal_domination_check;
use crate::molecules::{synthesis_experiment, MoleculeSpec};
use crate::packets::PacketFamily;
use crate::quad::loglog_slope;
use crate::spaces::{coherent_family, sp_exponent, FunctionSpaces, ModeValues};
use crate::tent::{TentParams, TentSpace};
use crate::transform::{Part, PhaseSpaceField, ScaleLadder, WaveTransform};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_VAR: &str = "FIOH_OUTPUT_DIR";

/// `(p, s)` pairs of the norm-equivalence web.
pub const WEB_PAIRS: [(f64, f64); 5] = [
    (0.5, 0.0),
    (2.0 / 3.0, 0.0),
    (1.0, 0.0),
    (1.0, 1.0),
    (2.0, 0.0),
];

/// Scales of the coherent packets in the Sobolev sandwich.
pub const SOBOLEV_SIGMAS: [f64; 5] = [0.25, 0.125, 0.0625, 0.03125, 0.015625];
/// Direction of the coherent packets in the Sobolev sandwich.
pub const SOBOLEV_ANGLE: f64 = 0.3;

/// Scale range of the random molecules.
pub const MOLECULE_TAU: (f64, f64) = (0.25, 2.0);
pub const MOLECULE_COUNTS: [usize; 3] = [1, 8, 32];

pub const MAXIMAL_LAMBDA: f64 = 0.5;
/// Scale of the theta packet used as the maximal-inequality test field.
pub const MAXIMAL_SIGMA: f64 = 0.125;

/// Largest radius of the random tent atoms.
pub const ATOM_MAX_RADIUS: f64 = 2.0;

/// Grid size and direction count of the direct-quadrature comparison.
pub const FIO_SIZE: usize = 64;
pub const FIO_DIRECTIONS: usize = 16;
pub const FIO_FIELDS: usize = 5;
/// Phase samples used to validate the phases of the comparison.
pub const FIO_PHASE_SAMPLES: usize = 2000;

/// Volume radii `2^{-5}..2^{-1}` and `2..8`, half an octave apart.
pub fn volume_radii() -> (Vec<f64>, Vec<f64>) {
    let small = (0..=8).map(|k| 2f64.powf(-5.0 + 0.5 * k as f64)).collect();
    let large = (0..=4).map(|k| 2f64.powf(1.0 + 0.5 * k as f64)).collect();
    (small, large)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Isometry,
    Reconstruction,
    L2Norm,
    NormWeb,
    Sobolev,
    TentAtoms,
    Molecules,
    Maximal,
    Halfwave,
    Fio,
    Volume,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::Isometry,
        Suite::Reconstruction,
        Suite::L2Norm,
        Suite::NormWeb,
        Suite::Sobolev,
        Suite::TentAtoms,
        Suite::Molecules,
        Suite::Maximal,
        Suite::Halfwave,
        Suite::Fio,
        Suite::Volume,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Isometry => "isometry",
            Suite::Reconstruction => "reconstruction",
            Suite::L2Norm => "l2-norm",
            Suite::NormWeb => "norm-web",
            Suite::Sobolev => "sobolev",
            Suite::TentAtoms => "tent-atoms",
            Suite::Molecules => "molecules",
            Suite::Maximal => "maximal",
            Suite::Halfwave => "halfwave",
            Suite::Fio => "fio",
            Suite::Volume => "volume",
        }
    }

    /// Suites that compare the configured grid with the coarser one.
    fn refines(&self) -> bool {
        matches!(self, Suite::NormWeb | Suite::Sobolev | Suite::Maximal)
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown suite '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub size: usize,
    pub length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 2,
            size: 256,
            length: 2.0 * PI,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderConfig {
    pub octaves: usize,
    pub per_octave: usize,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            octaves: 5,
            per_octave: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomConfig {
    pub count: usize,
    /// Coarse and fine grid size of the phase-space atoms.
    pub sizes: [usize; 2],
    pub directions: usize,
}

impl Default for AtomConfig {
    fn default() -> Self {
        Self {
            count: 50,
            sizes: [32, 64],
            directions: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub ladder: LadderConfig,
    pub directions: usize,
    /// Directions of the pointwise phase-space scans (molecules, maximal).
    pub scan_directions: usize,
    pub seeds: Vec<u64>,
    pub suites: Vec<Suite>,
    pub output_dir: String,
    /// Grid size compared against `grid.size` by the refinement suites.
    pub refine_size: usize,
    /// Run suites on all cores; numeric output is then not bit-reproducible.
    pub parallel: bool,
    pub atoms: AtomConfig,
    pub volume_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            ladder: LadderConfig::default(),
            directions: 64,
            scan_directions: 32,
            seeds: (0..10).collect(),
            suites: Vec::new(),
            output_dir: "fioh-out".into(),
            refine_size: 128,
            parallel: false,
            atoms: AtomConfig::default(),
            volume_samples: 1_000_000,
        }
    }
}

impl ExperimentConfig {
    /// Parses a JSON configuration; absent keys take their defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn load(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Replaces `output_dir` by the value of [`OUTPUT_DIR_VAR`] when set.
    pub fn with_env_override(mut self) -> Self {
        if let Ok(dir) = std::env::var(OUTPUT_DIR_VAR) {
            if !dir.is_empty() {
                self.output_dir = dir;
            }
        }
        self
    }

    pub fn grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.grid.n, self.grid.size, self.grid.length)
    }

    pub fn refine_grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.grid.n, self.refine_size, self.grid.length)
    }

    pub fn ladder(&self) -> Result<ScaleLadder> {
        ScaleLadder::new(self.ladder.octaves, self.ladder.per_octave)
    }

    /// Every problem with the configuration, or `Ok` when there is none.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.grid.n != 2 {
            errors.push(format!(
                "grid.n = {} (only n = 2 is supported)",
                self.grid.n
            ));
        }
        let grid = match self.grid() {
            Ok(g) => Some(g),
            Err(e) => {
                errors.push(format!("grid: {e}"));
                None
            }
        };
        let ladder = match self.ladder() {
            Ok(l) => Some(l),
            Err(e) => {
                errors.push(format!("ladder: {e}"));
                None
            }
        };
        if let (Some(g), Some(l)) = (&grid, &ladder) {
            if let Err(e) = l.check_resolvable(g) {
                errors.push(format!("ladder on grid: {e}"));
            }
        }
        if self.directions < 4 {
            errors.push(format!(
                "directions = {} (need at least 4)",
                self.directions
            ));
        }
        if self.scan_directions < 4 {
            errors.push(format!(
                "scan_directions = {} (need at least 4)",
                self.scan_directions
            ));
        }
        if self.output_dir.is_empty() {
            errors.push("output_dir is empty".into());
        }
        let needs_seeds = self
            .suites
            .iter()
            .any(|s| matches!(s, Suite::Reconstruction | Suite::Molecules | Suite::Volume));
        if needs_seeds && self.seeds.is_empty() {
            errors.push("seeds is empty but a requested suite draws random samples".into());
        }
        if self.suites.iter().any(Suite::refines) {
            if self.refine_size >= self.grid.size {
                errors.push(format!(
                    "refine_size = {} must be below grid.size = {}",
                    self.refine_size, self.grid.size
                ));
            }
            match (self.refine_grid(), &ladder) {
                (Ok(g), Some(l)) => {
                    if let Err(e) = l.check_resolvable(&g) {
                        errors.push(format!("ladder on refine grid: {e}"));
                    }
                }
                (Err(e), _) => errors.push(format!("refine grid: {e}")),
                _ => {}
            }
        }
        if self.suites.contains(&Suite::TentAtoms) {
            if self.atoms.count < 2 {
                errors.push(format!(
                    "atoms.count = {} (need at least 2)",
                    self.atoms.count
                ));
            }
            if self.atoms.directions < 4 {
                errors.push(format!(
                    "atoms.directions = {} (need at least 4)",
                    self.atoms.directions
                ));
            }
            for size in self.atoms.sizes {
                let resolved = SpatialGrid::new(2, size, self.grid.length)
                    .and_then(|g| ScaleLadder::resolving(&g, self.ladder.per_octave.max(1)));
                if let Err(e) = resolved {
                    errors.push(format!("atoms grid {size}: {e}"));
                }
            }
        }
        if self.suites.contains(&Suite::Volume) && self.volume_samples < 1000 {
            errors.push(format!(
                "volume_samples = {} (need at least 1000)",
                self.volume_samples
            ));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Requested suites in canonical order without repeats.
    pub fn ordered_suites(&self) -> Vec<Suite> {
        let mut suites = self.suites.clone();
        suites.sort();
        suites.dedup();
        suites
    }
}

/// One table cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Num(f64),
    Text(String),
    Flag(bool),
}

impl Value {
    /// Text form with 12 significant digits for floating-point values.
    pub fn render(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Num(v) if v.is_nan() => "nan".into(),
            Value::Num(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Value::Num(v) => format!("{v:.11e}"),
            Value::Text(s) => s.clone(),
            Value::Flag(b) => b.to_string(),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.into())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Flag(v)
    }
}

/// Grid, ladder, direction count and seed behind a measured number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub size: usize,
    pub length: f64,
    pub octaves: usize,
    pub per_octave: usize,
    pub directions: usize,
    pub seed: Option<u64>,
}

impl Provenance {
    pub const COLUMNS: [&'static str; 6] = [
        "size",
        "length",
        "octaves",
        "per_octave",
        "directions",
        "seed",
    ];

    pub fn new(grid: &SpatialGrid, ladder: &ScaleLadder, directions: usize) -> Self {
        Self {
            size: grid.size,
            length: grid.length,
            octaves: ladder.octaves,
            per_octave: ladder.per_octave,
            directions,
            seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn values(&self) -> Vec<Value> {
        vec![
            self.size.into(),
            self.length.into(),
            self.octaves.into(),
            self.per_octave.into(),
            self.directions.into(),
            self.seed.map_or(Value::Text("none".into()), Value::from),
        ]
    }

    pub fn label(&self) -> String {
        let mut s = format!(
            "N={} L={:.6} J={} Q={} M={}",
            self.size, self.length, self.octaves, self.per_octave, self.directions
        );
        if let Some(seed) = self.seed {
            s.push_str(&format!(" seed={seed}"));
        }
        s
    }
}

/// A table whose leading columns are the provenance columns.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self {
            columns: Provenance::COLUMNS
                .iter()
                .chain(columns)
                .map(|c| c.to_string())
                .collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, prov: &Provenance, values: Vec<Value>) {
        let mut row = prov.values();
        row.extend(values);
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Values of one column.
    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

/// A pass/fail decision on one measured quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckVerdict {
    pub suite: Suite,
    pub check: String,
    pub measured: f64,
    pub relation: Relation,
    pub limit: f64,
    pub passed: bool,
    pub provenance: String,
}

impl CheckVerdict {
    fn new(
        suite: Suite,
        check: &str,
        measured: f64,
        relation: Relation,
        limit: f64,
        prov: String,
    ) -> Self {
        let passed = match relation {
            Relation::AtMost => measured <= limit,
            Relation::AtLeast => measured >= limit,
        };
        Self {
            suite,
            check: check.into(),
            measured,
            relation,
            limit,
            passed,
            provenance: prov,
        }
    }

    fn at_most(suite: Suite, check: &str, measured: f64, limit: f64, prov: String) -> Self {
        Self::new(suite, check, measured, Relation::AtMost, limit, prov)
    }

    fn at_least(suite: Suite, check: &str, measured: f64, limit: f64, prov: String) -> Self {
        Self::new(suite, check, measured, Relation::AtLeast, limit, prov)
    }

    pub fn line(&self) -> String {
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        format!(
            "{} {}: {}: {:.6e} {rel} {:.6e} [{}]",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite.name(),
            self.check,
            self.measured,
            self.limit,
            self.provenance
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub table: Table,
    pub verdicts: Vec<CheckVerdict>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvironmentStamp {
    pub crate_version: String,
    pub os: String,
    pub arch: String,
    pub threads: usize,
    /// Whether numeric output is bit-reproducible (single worker).
    pub deterministic: bool,
    /// Seconds since the Unix epoch when the run started.
    pub timestamp: u64,
}

impl EnvironmentStamp {
    fn capture(threads: usize, deterministic: bool) -> Self {
        Self {
            crate_version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            threads,
            deterministic,
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportBundle {
    pub config: ExperimentConfig,
    pub environment: EnvironmentStamp,
    pub suites: Vec<SuiteReport>,
}

impl ReportBundle {
    pub fn verdicts(&self) -> impl Iterator<Item = &CheckVerdict> {
        self.suites.iter().flat_map(|s| s.verdicts.iter())
    }

    pub fn passed(&self) -> bool {
        self.verdicts().all(|v| v.passed)
    }
}

/// Validates `config` and runs its suites in canonical order, on a single
/// worker unless `config.parallel` is set.
pub fn run(config: &ExperimentConfig) -> Result<ReportBundle> {
    config.validate()?;
    let threads = if config.parallel {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        1
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Construction(format!("worker pool: {e}")))?;
    let environment = EnvironmentStamp::capture(threads, !config.parallel);
    let suites = pool.install(|| {
        config
            .ordered_suites()
            .into_iter()
            .map(|s| run_suite(config, s))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ReportBundle {
        config: config.clone(),
        environment,
        suites,
    })
}

/// Runs one suite on the calling thread's pool without validating.
pub fn run_suite(config: &ExperimentConfig, suite: Suite) -> Result<SuiteReport> {
    match suite {
        Suite::Isometry => isometry(config),
        Suite::Reconstruction => reconstruction(config),
        Suite::L2Norm => l2_norm(config),
        Suite::NormWeb => norm_web(config),
        Suite::Sobolev => sobolev(config),
        Suite::TentAtoms => tent_atoms(config),
        Suite::Molecules => molecules(config),
        Suite::Maximal => maximal(config),
        Suite::Halfwave => halfwave(config),
        Suite::Fio => fio(config),
        Suite::Volume => volume(config),
    }
}

fn packet_family(grid: SpatialGrid, directions: usize) -> Result<Arc<PacketFamily>> {
    Ok(Arc::new(PacketFamily::new(
        grid,
        DirectionSet::new(grid.n, directions)?,
    )?))
}

/// Ladders with `Q`, `2Q` and `4Q` steps per octave.
fn refined_ladders(config: &ExperimentConfig) -> Result<Vec<ScaleLadder>> {
    [1, 2, 4]
        .into_iter()
        .map(|k| ScaleLadder::new(config.ladder.octaves, k * config.ladder.per_octave))
        .collect()
}

/// Largest over smallest of two positive constants.
fn fold_ratio(a: f64, b: f64) -> f64 {
    (a / b).max(b / a)
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

/// Relative isometry defect on the standard family for `Q`, `2Q`, `4Q`.
fn isometry(config: &ExperimentConfig) -> Result<SuiteReport> {
    let suite = Suite::Isometry;
    let grid = config.grid()?;
    let family = packet_family(grid, config.directions)?;
    let fields = standard_family(&grid)?;
    let mut table = Table::new(&["field", "defect"]);
    let mut verdicts = Vec::new();
    let mut history: Vec<Vec<f64>> = Vec::new();
    let ladders = refined_ladders(config)?;
    for ladder in &ladders {
        let t = WaveTransform::new(family.clone(), ladder.clone())?;
        let prov = Provenance::new(&grid, ladder, config.directions);
        let mut defects = Vec::new();
        for (m, f) in &fields {
            let d = t.isometry_defect(f)?;
            table.push(
                &prov.with_seed(m.seed),
                vec![m.label.as_str().into(), d.into()],
            );
            defects.push(d);
        }
        verdicts.push(CheckVerdict::at_most(
            suite,
            "max relative defect",
            max_of(defects.iter().cloned()),
            1e-2,
            prov.label(),
        ));
        history.push(defects);
    }
    let increases = (0..fields.len())
        .filter(|&i| history.windows(2).any(|w| w[1][i] >= w[0][i]))
        .count();
    verdicts.push(CheckVerdict::at_most(
        suite,
        "fields whose defect does not strictly decrease in Q",
        increases as f64,
        0.0,
        ladder_span(&grid, &ladders, config.directions),
    ));
    Ok(SuiteReport {
        suite,
        table,
        verdicts,
    })
}

fn ladder_span(grid: &SpatialGrid, ladders: &[ScaleLadder], directions: usize) -> String {
    let qs: Vec<String> = ladders.iter().map(|l| l.per_octave.to_string()).collect();
    format!(
        "N={} L={:.6} J={} Q={} M={directions}",
        grid.size,
        grid.length,
        ladders[0].octaves,
        qs.join(",")
    )
}

/// `|V W f - f| / |f|` on the standard family for `Q`, `2Q`, `4Q`, and the
/// adjointness identity `<W f, G> = <f, V G>` on random pairs.
fn reconstruction(config: &ExperimentConfig) -> Result<SuiteReport> {
    let suite = Suite::Reconstruction;
    let grid = config.grid()?;
    let family = packet_family(grid, config.directions)?;
    let fields = standard_family(&grid)?;
    let mut table = Table::new(&["field", "quantity", "value"]);
    let mut verdicts = Vec::new();
    let mut history: Vec<Vec<f64>> = Vec::new();
    let ladders = refined_ladders(config)?;
    for ladder in &ladders {
        let t = WaveTransform::new(family.clone(), ladder.clone())?;
        let prov = Provenance::new(&grid, ladder, config.directions);
        let mut errors = Vec::new();
        for (m, f) in &fields {
            let e = t.reconstruct(f)?.rel_l2_error(f);
            table.push(
                &prov.with_seed(m.seed),
                vec![m.label.as_str().into(), "reconstruction".into(), e.into()],
            );
            errors.push(e);
        }
        history.push(errors);
    }
    let base = Provenance::new(&grid, &ladders[0], config.directions);
    verdicts.push(CheckVerdict::at_most(
        suite,
        "max relative reconstruction error",
        max_of(history[0].iter().cloned()),
        1e-2,
        base.label(),
    ));
    let increases = (0..fields.len())
        .filter(|&i| history.windows(2).any(|w| w[1][i] >= w[0][i]))
        .count();
    verdicts.push(CheckVerdict::at_most(
        suite,
        "fields whose error does not strictly decrease in Q",
        increases as f64,
        0.0,
        ladder_span(&grid, &ladders, config.directions),
    ));

    // Adjointness on materialized phase-space fields over a small grid.
    let small = SpatialGrid::new(2, 32, config.grid.length)?;
    let ladder = ScaleLadder::new(3, 2)?;
    let t = WaveTransform::new(packet_family(small, 16)?, ladder.clone())?;
    let prov = Provenance::new(&small, &ladder, 16);
    let mut worst: f64 = 0.0;
    for &seed in &config.seeds {
        let f = crate::families::make_test_field(
            &small,
            crate::families::TestFieldKind::BandLimitedRandom,
            seed,
        )?;
        let g = PhaseSpaceField::random(small, ladder.clone(), 16, seed.wrapping_add(1000));
        let lhs = t.analyze(&f, Part::Full)?.inner(&g)?;
        let rhs = f.inner(&t.synthesize(&g)?);
        let defect = (lhs - rhs).norm() / lhs.norm();
        table.push(
            &prov.with_seed(seed),
            vec![
                "band-limited-random".into(),
                "adjointness".into(),
                defect.into(),
            ],
        );
        worst = worst.max(defect);
    }
    verdicts.push(CheckVerdict::at_most(
        suite,
        "max relative adjointness defect",
        worst,
        1e-10,
        prov.label(),
    ));
    Ok(SuiteReport {
        suite,
        table,
        verdicts,
    })
}

/// `| |f|_{H^{0,2}_FIO} - |f|_2 | / |f|_2` on the standard family.
fn l2_norm(config: &ExperimentConfig) -> Result<SuiteReport> {
    let suite = Suite::L2Norm;
    let grid = config.grid()?;
    let ladder = config.ladder()?;
    let spaces = FunctionSpaces::on_grid(grid, config.directions, ladder.clone())?;
    let prov = Provenance::new(&grid, &ladder, config.directions);
    let mut table = Table::new(&["field", "l2", "hpfio", "relative_gap"]);
    let mut worst: f64 = 0.0;
    for (m, f) in standard_family(&grid)? {
        let l2 = f.l2_norm();
        let h = spaces.hpfio(&f, 2.0, 0.0)?.value;
        let gap = (h - l2).abs() / l2;
        table.push(
            &prov.with_seed(m.seed),
            vec![m.label.into(), l2.into(), h.into(), gap.into()],
        );
        worst = worst.max(gap);
    }
    Ok(SuiteReport {
        suite,
        table,
        verdicts: vec![CheckVerdict::at_most(
            suite,
            "max relative gap to the L2 norm",
            worst,
            2e-2,
            prov.label(),
        )],
    })
}

/// `max_f v_a(f) / v_b(f)` for every ordered pair of modes, per `(p, s)`.
fn mode_constants(values: &[Vec<ModeValues>]) -> Vec<f64> {
    let mut out = Vec::new();
    for j in 0..WEB_PAIRS.len() {
        for a in 0..5 {
            for b in 0..5 {
                if a != b {
                    out.push(max_of(values.iter().map(|v| {
                        let x = v[j].values();
                        x[a] / x[b]
                    })));
                }
            }
        }
    }
    out
}

/// All `H^{s,p}_FIO` evaluation modes on the standard family at the coarse
/// and the configured grid.
fn norm_web(config: &ExperimentConfig) -> Result<SuiteReport> {
    let suite = Suite::NormWeb;
    let ladder = config.ladder()?;
    let mut columns = vec!["field", "p", "s"];
    columns.extend(ModeValues::NAMES);
    columns.push("spread");
    let mut table = Table::new(&columns);
    let mut verdicts = Vec::new();
    let mut constants = Vec::new();
    for grid in [config.refine_grid()?, config.grid()?] {
        let spaces = FunctionSpaces::on_grid(grid, config.directions, ladder.clone())?;
        let prov = Provenance::new(&grid, &ladder, config.directions);
        let mut values = Vec::new();
        for (m, f) in standard_family(&grid)? {
            let modes = spaces.modes(&f, &WEB_PAIRS)?;
            for mv in &modes {
                let mut row: Vec<Value> = vec![m.label.as_str().into(), mv.p.into(), mv.s.into()];
                row.extend(mv.values().iter().map(|&v| Value::from(v)));
                row.push(mv.spread().into());
                table.push(&prov.with_seed(m.seed), row);
            }
            values.push(modes);
        }
        verdicts.push(CheckVerdict::at_most(
            suite,
            "max pairwise mode ratio",
            max_of(values.iter().flatten().map(ModeValues::spread)),
            100.0,
            prov.label(),
        ));
        constants.push(mode_constants(&values));
    }
    verdicts.push(CheckVerdict::at_most(
        suite,
        "max change of an equivalence constant under refinement",
        max_of(
            constants[0]
                .iter()
                .zip(&constants[1])
                .map(|(&a, &b)| fold_ratio(a, b)),
        ),
        2.0,
        format!("N={}->{}", config.refine_size, config.grid.size),
    ));
    Ok(SuiteReport {
        suite,
        table,
        verdicts,
    })
}

/// Coherent packets whose frequency support lies below the Nyquist limit.
fn resolved_sigmas(grid: &SpatialGrid) -> Vec<f64> {
    SOBOLEV_SIGMAS
        .iter()
        .cloned()
        .filter(|&s| 2.0 / s <= grid.nyquist())
        .collect()
}

/// The Sobolev sandwich on coherent packets for `p = 2/3` and `p = 1`.
fn sobolev(config: &ExperimentConfig) -> Result<SuiteReport> {
    let suite = Suite::Sobolev;
    let mut table = Table::new(&[
        "p",
        "sigma",
        "h_upper",
        "hpfio",
        "h_lower",
        "upper_ratio",
        "lower_ratio",
    ]);
    let mut verdicts = Vec::new();
    let ps = [2.0 / 3.0, 1.0];
    let mut constants = Vec::new();
    let grids = [config.refine_grid()?, config.grid()?];
    for (gi, grid) in grids.iter().enumerate() {
        let ladder = ScaleLadder::resolving(grid, config.ladder.per_octave)?;
        let spaces = FunctionSpaces::on_grid(*grid, config.directions, ladder.clone())?;
        let prov = Provenance::new(grid, &ladder, config.directions);
        let packets = coherent_family(grid, SOBOLEV_ANGLE, &resolved_sigmas(grid))?;
        let mut per_p = Vec::new();
        for &p in &ps {
            let report = spaces.embedding_experiment(&packets, p, 0.0)?;
            for r in &report.rows {
                table.push(
                    &prov,
                    vec![
                        p.into(),
                        r.sigma.into(),
                        r.upper.into(),
                        r.fio.into(),
                        r.lower.into(),
                        r.upper_ratio.into(),
                        r.lower_ratio.into(),
                    ],
                );
            }
            let finite = report.max_upper_ratio.is_finite() && report.max_lower_ratio.is_finite();
            verdicts.push(CheckVerdict::at_most(
                suite,
                &format!("p={p:.4}: non-finite one-sided constants"),
                if finite { 0.0 } else { 1.0 },
                0.0,
                prov.label(),
            ));
            if gi == grids.len() - 1 {
                let sp = sp_exponent(grid.n, p)?;
                verdicts.push(CheckVerdict::at_most(
                    suite,
                    &format!("p={p:.4}: |slope gap - 2 s(p)|"),
                    (report.slope_gap - 2.0 * sp).abs(),
                    0.1,
                    prov.label(),
                ));
            }
            per_p.push((report.max_upper_ratio, report.max_lower_ratio));
        }
        constants.push(per_p);
    }
    for (j, &p) in ps.iter().enumerate() {
        let (a, b) = (constants[0][j], constants[1][j]);
        verdicts.push(CheckVerdict::at_most(
            suite,
            &format!("p={p:.4}: change of the upper constant under refinement"),
            fold_ratio(a.0, b.0),
            2.0,
            format!("N={}->{}", config.refine_size, config.grid.size),
        ));
        verdicts.push(CheckVerdict::at_most(
            suite,
            &format!("p={p:.4}: change of the lower constant under refinement"),
            fold_ratio(a.1, b.1),
            2.0,
            format!("N={}->{}", config.refine_size, config.grid.size),
        ));
    }
    Ok(SuiteReport {
        suite,
        table,
        verdicts,
    })
}

/// `T^p` quasi-norms of random atoms on two grids and the `p`-triangle
/// inequality on consecutive pairs.
fn tent_atoms(config: &ExperimentConfig) -> Result<SuiteReport> {
    let suite = Suite::TentAtoms;
    let mut table = Table::new(&["p", "radius", "tent_norm", "valid", "triangle_slack"]);
    let mut verdicts = Vec::new();
    let ps = [0.5, 2.0 / 3.0, 1.0];
    let mut maxima = Vec::new();
    for size in config.atoms.sizes {
        let grid = SpatialGrid::new(2, size, config.grid.length)?;
        let ladder = ScaleLadder::resolving(&grid, config.ladder.per_octave)?;
        let dirs = DirectionSet::new(2, config.atoms.directions)?;
        let tent = TentSpace::new(grid, dirs);
        let prov = Provenance::new(&grid, &ladder, config.atoms.directions);
        let mut per_p = Vec::new();
        for &p in &ps {
            let params = TentParams::new(p, 0.0)?;
            let mut norms = Vec::new();
            let mut invalid = 0usize;
            let mut slack: f64 = f64::NEG_INFINITY;
            let mut previous: Option<(PhaseSpaceField, f64)> = None;
            for k in 0..config.atoms.count as u64 {
                let atom = tent.random_atom(&ladder, p, 0.0, ATOM_MAX_RADIUS, k)?;
                let valid = tent.atom_validate(&atom, p, 0.0)?.valid;
                invalid += usize::from(!valid);
                let value = tent.tent_norm(&atom.field, &params)?.value;
                let excess = match &previous {
                    Some((prev, prev_norm)) => {
                        let sum = tent.tent_norm(&prev.add(&atom.field)?, &params)?.value;
                        let bound = prev_norm.powf(p) + value.powf(p);
                        (sum.powf(p) - bound) / bound
                    }
                    None => f64::NEG_INFINITY,
                };
                slack = slack.max(excess);
                table.push(
                    &prov.with_seed(k),
                    vec![
                        p.into(),
                        atom.region.ball.radius.into(),
                        value.into(),
                        valid.into(),
                        excess.into(),
                    ],
                );
                norms.push(value);
                previous = Some((atom.field, value));
            }
            let c = max_of(norms.iter().cloned());
            verdicts.push(CheckVerdict::at_most(
                suite,
                &format!("p={p:.4}: invalid atoms"),
                invalid as f64,
                0.0,
                prov.label(),
            ));
            verdicts.push(CheckVerdict::at_most(
                suite,
                &format!("p={p:.4}: max atom quasi-norm"),
                c,
                f64::MAX,
                prov.label(),
            ));
            verdicts.push(CheckVerdict::at_most(
                suite,
                &format!("p={p:.4}: relative p-triangle excess"),
                slack,
                1e-10,
                prov.label(),
            ));
            per_p.push(c);
        }
        maxima.push(per_p);
    }
    for (j, &p) in ps.iter().enumerate() {
        verdicts.push(CheckVerdict::at_most(
            suite,
            &format!("p={p:.4}: change of the atom constant under refinement"),
            fold_ratio(maxima[0][j], maxima[1][j]),
            2.0,
            format!("N={}->{}", config.atoms.sizes[0], config.atoms.sizes[1]),
        ));
    }
    Ok(SuiteReport {
        suite,
        table,
        verdicts,
    })
}

/// Synthesis ratios of `K` random molecules for `K = 1, 8, 32` against the
/// single-molecule constant.
fn molecules(config: &ExperimentConfig) -> Result<SuiteReport> {
    let suite = Suite::Molecules;
    let p = 2.0 / 3.0;
    let order = MoleculeSpec::minimal_order(2, p);
    let grid = config.grid()?;
    let ladder = config.ladder()?;
    let spaces = FunctionSpaces::on_grid(grid, config.scan_directions, ladder.clone())?;
    let prov = Provenance::new(&grid, &ladder, config.scan_directions);
    let mut table = Table::new(&["count", "p", "order", "ratio"]);
    let mut maxima = Vec::new();
    for count in MOLECULE_COUNTS {
        let report = synthesis_experiment(&spaces, count, p, order, MOLECULE_TAU, &config.seeds)?;
        for (&seed, &r) in report.seeds.iter().zip(&report.ratios) {
            table.push(
                &prov.with_seed(seed),
                vec![count.into(), p.into(), order.into(), r.into()],
            );
        }
        maxima.push(report.max_ratio);
    }
    let c = maxima[0];
    let verdicts = MOLECULE_COUNTS
        .iter()
        .zip(&maxima)
        .map(|(&count, &m)| {
            CheckVerdict::at_most(
                suite,
                &format!("K={count}: max ratio over the K=1 constant {c:.6e}"),
                m / c,
                4.0,
                prov.label(),
            )
        })
        .collect();
    Ok(SuiteReport {
        suite,
        table,
        verdicts,
    })
}

/// The peak maximal function against `M_lambda` for a theta packet, at the
/// coarse and the configured grid.
fn maximal(config: &ExperimentConfig) -> Result<SuiteReport> {
    let suite = Suite::Maximal;
    let order = 2.0 * 2.0 / MAXIMAL_LAMBDA;
    let ladder = config.ladder()?;
    let mut table = Table::new(&["sigma", "max_ratio", "active", "refined"]);
    let mut verdicts = Vec::new();
    let mut maxima = Vec::new();
    for grid in [config.refine_grid()?, config.grid()?] {
        let spaces = FunctionSpaces::on_grid(grid, config.scan_directions, ladder.clone())?;
        let family = spaces.family();
        let k = (3 * config.scan_directions / 32).min(config.scan_directions - 1);
        let theta = family.theta(k, MAXIMAL_SIGMA)?;
        let f = family.spatial_profile(&theta)?;
        let report = maximal_domination_check(&spaces, &f, order, MAXIMAL_LAMBDA)?;
        let prov = Provenance::new(&grid, &ladder, config.scan_directions);
        for r in &report.per_sigma {
            table.push(
                &prov,
                vec![
                    r.sigma.into(),
                    r.max_ratio.into(),
                    r.active.into(),
                    r.refined.into(),
                ],
            );
        }
        verdicts.push(CheckVerdict::at_most(
            suite,
            "max pointwise ratio",
            report.max_ratio,
            f64::MAX,
            prov.label(),
        ));
        verdicts.push(CheckVerdict::at_most(
            suite,
            "spread of the ratio across active scales",
            report.sigma_spread,
            10.0,
            prov.label(),
        ));
        maxima.push(report.max_ratio);
    }
    verdicts.push(CheckVerdict::at_most(
        suite,
        "change of the max ratio under refinement",
        fold_ratio(maxima[0], maxima[1]),
        2.0,
        format!("N={}->{}", config.refine_size, config.grid.size),
    ));
    Ok(SuiteReport {
        suite,
        table,
        verdicts,
    })
}

/// Half-wave and wave propagator ratios across box refinements at `p = 1`
/// and `p = 1/2`.
fn halfwave(_config: &ExperimentConfig) -> Result<SuiteReport> {
    let suite = Suite::Halfwave;
    let setup = GrowthSetup::default();
    let reports = halfwave_growth_experiment(&setup, &[1.0, 0.5], 0.0)?;
    let mut table = Table::new(&["p", "halfwave_ratio", "cos_ratio"]);
    let mut verdicts = Vec::new();
    for report in &reports {
        for row in &report.rows {
            let grid = SpatialGrid::new(2, row.size, row.length)?;
            let ladder = ScaleLadder::new(row.octaves, setup.per_octave)?;
            table.push(
                &Provenance::new(&grid, &ladder, setup.directions),
                vec![report.p.into(), row.halfwave.into(), row.cos.into()],
            );
        }
        let span = format!(
            "N={}..{} L=16pi*N/32 Q={} M={}",
            report.rows[0].size,
            report.rows[report.rows.len() - 1].size,
            setup.per_octave,
            setup.directions
        );
        let p = report.p;
        if p >= 1.0 {
            verdicts.push(CheckVerdict::at_most(
                suite,
                &format!("p={p}: half-wave ratio spread"),
                report.halfwave_spread,
                2.0,
                span.clone(),
            ));
        } else {
            let tail = &report.halfwave_factors[report.halfwave_factors.len().saturating_sub(3)..];
            verdicts.push(CheckVerdict::at_least(
                suite,
                &format!("p={p}: smallest half-wave growth factor of the last 3 refinements"),
                tail.iter().cloned().fold(f64::INFINITY, f64::min),
                setup.threshold,
                span.clone(),
            ));
            verdicts.push(CheckVerdict::at_least(
                suite,
                &format!("p={p}: half-wave verdict is growth"),
                if report.halfwave_verdict == GrowthVerdict::Growth {
                    1.0
                } else {
                    0.0
                },
                1.0,
                span.clone(),
            ));
        }
        verdicts.push(CheckVerdict::at_most(
            suite,
            &format!("p={p}: cos ratio spread"),
            report.cos_spread,
            2.0,
            span,
        ));
    }
    Ok(SuiteReport {
        suite,
        table,
        verdicts,
    })
}

/// Direct quadrature against the multiplier path for a linear phase, and
/// the identity phase against the identity.
fn fio(config: &ExperimentConfig) -> Result<SuiteReport> {
    let suite = Suite::Fio;
    let grid = SpatialGrid::new(2, FIO_SIZE, config.grid.length)?;
    let ladder = config.ladder()?;
    let prov = Provenance::new(&grid, &ladder, FIO_DIRECTIONS);
    let seed = config.seeds.first().copied().unwrap_or(0);
    let halfwave = FioDescriptor::new(
        PhaseFunction::halfwave(1.0),
        SymbolFunction::high_pass(),
        &grid,
        FIO_PHASE_SAMPLES,
        seed,
    )?;
    let identity = FioDescriptor::new(
        PhaseFunction::identity(),
        SymbolFunction::one(),
        &grid,
        FIO_PHASE_SAMPLES,
        seed,
    )?;
    let fields: Vec<_> = standard_family(&grid)?
        .into_iter()
        .step_by(4)
        .take(FIO_FIELDS)
        .collect();
    let mut table = Table::new(&["field", "operator", "relative_difference"]);
    let mut worst = [0.0f64; 2];
    for (m, f) in &fields {
        let fast = apply_fio(&halfwave, f)?;
        let direct = apply_fio_direct(&halfwave, f, DIRECT_BUDGET)?;
        let d0 = direct.rel_l2_error(&fast);
        let d1 = apply_fio_direct(&identity, f, DIRECT_BUDGET)?.rel_l2_error(f);
        let p = prov.with_seed(m.seed);
        table.push(
            &p,
            vec![m.label.as_str().into(), halfwave.name().into(), d0.into()],
        );
        table.push(
            &p,
            vec![m.label.as_str().into(), identity.name().into(), d1.into()],
        );
        worst[0] = worst[0].max(d0);
        worst[1] = worst[1].max(d1);
    }
    Ok(SuiteReport {
        suite,
        table,
        verdicts: vec![
            CheckVerdict::at_most(
                suite,
                "direct quadrature vs multiplier path",
                worst[0],
                1e-10,
                prov.label(),
            ),
            CheckVerdict::at_most(
                suite,
                "identity phase vs identity",
                worst[1],
                1e-10,
                prov.label(),
            ),
        ],
    })
}

/// Monte Carlo ball volumes and their log-log exponents at small and large
/// radii.
fn volume(config: &ExperimentConfig) -> Result<SuiteReport> {
    let suite = Suite::Volume;
    let n = config.grid.n;
    let seed = config.seeds[0];
    let mut table = Table::new(&["regime", "radius", "volume", "std_error"]);
    let mut verdicts = Vec::new();
    let grid = config.grid()?;
    let ladder = config.ladder()?;
    let prov = Provenance::new(&grid, &ladder, config.directions).with_seed(seed);
    let (small, large) = volume_radii();
    for (regime, radii, exponent) in [("small", small, 2 * n), ("large", large, n)] {
        let mut values = Vec::new();
        for &tau in &radii {
            let v = ball_volume_estimate(n, tau, config.volume_samples, seed)?;
            table.push(
                &prov,
                vec![
                    regime.into(),
                    tau.into(),
                    v.value.into(),
                    v.std_error.into(),
                ],
            );
            values.push(v.value);
        }
        let slope = loglog_slope(&radii, &values);
        verdicts.push(CheckVerdict::at_most(
            suite,
            &format!(
                "{regime} radii {:.4}..{:.4}: |exponent {slope:.4} - {exponent}|",
                radii[0],
                radii[radii.len() - 1]
            ),
            (slope - exponent as f64).abs(),
            0.1,
            format!("{} samples={}", prov.label(), config.volume_samples),
        ));
    }
    Ok(SuiteReport {
        suite,
        table,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_empty_run_succeeds() {
        let config = ExperimentConfig::default();
        config.validate().unwrap();
        let bundle = run(&config).unwrap();
        assert!(bundle.suites.is_empty());
        assert!(bundle.passed());
    }

    #[test]
    fn validation_lists_every_problem() {
        let config = ExperimentConfig {
            grid: GridConfig {
                n: 3,
                size: 16,
                length: 2.0 * PI,
            },
            directions: 2,
            seeds: Vec::new(),
            suites: vec![Suite::Volume, Suite::NormWeb],
            refine_size: 32,
            volume_samples: 10,
            ..Default::default()
        };
        match config.validate() {
            Err(Error::Config(errors)) => {
                let text = errors.join("\n");
                for key in [
                    "grid.n",
                    "directions",
                    "seeds",
                    "refine_size",
                    "volume_samples",
                ] {
                    assert!(text.contains(key), "missing {key} in\n{text}");
                }
            }
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"grid": {"size": 64}, "colour": 1}"#).is_err());
        let c =
            ExperimentConfig::from_json(r#"{"grid": {"size": 64}, "suites": ["fio"]}"#).unwrap();
        assert_eq!(c.grid.size, 64);
        assert_eq!(c.grid.n, 2);
        assert_eq!(c.suites, vec![Suite::Fio]);
    }

    #[test]
    fn suites_run_in_canonical_order() {
        let config = ExperimentConfig {
            suites: vec![Suite::Volume, Suite::Fio, Suite::Volume, Suite::Isometry],
            ..Default::default()
        };
        assert_eq!(
            config.ordered_suites(),
            vec![Suite::Isometry, Suite::Fio, Suite::Volume]
        );
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(Value::Num(PI).render(), "3.14159265359e0");
        assert_eq!(Value::Num(f64::INFINITY).render(), "inf");
        assert_eq!(Value::Int(7).render(), "7");
    }

    #[test]
    fn fio_suite_passes_and_carries_provenance() {
        let config = ExperimentConfig {
            suites: vec![Suite::Fio],
            ..Default::default()
        };
        let bundle = run(&config).unwrap();
        let report = &bundle.suites[0];
        assert!(report.passed(), "{:?}", report.verdicts);
        assert_eq!(report.table.rows.len(), 2 * FIO_FIELDS);
        assert_eq!(
            report.table.columns[..6],
            Provenance::COLUMNS.map(String::from)
        );
        assert!(report
            .verdicts
            .iter()
            .all(|v| v.provenance.contains("N=64")));
    }
}
