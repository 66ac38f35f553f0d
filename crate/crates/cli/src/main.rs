//! `fioh`: command-line access to the fio-hardy library and its acceptance
//! suites.

mod emit;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fio_hardy::experiment::{run, ExperimentConfig, Suite};
use fio_hardy::families::standard_family;
use fio_hardy::fio::{
    apply_fio, apply_fio_direct, builtin_phase, builtin_symbol, propagator, FioDescriptor,
    PropagatorKind, DIRECT_BUDGET,
};
use fio_hardy::geometry::{ball_volume_estimate, Direction, DirectionSet};
use fio_hardy::grid::{GridField, SpatialGrid, MAX_DIM};
use fio_hardy::maximal_verify::{kernel_average_check, maximal_domination_check};
use fio_hardy::molecules::{
    molecule_from_packet, molecule_validate, synthesis_experiment, MoleculeSpec,
};
use fio_hardy::packets::PacketFamily;
use fio_hardy::spaces::{FunctionSpaces, SpaceKind};
use fio_hardy::transform::{Part, PhaseSpaceField, ScaleLadder, WaveTransform};
use fio_hardy::{Error, Result};

use emit::{emit, Format};

#[derive(Parser)]
#[command(
    name = "fioh",
    version,
    about = "Hardy spaces for FIOs on a discretized torus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a quasi-norm of a field.
    Norm {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        setup: SetupArgs,
        /// hp, hpfio, hpfio-A, hpfio-theta or hpfio-dir.
        #[arg(long, default_value = "hpfio")]
        space: String,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
    },
    /// Wave packet transform of a field into a phase-space file.
    Transform {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        setup: SetupArgs,
        #[arg(long, value_enum, default_value_t = PartArg::Full)]
        part: PartArg,
        #[arg(long)]
        output: PathBuf,
    },
    /// Synthesis of a phase-space file back into a field.
    Inverse {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Apply cos(t|D|), sin(t|D|)/|D| or exp(it|D|) to a field.
    Propagate {
        #[command(flatten)]
        field: FieldArgs,
        /// cos, sinc or halfwave.
        #[arg(long, default_value = "halfwave")]
        kind: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Apply a built-in Fourier integral operator to a field.
    FioApply {
        #[command(flatten)]
        field: FieldArgs,
        /// identity, halfwave or curved.
        #[arg(long, default_value = "halfwave")]
        phase: String,
        /// one, high-pass or modulated.
        #[arg(long, default_value = "one")]
        symbol: String,
        /// Time or curvature parameter of the phase.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Force the direct quadrature even for multipliers.
        #[arg(long)]
        direct: bool,
        #[arg(long, default_value_t = 2000)]
        phase_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Molecule construction, validation and synthesis.
    Molecule {
        #[command(subcommand)]
        action: MoleculeAction,
    },
    /// Pointwise maximal-function domination on the theta slices of a field.
    MaximalCheck {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        setup: SetupArgs,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Decay order N; defaults to 2n / lambda.
        #[arg(long)]
        order: Option<f64>,
        /// Use the kernel-weighted average instead of the peak maximal function.
        #[arg(long)]
        kernel: bool,
    },
    /// Run acceptance suites and emit their tables.
    Accept {
        /// JSON configuration; defaults apply to absent keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Suites to run, overriding the configuration (repeatable).
        #[arg(long = "suite")]
        suites: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Monte Carlo volumes of metric balls.
    Volume {
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Radii (repeatable).
        #[arg(long = "tau", required = true)]
        taus: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum MoleculeAction {
    /// Support and decay check of a field against a molecule specification.
    Validate {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        molecule: MoleculeArgs,
    },
    /// Build a molecule from a wave packet.
    Make {
        #[command(flatten)]
        molecule: MoleculeArgs,
        #[command(flatten)]
        setup: SetupArgs,
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        length: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Synthesis ratios of random molecules.
    Synthesize {
        #[command(flatten)]
        setup: SetupArgs,
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        length: f64,
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long, default_value_t = 2.0 / 3.0)]
        p: f64,
        /// Decay order; defaults to the minimal admissible order.
        #[arg(long)]
        order: Option<f64>,
        #[arg(long, default_value_t = 0.25)]
        tau_min: f64,
        #[arg(long, default_value_t = 2.0)]
        tau_max: f64,
        /// Seeds (repeatable).
        #[arg(long = "seed", default_values_t = [0u64])]
        seeds: Vec<u64>,
    },
}

/// A field read from a file or taken from the standard family.
#[derive(Args)]
struct FieldArgs {
    /// Field file written by this tool.
    #[arg(long, conflicts_with = "standard")]
    input: Option<PathBuf>,
    /// Index 0..19 into the standard family on a `--size`/`--length` grid.
    #[arg(long)]
    standard: Option<usize>,
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = std::f64::consts::TAU)]
    length: f64,
}

impl FieldArgs {
    fn load(&self) -> Result<GridField> {
        match (&self.input, self.standard) {
            (Some(path), _) => GridField::load(&path.display().to_string()),
            (None, Some(index)) => {
                let grid = SpatialGrid::new(2, self.size, self.length)?;
                standard_family(&grid)?
                    .into_iter()
                    .nth(index)
                    .map(|(_, f)| f)
                    .ok_or_else(|| Error::InvalidInput(format!("no standard field {index}")))
            }
            (None, None) => Err(Error::InvalidInput(
                "give a field with --input or --standard".into(),
            )),
        }
    }
}

/// Direction count and scale ladder.
#[derive(Args)]
struct SetupArgs {
    #[arg(long, default_value_t = 64)]
    directions: usize,
    #[arg(long, default_value_t = 5)]
    octaves: usize,
    #[arg(long, default_value_t = 4)]
    per_octave: usize,
}

impl SetupArgs {
    fn ladder(&self) -> Result<ScaleLadder> {
        ScaleLadder::new(self.octaves, self.per_octave)
    }

    fn spaces(&self, grid: SpatialGrid) -> Result<FunctionSpaces> {
        FunctionSpaces::on_grid(grid, self.directions, self.ladder()?)
    }

    fn family(&self, grid: SpatialGrid) -> Result<Arc<PacketFamily>> {
        Ok(Arc::new(PacketFamily::new(
            grid,
            DirectionSet::new(grid.n, self.directions)?,
        )?))
    }
}

#[derive(Args)]
struct MoleculeArgs {
    #[arg(long, default_value_t = 0.0)]
    x: f64,
    #[arg(long, default_value_t = 0.0)]
    y: f64,
    /// Angle of the direction in radians.
    #[arg(long, default_value_t = 0.0)]
    angle: f64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    p: f64,
    /// Decay order; defaults to the minimal admissible order.
    #[arg(long)]
    order: Option<f64>,
}

impl MoleculeArgs {
    fn spec(&self) -> Result<MoleculeSpec> {
        let mut center = [0.0; MAX_DIM];
        center[0] = self.x;
        center[1] = self.y;
        let order = self
            .order
            .unwrap_or_else(|| MoleculeSpec::minimal_order(2, self.p));
        MoleculeSpec::new(
            center,
            Direction::from_angle(self.angle),
            self.tau,
            order,
            self.p,
        )
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PartArg {
    Full,
    Low,
    High,
}

impl From<PartArg> for Part {
    fn from(p: PartArg) -> Self {
        match p {
            PartArg::Full => Part::Full,
            PartArg::Low => Part::Low,
            PartArg::High => Part::High,
        }
    }
}

fn print_json(value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("json output: {e}")))?;
    println!("{text}");
    Ok(())
}

fn save(field: &GridField, path: &std::path::Path) -> Result<()> {
    field.save(&path.display().to_string())
}

/// Runs one command; `Ok(false)` means a verdict failed.
fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Norm {
            field,
            setup,
            space,
            p,
            s,
        } => {
            let f = field.load()?;
            let kind: SpaceKind = space.parse()?;
            print_json(&setup.spaces(f.grid)?.norm(kind, &f, p, s)?)?;
        }
        Command::Transform {
            field,
            setup,
            part,
            output,
        } => {
            let f = field.load()?;
            let t = WaveTransform::new(setup.family(f.grid)?, setup.ladder()?)?;
            t.analyze(&f, part.into())?
                .save(&output.display().to_string())?;
        }
        Command::Inverse { input, output } => {
            let field = PhaseSpaceField::load(&input.display().to_string())?;
            let family = Arc::new(PacketFamily::new(
                field.grid,
                DirectionSet::new(field.grid.n, field.directions)?,
            )?);
            let t = WaveTransform::new(family, field.ladder.clone())?;
            save(&t.synthesize(&field)?, &output)?;
        }
        Command::Propagate {
            field,
            kind,
            t,
            output,
        } => {
            let kind: PropagatorKind = kind.parse()?;
            save(&propagator(kind, t, &field.load()?)?, &output)?;
        }
        Command::FioApply {
            field,
            phase,
            symbol,
            t,
            direct,
            phase_samples,
            seed,
            output,
        } => {
            let f = field.load()?;
            let op = FioDescriptor::new(
                builtin_phase(&phase, t)?,
                builtin_symbol(&symbol)?,
                &f.grid,
                phase_samples,
                seed,
            )?;
            eprintln!("{}", serde_json::to_string(&op.report).unwrap_or_default());
            let out = if direct {
                apply_fio_direct(&op, &f, DIRECT_BUDGET)?
            } else {
                apply_fio(&op, &f)?
            };
            save(&out, &output)?;
        }
        Command::Molecule { action } => return molecule(action),
        Command::MaximalCheck {
            field,
            setup,
            lambda,
            order,
            kernel,
        } => {
            let f = field.load()?;
            let spaces = setup.spaces(f.grid)?;
            let order = order.unwrap_or(2.0 * f.grid.n as f64 / lambda);
            let report = if kernel {
                kernel_average_check(&spaces, &f, order, lambda)?
            } else {
                maximal_domination_check(&spaces, &f, order, lambda)?
            };
            print_json(&report)?;
        }
        Command::Accept {
            config,
            suites,
            format,
        } => {
            let mut config = match config {
                Some(path) => ExperimentConfig::load(&path.display().to_string())?,
                None => ExperimentConfig::default(),
            };
            if !suites.is_empty() {
                config.suites = suites
                    .iter()
                    .map(|s| s.parse::<Suite>())
                    .collect::<Result<_>>()?;
            }
            let config = config.with_env_override();
            let bundle = run(&config)?;
            for v in bundle.verdicts() {
                println!("{}", v.line());
            }
            for path in emit(&bundle, format, std::path::Path::new(&config.output_dir))? {
                eprintln!("wrote {}", path.display());
            }
            return Ok(bundle.passed());
        }
        Command::Volume {
            n,
            taus,
            samples,
            seed,
        } => {
            for tau in taus {
                let v = ball_volume_estimate(n, tau, samples, seed)?;
                println!(
                    "{}",
                    serde_json::to_string(&v).map_err(|e| Error::Format(e.to_string()))?
                );
            }
        }
    }
    Ok(true)
}

fn molecule(action: MoleculeAction) -> Result<bool> {
    match action {
        MoleculeAction::Validate { field, molecule } => {
            let report = molecule_validate(&field.load()?, &molecule.spec()?)?;
            let valid = report.valid;
            print_json(&report)?;
            Ok(valid)
        }
        MoleculeAction::Make {
            molecule,
            setup,
            size,
            length,
            output,
        } => {
            let grid = SpatialGrid::new(2, size, length)?;
            let family = setup.family(grid)?;
            save(&molecule_from_packet(&family, &molecule.spec()?)?, &output)?;
            Ok(true)
        }
        MoleculeAction::Synthesize {
            setup,
            size,
            length,
            count,
            p,
            order,
            tau_min,
            tau_max,
            seeds,
        } => {
            let grid = SpatialGrid::new(2, size, length)?;
            let order = order.unwrap_or_else(|| MoleculeSpec::minimal_order(2, p));
            let report = synthesis_experiment(
                &setup.spaces(grid)?,
                count,
                p,
                order,
                (tau_min, tau_max),
                &seeds,
            )?;
            print_json(&report)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
