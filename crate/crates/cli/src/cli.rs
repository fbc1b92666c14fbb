use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Outcome, RasterOptions, SpectrumWhat};
use crate::config::{KernelSpec, Overrides, RunConfig, WeightSpec};
use crate::error::CliError;
use crate::verify;

#[derive(Debug, Parser)]
#[command(name = "annulus-kit", version, about = "Spectra of the shift on weighted L2 spaces, convolution multipliers and their symbols")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Weight spec, e.g. `exp_linear`, `polynomial:2`, `table:w.csv`. Repeatable.
    #[arg(long, global = true, value_name = "SPEC")]
    pub weight: Vec<WeightSpec>,
    /// Grid half width.
    #[arg(long = "L", global = true, value_name = "L")]
    pub half_width: Option<f64>,
    /// Grid step; `1/h` must be an integer.
    #[arg(long = "h", global = true, value_name = "H")]
    pub step: Option<f64>,
    /// Largest power n in the norm sequences
    #[arg(long, global = true)]
    pub n_max: Option<usize>,
    /// Relative tolerance for operator norms.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output directory for report.json and artifacts
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Kernel spec, e.g. `triangle:1`, `bump:0,1`. Repeatable.
    #[arg(long, global = true, value_name = "SPEC")]
    pub kernel: Vec<KernelSpec>,
    /// Number of horizontal lines for symbol extraction
    #[arg(long, global = true)]
    pub line_count: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Weight condition and exponential growth bound.
    Weight,
    /// Spectral radii, strip, annulus, certified maps, pseudospectra.
    Spectrum {
        #[command(subcommand)]
        which: SpectrumCommand,
    },
    /// Norms, commutation, symbols and the symbol-norm bound of convolutions.
    Multiplier {
        #[command(subcommand)]
        which: MultiplierCommand,
    },
    /// Run the full invariant suite.
    Verify,
}

#[derive(Debug, Clone, Copy, Default, Args)]
pub struct RasterArgs {
    /// Smallest raster radius [default: r_in / 2]
    #[arg(long)]
    pub r_min: Option<f64>,
    /// Largest raster radius [default: 1.5 r_out]
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Radii in the raster [default: 64]
    #[arg(long)]
    pub n_r: Option<usize>,
    /// Angles in the raster [default: 32]
    #[arg(long)]
    pub n_theta: Option<usize>,
}

impl From<RasterArgs> for RasterOptions {
    fn from(a: RasterArgs) -> Self {
        RasterOptions {
            r_min: a.r_min,
            r_max: a.r_max,
            n_r: a.n_r,
            n_theta: a.n_theta,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum SpectrumCommand {
    Radius,
    Strip,
    Annulus,
    /// Classify a polar raster with both certifiers.
    Map(RasterArgs),
    /// Finite-section pseudospectrum (diagnostic only).
    Pseudo {
        #[command(flatten)]
        raster: RasterArgs,
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum MultiplierCommand {
    Norm,
    Commute {
        /// Translation amounts; defaults to ±1, ±2, ±5.
        #[arg(long = "shift", allow_hyphen_values = true)]
        shifts: Vec<f64>,
    },
    Symbol,
    Thm4 {
        /// Finite-section half width; defaults to L/2.
        #[arg(long)]
        window: Option<f64>,
    },
}

impl GlobalArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let config = base.apply(Overrides {
            weights: self.weight.clone(),
            kernels: self.kernel.clone(),
            half_width: self.half_width,
            step: self.step,
            n_max: self.n_max,
            rel_tol: self.tol,
            line_count: self.line_count,
            out: self.out.clone(),
        });
        config.validate()?;
        Ok(config)
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let config = cli.global.resolve()?;
    match &cli.command {
        Command::Weight => commands::cmd_weight(&config),
        Command::Spectrum { which } => match which {
            SpectrumCommand::Radius => commands::cmd_spectrum(&config, SpectrumWhat::Radius),
            SpectrumCommand::Strip => commands::cmd_spectrum(&config, SpectrumWhat::Strip),
            SpectrumCommand::Annulus => commands::cmd_spectrum(&config, SpectrumWhat::Annulus),
            SpectrumCommand::Map(r) => commands::cmd_spectrum_map(&config, (*r).into()),
            SpectrumCommand::Pseudo { raster, size, epsilon } => {
                commands::cmd_spectrum_pseudo(&config, (*raster).into(), *size, *epsilon)
            }
        },
        Command::Multiplier { which } => match which {
            MultiplierCommand::Norm => commands::cmd_multiplier_norm(&config),
            MultiplierCommand::Commute { shifts } => {
                let shifts = if shifts.is_empty() {
                    vec![1.0, -1.0, 2.0, -2.0, 5.0, -5.0]
                } else {
                    shifts.clone()
                };
                commands::cmd_multiplier_commute(&config, &shifts)
            }
            MultiplierCommand::Symbol => commands::cmd_multiplier_symbol(&config),
            MultiplierCommand::Thm4 { window } => commands::cmd_multiplier_thm4(&config, *window),
        },
        Command::Verify => verify::cmd_verify(&config),
    }
}
