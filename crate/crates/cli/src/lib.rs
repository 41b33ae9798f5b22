//! The `relaxkit` command line: prediction, fitting, regime classification,
//! unit conversion and synthetic data generation.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod report;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use error::{CliError, CliResult};

/// `lo:hi:n`, evenly spaced and inclusive. `n = 1` gives `[lo]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        relaxkit::synth::linspace(self.lo, self.hi, self.n)
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Grid::parse(s, false)
    }
}

impl Grid {
    fn parse(s: &str, allow_zero: bool) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected lo:hi:n, got '{s}'"));
        }
        let num = |p: &str, what: &str| -> Result<f64, String> {
            p.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("{what} '{p}' is not a number"))
        };
        let lo = num(parts[0], "lo")?;
        let hi = num(parts[1], "hi")?;
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| format!("n '{}' is not a positive integer", parts[2]))?;
        if n == 0 {
            return Err("n must be at least 1".into());
        }
        if allow_zero && lo < 0.0 {
            return Err(format!("lo must be >= 0, got {lo}"));
        }
        if !allow_zero && !(lo > 0.0) {
            return Err(format!("lo must be > 0, got {lo}"));
        }
        if hi < lo {
            return Err(format!("hi ({hi}) is below lo ({lo})"));
        }
        Ok(Grid { lo, hi, n })
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.n)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "relaxkit",
    version,
    about = "Electron spin relaxation: predict, fit, classify"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write PREFIX.json, PREFIX.txt and (where applicable) PREFIX.tsv.
    #[arg(long, value_name = "PREFIX")]
    pub out: Option<PathBuf>,
    /// Print the JSON report instead of the text rendering.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EchoModelArg {
    Mono,
    Stretched,
    ModulatedBi,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// T1 and T2 of the configured channels over a temperature grid.
    Predict {
        #[arg(long)]
        config: PathBuf,
        /// Kelvin, lo:hi:n.
        #[arg(long, default_value = "170:300:27")]
        temps: Grid,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Orbach parameters from a T1(T) CSV.
    FitOrbach {
        #[arg(long)]
        data: PathBuf,
        /// Optional config; only its `fit` section is used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        unweighted: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Distance of closest approach and solute diffusion from T2(T) data.
    FitDiffusion {
        #[arg(long)]
        config: PathBuf,
        /// LABEL=PATH, overrides the file of the dataset with that label.
        #[arg(long = "data", value_name = "LABEL=PATH")]
        data: Vec<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Echo-decay model fit of a tau_us,amplitude CSV.
    FitEcho {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "mono")]
        model: EchoModelArg,
        /// Hold the stretched exponent fixed at this value.
        #[arg(long)]
        n: Option<f64>,
        /// Also compare mono against stretched with this fixed exponent.
        #[arg(long, value_name = "N")]
        compare: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Diffusion regime for a solute diffusion coefficient.
    Regime {
        #[arg(long)]
        config: PathBuf,
        /// Diffusion coefficient, cm²/s.
        #[arg(long = "D", value_name = "CM2_PER_S", allow_negative_numbers = true)]
        diffusion: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Energy unit conversion between J, meV, cm-1 and K.
    Convert {
        #[arg(allow_negative_numbers = true)]
        value: f64,
        from: String,
        to: String,
        #[arg(long)]
        json: bool,
    },
    /// Synthetic datasets as CSV.
    Synth {
        #[command(subcommand)]
        kind: SynthCommand,
    },
}

#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    /// Relative noise for T1/T2, absolute for echo amplitudes.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Required when noise > 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Orbach T1(T).
    T1 {
        #[arg(long = "A", value_name = "PER_S")]
        prefactor: f64,
        #[arg(long = "delta-meV")]
        delta_mev: f64,
        #[arg(long, default_value = "160:300:10")]
        temps: Grid,
        #[command(flatten)]
        noise: NoiseArgs,
    },
    /// T2(T) of the configured channels.
    T2 {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "150:300:12")]
        temps: Grid,
        #[arg(long, default_value = "t2")]
        label: String,
        #[command(flatten)]
        noise: NoiseArgs,
    },
    /// Echo decay.
    Echo {
        #[arg(long, value_enum, default_value = "mono")]
        model: EchoModelArg,
        #[arg(long = "T2-us")]
        t2_us: f64,
        #[arg(long, default_value_t = 1.0)]
        n: f64,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        /// Microseconds, lo:hi:n.
        #[arg(long, default_value = "0:400:41")]
        taus: TauGrid,
        #[command(flatten)]
        noise: NoiseArgs,
    },
}

/// Like [`Grid`] but allows lo = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauGrid(pub Grid);

impl FromStr for TauGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Grid::parse(s, true).map(TauGrid)
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code; diagnostics go to stderr.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match commands::run(cli.command, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            i32::from(e.exit_code())
        }
    }
}
