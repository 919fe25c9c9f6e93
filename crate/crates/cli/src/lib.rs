//! Command-line driver: synthetic data generation, posterior sampling runs,
//! diagnostics and bitwise replay of recorded runs.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "seabed", version, about = "Bayesian seabed reconstruction from surface wave measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Simulate one seabed on the inference mesh and dump the surface traces.
    Forward(ForwardArgs),
    /// Simulate on the (finer) data mesh and add measurement noise.
    GenerateData(GenerateArgs),
    /// pCN sampling at fixed regularity.
    SampleFixedS(SampleArgs),
    /// Metropolis-within-Gibbs sampling of the seabed and its regularity.
    SampleMwg(SampleArgs),
    /// Ensemble (stretch move) + pCN baseline at fixed regularity.
    SampleFes(SampleArgs),
    /// ESS, KDE, HPD intervals and credibility bands of a sample file.
    Diagnose(DiagnoseArgs),
    /// Draw seabeds from the smoothed white-noise generator.
    MakeOopSeabed(OopArgs),
    /// Re-run a recorded manifest and check the outputs bit for bit.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct Common {
    /// TOML configuration file; unspecified fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration field, e.g. `--set solver.dt=0.0038`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    pub svg: bool,
}

/// Where the seabed comes from; without `--seabed` or `--flat` a prior draw
/// with `data.truth_seed` and `data.truth_s` is used.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SeabedArgs {
    /// Seabed curve file.
    #[arg(long, conflicts_with = "flat")]
    pub seabed: Option<PathBuf>,
    /// Flat seabed at this height.
    #[arg(long, allow_negative_numbers = true)]
    pub flat: Option<f64>,
    #[arg(long)]
    pub truth_seed: Option<u64>,
    #[arg(long)]
    pub truth_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ForwardArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub seabed: SeabedArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub seabed: SeabedArgs,
    /// Permit generating data on the inference mesh itself.
    #[arg(long)]
    pub allow_inverse_crime: bool,
    #[arg(long)]
    pub noise_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Measurement file with noise levels (from `generate-data`).
    #[arg(long)]
    pub data: PathBuf,
    /// Online (post-warm-up) outer iterations.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Warm-up outer iterations.
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: Common,
    /// Sample file (from one of the `sample-*` commands).
    #[arg(long)]
    pub samples: PathBuf,
    /// True seabed, for coverage statistics.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Level of the pointwise credibility band.
    #[arg(long, default_value_t = 0.99)]
    pub level: f64,
    /// Pointwise HPD band instead of equal-tailed.
    #[arg(long)]
    pub hpd_band: bool,
    /// Coefficients reported in the trace and summary.
    #[arg(long, default_value_t = 5)]
    pub n_coeffs: usize,
    /// Fixed regularity for the posterior-mean seabed (default: mean of the s-chain).
    #[arg(long)]
    pub s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OopArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Directory for the replayed outputs (default: `replay/` next to the manifest).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}
