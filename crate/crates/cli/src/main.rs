//! `ibnc`: batch pipeline over the ibnc analysis library.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use ibnc_core::nc_metrics::Nc1Variant;
use ibnc_core::synth::Warp;
use serde::Serialize;

use crate::output::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "ibnc",
    version,
    about = "Information-bottleneck and neural-collapse analysis of representations"
)]
struct Cli {
    /// Worker threads for parallel sections (default: available parallelism).
    #[arg(long, global = true, env = "IBNC_THREADS")]
    threads: Option<usize>,

    /// Allow overwriting existing output files.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a Gaussian mixture around a simplex ETF.
    Synth(SynthArgs),
    /// Stratified train/test split of a representation file.
    Split(SplitArgs),
    /// Neural-collapse report and per-pair angle table.
    Nc(NcArgs),
    /// Canonical correlations between two row-aligned representations.
    Cca(CcaArgs),
    /// Meta-Gaussian bottleneck compression of a source against a relevance set.
    Mgib(MgibArgs),
    /// Linear-probe and nearest-class-mean accuracies, raw vs ranked vs compressed.
    Probe(ProbeArgs),
    /// Fraction of samples two classifiers both get right.
    Agreement(AgreementArgs),
}

/// Input representation format; inferred from the extension when omitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatArg {
    Csv,
    IbncBin,
    NpyPair,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub classes: usize,
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub per_class: usize,
    /// Within-class standard deviation.
    #[arg(long)]
    pub sigma: f64,
    /// Common norm of the simplex vertices.
    #[arg(long, default_value_t = 1.0)]
    pub norm: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(short, long)]
    #[serde(skip)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Also write a linearly related copy `Z1 = Z A^T + noise`.
    #[arg(long)]
    #[serde(skip)]
    pub pair_out: Option<PathBuf>,
    /// Seed of the mixing matrix and its noise (default: seed + 1).
    #[arg(long)]
    pub pair_seed: Option<u64>,
    #[arg(long, default_value_t = 0.01)]
    pub pair_noise: f64,
    /// Apply a strictly increasing per-coordinate warp to every output.
    #[arg(long, value_parser = parse_warp)]
    pub warp: Option<Warp>,
}

fn parse_warp(s: &str) -> Result<Warp, String> {
    s.parse().map_err(|e: ibnc_core::Error| e.to_string())
}

fn parse_nc1(s: &str) -> Result<Nc1Variant, String> {
    s.parse().map_err(|e: ibnc_core::Error| e.to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Fraction of every class that goes to the training side.
    #[arg(long, default_value_t = 0.8)]
    pub fraction: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub train_out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub test_out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct NcArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Prediction file (from `probe`) for the NC4 agreement.
    #[arg(long)]
    pub probe_predictions: Option<PathBuf>,
    #[arg(long, value_parser = parse_nc1, default_value = "trace-ratio")]
    pub nc1_variant: Nc1Variant,
    /// Seed of the held-out split for the IB gap; the gap is skipped without it.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,
    /// Directory for nc.json and angles.csv.
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CcaArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Number of leading correlations summarized (default: min(d_a, d_b)).
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Rank-transform both inputs first.
    #[arg(long)]
    pub ranked: bool,
    #[arg(long, default_value_t = ibnc_core::identifiability::DEFAULT_CCA_RIDGE)]
    pub ridge: f64,
    /// Report path (JSON); printed to stdout only when omitted.
    #[arg(short, long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("target").required(true).args(["rank", "beta", "fraction"])))]
pub struct MgibArgs {
    /// Representation to compress.
    #[arg(long)]
    pub source: PathBuf,
    /// Representation the code must stay informative about.
    #[arg(long)]
    pub relevance: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Fraction of I(source; relevance) to retain.
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long, default_value_t = ibnc_core::gib::DEFAULT_REGULARIZATION)]
    pub regularization: f64,
    /// Extra sets (same columns as the source) to encode with the fitted map.
    #[arg(long)]
    pub encode: Vec<PathBuf>,
    /// Points on the information-curve grid.
    #[arg(long, default_value_t = 64)]
    pub curve_points: usize,
    /// Directory for mgib.json, compressed features and CSV tables.
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ProbeArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, requires = "compressed_test")]
    pub compressed_train: Option<PathBuf>,
    #[arg(long, requires = "compressed_train")]
    pub compressed_test: Option<PathBuf>,
    #[arg(long, default_value_t = ibnc_core::nc_metrics::DEFAULT_PROBE_L2)]
    pub l2: f64,
    /// Directory for probe.json and per-variant prediction files.
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AgreementArgs {
    /// Prediction file with `index,label,prediction` columns.
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(short, long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))?;
    }
    let force = cli.force;
    match cli.command {
        Command::Synth(a) => commands::synth(&a, force),
        Command::Split(a) => commands::split(&a, force),
        Command::Nc(a) => commands::nc(&a, force),
        Command::Cca(a) => commands::cca(&a, force),
        Command::Mgib(a) => commands::mgib(&a, force),
        Command::Probe(a) => commands::probe(&a, force),
        Command::Agreement(a) => commands::agreement(&a, force),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ibnc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
