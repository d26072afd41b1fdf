mod commands;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CmdError, Ctx};
use manifest::RunManifest;

/// Stochastic distribution network reconfiguration toolkit: power flow,
/// scenario reduction, surrogate training, and the branch-reduction search.
#[derive(Parser)]
#[command(name = "sdnr", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the per-scenario power flow on one switch configuration
    Pf(CommonArgs),
    /// Reduce a time series into a weighted scenario set
    Cluster(CommonArgs),
    /// Count (and optionally list) all radial configurations
    Enumerate(CommonArgs),
    /// Generate a labeled dataset of network-state encodings
    Gendata(CommonArgs),
    /// Train the stability-index surrogate
    Train(CommonArgs),
    /// Two-stage branch-reduction search for the best radial topology
    Reconfigure(CommonArgs),
    /// Exhaustively evaluate every radial configuration (exact index)
    Oracle(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON manifest holding any of the flags below; flags override it
    #[arg(long)]
    manifest: Option<PathBuf>,

    /// Network case file (JSON)
    #[arg(long)]
    network: Option<PathBuf>,
    /// Scenario set (JSON) or raw time series (CSV)
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Trained surrogate model file
    #[arg(long)]
    model: Option<PathBuf>,
    /// Labeled dataset (binary + JSON sidecar)
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Per-bus multiplicative scale factors (JSON map)
    #[arg(long)]
    scales: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,

    /// Scenario count for k-medoids reduction of CSV input
    #[arg(long)]
    k: Option<usize>,
    /// Renewable capacity scaling factor
    #[arg(long)]
    kr: Option<f64>,
    /// Fixed power factor used to derive reactive power from CSV input
    #[arg(long = "power-factor")]
    power_factor: Option<f64>,

    /// Loss weight in the objective
    #[arg(long)]
    kl: Option<f64>,
    /// Stability weight (signed; defaults to -0.5 for sigma_min)
    #[arg(long)]
    kv: Option<f64>,
    /// Loss normalizer (default: 10x the all-closed expected loss)
    #[arg(long = "cl-max")]
    cl_max: Option<f64>,
    /// Index normalizer (default: max exact index at the all-closed solve)
    #[arg(long = "iv-max")]
    iv_max: Option<f64>,

    /// Outer iteration limit of the two-stage search
    #[arg(long)]
    nmax: Option<usize>,
    /// Stability evaluator: exact | surrogate
    #[arg(long)]
    evaluator: Option<String>,
    /// Seed for clustering, sampling, splits, and training
    #[arg(long)]
    seed: Option<u64>,

    /// Power-flow mismatch tolerance, per-unit
    #[arg(long)]
    tolerance: Option<f64>,
    /// Newton-Raphson iteration limit
    #[arg(long = "max-iterations")]
    max_iterations: Option<usize>,

    /// Enumeration cap (error if exceeded)
    #[arg(long)]
    cap: Option<usize>,
    /// Config subsample size for dataset generation
    #[arg(long)]
    configs: Option<usize>,
    /// (config, sample) pair cap for dataset generation
    #[arg(long)]
    pairs: Option<usize>,
    /// Held-out fraction of generated datasets
    #[arg(long = "test-fraction")]
    test_fraction: Option<f64>,

    /// Branches to open, e.g. --open 32,33,34,35,36
    #[arg(long, value_delimiter = ',')]
    open: Option<Vec<usize>>,
    /// Allow solving a non-radial (meshed) closed graph
    #[arg(long)]
    meshed: bool,
    /// Also write the full configuration list when enumerating
    #[arg(long)]
    list: bool,

    /// Training epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// Mini-batch size
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    /// Learning rate
    #[arg(long = "learning-rate")]
    learning_rate: Option<f64>,
    /// Dropout rate
    #[arg(long)]
    dropout: Option<f64>,
    /// Predictor architecture: auto | mlp | conv
    #[arg(long)]
    arch: Option<String>,
}

impl CommonArgs {
    fn resolve(self) -> Result<RunManifest, CmdError> {
        let from_flags = RunManifest {
            network: self.network,
            scenarios: self.scenarios,
            model: self.model,
            dataset: self.dataset,
            scales: self.scales,
            out: self.out,
            k: self.k,
            kr: self.kr,
            power_factor: self.power_factor,
            kl: self.kl,
            kv: self.kv,
            cl_max: self.cl_max,
            iv_max: self.iv_max,
            nmax: self.nmax,
            evaluator: self.evaluator,
            seed: self.seed,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            cap: self.cap,
            configs: self.configs,
            pairs: self.pairs,
            test_fraction: self.test_fraction,
            open: self.open,
            meshed: self.meshed.then_some(true),
            list: self.list.then_some(true),
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            dropout: self.dropout,
            arch: self.arch,
        };
        let base = match &self.manifest {
            Some(path) => {
                if !path.exists() {
                    return Err(CmdError::new(
                        2,
                        format!("manifest file not found: {}", path.display()),
                    ));
                }
                RunManifest::load(path).map_err(CmdError::from)?
            }
            None => RunManifest::default(),
        };
        Ok(base.overridden_by(from_flags))
    }
}

fn run() -> Result<(), CmdError> {
    let cli = Cli::parse();
    let (args, cmd): (CommonArgs, fn(&Ctx) -> Result<(), CmdError>) = match cli.command {
        Command::Pf(a) => (a, commands::cmd_pf),
        Command::Cluster(a) => (a, commands::cmd_cluster),
        Command::Enumerate(a) => (a, commands::cmd_enumerate),
        Command::Gendata(a) => (a, commands::cmd_gendata),
        Command::Train(a) => (a, commands::cmd_train),
        Command::Reconfigure(a) => (a, commands::cmd_reconfigure),
        Command::Oracle(a) => (a, commands::cmd_oracle),
    };
    let manifest = args.resolve()?;
    let ctx = Ctx::new(manifest).map_err(CmdError::from)?;
    cmd(&ctx)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
