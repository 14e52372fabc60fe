use bbmm_cli::commands::{
    residual_curve, run_benchmark, run_predict, run_train, verify_theory, RunConfig,
};
use bbmm_cli::error::{CliError, Result};
use bbmm_cli::report::to_json_bytes;
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "bbmm",
    about = "Gaussian process regression through blackbox kernel matrix-matrix multiplies",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// CSV file: header row, comma-separated, last column is the target
    #[arg(long)]
    data: PathBuf,

    /// Kernel approximation mode
    #[arg(long, default_value = "exact", value_parser = ["exact", "sor", "ski"])]
    mode: String,

    /// Kernel function
    #[arg(long, default_value = "rbf", value_parser = ["rbf", "matern52"])]
    kernel: String,

    /// Inducing inputs (sor) or grid nodes (ski)
    #[arg(long, default_value_t = 300)]
    m: usize,

    /// Pivoted Cholesky preconditioner rank (0 disables preconditioning)
    #[arg(long, default_value_t = 5)]
    rank: usize,

    /// CG iteration budget per solve
    #[arg(long = "cg-iters", default_value_t = 20)]
    cg_iters: usize,

    /// Probe vectors for trace and log-det estimation
    #[arg(long, default_value_t = 10)]
    probes: usize,

    /// Relative-residual convergence tolerance
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,

    /// Seed for splits, probes, and inducing-input selection
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Train fraction of the train/test split
    #[arg(long, default_value_t = 0.8)]
    split: f64,

    /// Use only this input column (0-based); required for ski on multi-column data
    #[arg(long)]
    feature: Option<usize>,

    /// Optimizer steps for the training subcommands
    #[arg(long = "train-iters", default_value_t = 100)]
    train_iters: usize,

    /// Row cap for the dense-oracle arm and the verify diagnostics
    #[arg(long = "oracle-cap", default_value_t = 4000)]
    oracle_cap: usize,

    /// Report wall times as 0.0 so reports are byte-reproducible
    #[arg(long = "no-timing", default_value_t = false)]
    no_timing: bool,

    /// Output path for the JSON report (stdout when omitted); the residuals
    /// subcommand also writes <out with .csv extension>
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit hyperparameters on the train split and report the loss trace
    Train(CommonArgs),
    /// Train, then report predictions for the held-out split
    Predict(CommonArgs),
    /// Train the solver arm and the dense-oracle arm, reporting both MAEs
    Benchmark(CommonArgs),
    /// Relative residual per CG iteration across preconditioner ranks
    Residuals(CommonArgs),
    /// Empirical checks of the preconditioning and convergence theory
    Verify(CommonArgs),
}

impl CommonArgs {
    fn into_config(self, subcommand: &str) -> Result<RunConfig> {
        Ok(RunConfig {
            subcommand: subcommand.to_string(),
            data_path: self.data,
            mode_name: self.mode,
            kernel: self
                .kernel
                .parse()
                .map_err(|e: bbmm::BbmmError| CliError::Config(e.to_string()))?,
            m: self.m,
            rank: self.rank,
            cg_iters: self.cg_iters,
            probes: self.probes,
            tol: self.tol,
            seed: self.seed,
            split: self.split,
            feature: self.feature,
            train_iters: self.train_iters,
            oracle_cap: self.oracle_cap,
            no_timing: self.no_timing,
            out: self.out,
        })
    }
}

fn emit(out: Option<&PathBuf>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Data(e.to_string())),
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(args) => {
            let cfg = args.into_config("train")?;
            let report = run_train(&cfg)?;
            emit(cfg.out.as_ref(), &to_json_bytes(&report))
        }
        Command::Predict(args) => {
            let cfg = args.into_config("predict")?;
            let report = run_predict(&cfg)?;
            emit(cfg.out.as_ref(), &to_json_bytes(&report))
        }
        Command::Benchmark(args) => {
            let cfg = args.into_config("benchmark")?;
            let report = run_benchmark(&cfg)?;
            emit(cfg.out.as_ref(), &to_json_bytes(&report))
        }
        Command::Residuals(args) => {
            let cfg = args.into_config("residuals")?;
            let report = residual_curve(&cfg)?;
            emit(cfg.out.as_ref(), &to_json_bytes(&report))?;
            if let Some(out) = &cfg.out {
                let csv_path = out.with_extension("csv");
                std::fs::write(&csv_path, report.to_csv()).map_err(|e| {
                    CliError::Data(format!("cannot write {}: {e}", csv_path.display()))
                })?;
            }
            Ok(())
        }
        Command::Verify(args) => {
            let cfg = args.into_config("verify")?;
            let report = verify_theory(&cfg)?;
            emit(cfg.out.as_ref(), &to_json_bytes(&report))
        }
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
