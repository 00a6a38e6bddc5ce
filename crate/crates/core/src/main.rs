//! Command-line experiment runner.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 acceptance failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stosync::config::ExperimentConfig;
use stosync::error::Error;
use stosync::manifest::RunManifest;
use stosync::runner::{self, Command as RunCommand};

#[derive(Parser)]
#[command(
    name = "stosync",
    version,
    about = "Simulation and verification toolkit for SDEs with additive noise: \
             Lyapunov spectra, Gibbs measures, synchronization diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment configuration (TOML), or a manifest.json to re-run.
    #[arg(long)]
    config: PathBuf,
    /// Override the base noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = STOSYNC_WORKERS env or all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Integrate trajectories and write t,x1..xd CSVs.
    Simulate(CommonArgs),
    /// Benettin QR spectrum with replica aggregation.
    Lyapunov(CommonArgs),
    /// Normalize the Gibbs measure; moments, ball masses, density grid.
    Gibbs(CommonArgs),
    /// Two-point synchronization statistics across a seed ensemble.
    Sync(CommonArgs),
    /// Ball-diameter decay statistics.
    Diam(CommonArgs),
    /// Pullback ensemble endpoints (empirical statistical equilibrium).
    Pullback(CommonArgs),
    /// Single-linkage cluster count of a point cloud CSV.
    Cluster(CommonArgs),
    /// Drift condition checkers (one-sided Lipschitz, monotonicity, ...).
    Check(CommonArgs),
    /// Constructive control witnesses (swift transitivity / contraction).
    Control(CommonArgs),
    /// Run the bundled verification suite and print a pass/fail table.
    PaperSuite {
        /// Output directory for the JSON report.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (0 = STOSYNC_WORKERS env or all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    // A manifest re-run: accept manifest.json transparently.
    if path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{') {
        let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Config {
            key: "config".into(),
            message: format!("not a TOML config and not a manifest: {e}"),
        })?;
        return Ok(manifest.config);
    }
    ExperimentConfig::from_toml(&text)
}

fn execute(args: &CommonArgs, command: RunCommand) -> Result<RunManifest, Error> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.noise.seed = seed;
    }
    if let Some(w) = args.workers {
        config.run.workers = w;
    }
    runner::run(&config, command, &args.out)
}

fn run_cli(args: &CommonArgs, command: RunCommand) -> ExitCode {
    match execute(args, command) {
        Ok(manifest) => {
            println!(
                "{}: {} output file(s) in {}, config hash {}",
                command.name(),
                manifest.outputs.len(),
                args.out.display(),
                &manifest.config_hash[..16]
            );
            if !manifest.seed_errors.is_empty() {
                for (seed_idx, msg) in &manifest.seed_errors {
                    eprintln!("seed {seed_idx} failed: {msg}");
                }
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run_paper_suite(out: &Path, workers: usize) -> ExitCode {
    let n = if workers > 0 { workers } else { runner::resolve_workers(0) };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let results = pool.install(stosync::acceptance::run_all);
    for r in &results {
        println!("{}", r.line());
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.id.as_str()).collect();
    if let Err(e) = std::fs::create_dir_all(out).and_then(|_| {
        std::fs::write(
            out.join("paper_suite.json"),
            serde_json::to_string_pretty(&results).expect("serializable"),
        )
    }) {
        eprintln!("error writing report: {e}");
        return ExitCode::from(2);
    }
    if failed.is_empty() {
        println!("all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        eprintln!("failed criteria: {}", failed.join(", "));
        ExitCode::from(4)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        CliCommand::Simulate(a) => run_cli(a, RunCommand::Simulate),
        CliCommand::Lyapunov(a) => run_cli(a, RunCommand::Lyapunov),
        CliCommand::Gibbs(a) => run_cli(a, RunCommand::Gibbs),
        CliCommand::Sync(a) => run_cli(a, RunCommand::Sync),
        CliCommand::Diam(a) => run_cli(a, RunCommand::Diam),
        CliCommand::Pullback(a) => run_cli(a, RunCommand::Pullback),
        CliCommand::Cluster(a) => run_cli(a, RunCommand::Cluster),
        CliCommand::Check(a) => run_cli(a, RunCommand::Check),
        CliCommand::Control(a) => run_cli(a, RunCommand::Control),
        CliCommand::PaperSuite { out, workers } => run_paper_suite(out, *workers),
    }
}
