use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod report;

use config::ConfigError;

/// Experiments with collision-constrained opportunistic spectrum access.
#[derive(Debug, Parser)]
#[command(name = "oppaccess", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an idle-time trace from the configured traffic.
    Generate(GenerateArgs),
    /// Fit a hyper-exponential mixture to a trace.
    Fit(FitArgs),
    /// Build one strategy and simulate it on a trace.
    Eval(EvalArgs),
    /// Tabulate predicted (and optionally measured) performance over a grid of budgets.
    Sweep(SweepArgs),
    /// Run several strategies on the same trace.
    Compare(CompareArgs),
    /// Tail diagnostics of the empirical idle-time distribution.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    /// Overrides `trace.cycles`.
    #[arg(long)]
    cycles: Option<usize>,
    /// Drop the state column.
    #[arg(long)]
    unlabeled: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Trace file.
    trace: PathBuf,
    /// Number of mixture components.
    #[arg(short = 'n', long, default_value_t = 2)]
    components: usize,
    /// Fit consecutive groups of this many samples instead of the whole trace.
    #[arg(long)]
    group_size: Option<usize>,
    /// Distribution record (JSON), or the per-group table with --group-size.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Quartile summary of a windowed fit; stderr when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
}

#[derive(Debug, Args)]
struct Selection {
    /// Collision budget η; `sweep` takes a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    eta: Vec<f64>,
    /// Multiple-shot confidence ε.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Outage window in cycles.
    #[arg(long)]
    window: Option<usize>,
    /// Restrict to one information level.
    #[arg(long, value_parser = ["stat", "markov", "full"])]
    ptsi: Option<String>,
    /// Strategy name; repeatable where several are allowed.
    #[arg(long = "strategy")]
    strategies: Vec<String>,
    /// Evaluate on this trace file instead of the configured source.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    select: Selection,
    /// Write the per-window collision series here.
    #[arg(long)]
    windows: Option<PathBuf>,
    /// Write the strategy record (JSON) here.
    #[arg(long)]
    save_strategy: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    select: Selection,
    #[arg(long)]
    windows: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    select: Selection,
    /// Skip simulation and report closed-form predictions only.
    #[arg(long)]
    predict_only: bool,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    trace: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the log-log CCDF evaluation points here.
    #[arg(long)]
    points: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Compare(a) => commands::compare(a),
        Command::Diagnose(a) => commands::diagnose(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for configuration problems, 3 for unusable data, 4 for model and solver failures.
fn exit_code(e: &anyhow::Error) -> u8 {
    use oppaccess::Error as E;
    for cause in e.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<E>() {
            return match err {
                E::Domain(_) | E::Parameter(_) => 2,
                E::Data(_) | E::Parse { .. } | E::Incompatible(_) | E::Io(_) => 3,
                E::Model(_) | E::Solver { .. } | E::Unbounded { .. } | E::Construction(_) => 4,
            };
        }
        if cause.is::<std::io::Error>() {
            return 3;
        }
    }
    1
}
