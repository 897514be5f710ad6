use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use netmom::config::RunConfig;
use netmom::pipeline::{self, StageOptions};
use netmom::{Error, Result};

/// Network momentum pipeline: ingest prices, compute features, learn graphs,
/// backtest and report.
#[derive(Parser, Debug)]
#[command(name = "netmom", version)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the graph recompute stride (trading days).
    #[arg(long, global = true)]
    stride: Option<usize>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Reuse stored searches and graphs built from the same inputs.
    #[arg(long, global = true)]
    resume: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Validate the universe and prices and report coverage per asset class.
    Ingest,
    /// Compute and dump the momentum features.
    Features,
    /// Search hyperparameters and learn the graph sequences.
    Graphs,
    /// Run the walk-forward backtest for every configured strategy.
    Backtest,
    /// Collect tables and plot-ready data into the report directory.
    Report,
    /// Write a synthetic market to the configured data paths.
    Synth,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(stride) = cli.stride {
        config.graph.stride = stride;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    }
    let config = load_config(cli)?;
    let opts = StageOptions { resume: cli.resume };
    match cli.command {
        Command::Synth => {
            let m = pipeline::cmd_synth(&config)?;
            println!(
                "synthetic market: {} assets, {} days -> {}",
                m.panel.n_assets(),
                m.panel.n_days(),
                config.paths.prices.display()
            );
        }
        Command::Ingest => {
            println!("{:<6} {:>7} {:>7} {:>10} {:>9}", "class", "assets", "days", "observed", "coverage");
            for c in pipeline::cmd_ingest(&config)? {
                println!(
                    "{:<6} {:>7} {:>7} {:>10} {:>8.2}%",
                    c.class.to_string(),
                    c.n_assets,
                    c.n_days,
                    c.observed,
                    100.0 * c.coverage
                );
            }
        }
        Command::Features => {
            println!("{:<12} {:>9}", "feature", "missing");
            for m in pipeline::cmd_features(&config)? {
                println!("{:<12} {:>8.2}%", m.feature, 100.0 * m.missing_frac);
            }
        }
        Command::Graphs => {
            let s = pipeline::cmd_graphs(&config, opts)?;
            for p in &s.plans {
                match p.hyper {
                    Some(h) => println!("split {}: alpha={} beta={}", p.split.label(), h.alpha, h.beta),
                    None => println!("split {}: no graphs needed", p.split.label()),
                }
            }
            println!(
                "{} sequences, {} days written, {} unconverged window solves",
                s.sequences, s.days_written, s.solver_failures
            );
        }
        Command::Backtest => {
            let r = pipeline::cmd_backtest(&config)?;
            println!("{:<12} {:>10} {:>10} {:>10}", "strategy", "sharpe", "scaled", "mdd");
            for run in &r.runs {
                let fmt = |x: Option<f64>| x.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
                println!(
                    "{:<12} {:>10} {:>10} {:>10}",
                    run.name,
                    fmt(run.metrics_raw.sharpe),
                    fmt(run.metrics_scaled.as_ref().and_then(|m| m.sharpe)),
                    format!("{:.3}", run.metrics_raw.max_drawdown)
                );
            }
        }
        Command::Report => {
            let s = pipeline::cmd_report(&config)?;
            println!(
                "report: {} files in {}",
                s.files,
                config.paths.output.join("report").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
