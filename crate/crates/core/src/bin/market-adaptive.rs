use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use market_adaptive::cli::{self, RatioGrid};
use market_adaptive::Error;

#[derive(Parser)]
#[command(name = "market-adaptive", version, about = "Regime-aware portfolio backtests and ratio grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a rolling backtest and write report.json, metrics.csv and per-strategy CSVs.
    Backtest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit market-adaptive ratio curves along the fixed-Sharpe family.
    #[command(allow_negative_numbers = true)]
    RatioGrid {
        #[arg(long, default_value_t = 5.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        rf: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        regimes: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma_min: f64,
        #[arg(long, default_value_t = 8.0)]
        sigma_max: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic regime-switching price file.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a price file and print a summary.
    Validate { path: PathBuf },
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Backtest { config, out } => {
            let report = cli::cmd_backtest(&config, out.as_deref())?;
            print!("{}", cli::metrics_csv(&report));
        }
        Command::RatioGrid { alpha, rf, regimes, sigma_min, sigma_max, steps, out } => {
            let grid = RatioGrid { alpha, risk_free: rf, regimes, sigma_min, sigma_max, steps };
            cli::cmd_ratio_grid(&grid, &out)?;
        }
        Command::Synth { config, out } => {
            let t = cli::cmd_synth(&config, &out)?;
            println!("wrote {} rows x {} assets to {}", t.n_rows(), t.n_assets(), out.display());
        }
        Command::Validate { path } => println!("{}", cli::cmd_validate(&path)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Cli::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.component());
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}
