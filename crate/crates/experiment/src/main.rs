use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sosnn_experiment::compare::compare;
use sosnn_experiment::report::write_artifacts;
use sosnn_experiment::{backtest, simulate, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "sosnn", version, about = "Run and compare bounded forecasting game experiments")]
struct Cli {
    #[command(subcommand)]
    command: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run strategies on simulated AR(1) or ARMA(2,1) series.
    Simulate(RunArgs),
    /// Run strategies on a price file.
    Backtest(RunArgs),
    /// Merge the summaries of finished runs.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Also write compare.csv and compare.txt here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to run.name.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn run_experiment(args: RunArgs, backtesting: bool) -> Result<(), CliError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    let output = if backtesting {
        backtest(&config, args.jobs)?
    } else {
        simulate(&config, args.jobs)?
    };
    for cell in &output.cells {
        eprintln!("{:<20} {:>8.2?}", cell.cell.label(), cell.elapsed());
    }
    let out = args.out.unwrap_or_else(|| PathBuf::from(&config.run.name));
    write_artifacts(&output, &out)?;
    print!("{}", std::fs::read_to_string(out.join("summary.txt")).map_err(|e| CliError::Runtime(e.to_string()))?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Verb::Simulate(args) => run_experiment(args, false),
        Verb::Backtest(args) => run_experiment(args, true),
        Verb::Compare { runs, out } => {
            let merged = compare(&runs)?;
            let text = merged.to_text();
            print!("{text}");
            if let Some(dir) = out {
                let write = |name: &str, body: &str| {
                    std::fs::create_dir_all(&dir)
                        .and_then(|_| std::fs::write(dir.join(name), body))
                        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", dir.join(name).display())))
                };
                write("compare.csv", &merged.to_csv()?)?;
                write("compare.txt", &text)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
