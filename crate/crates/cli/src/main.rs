use clap::{Parser, Subcommand};
use std::path::PathBuf;
use surfwave_cli::verify::Suite;

/// Free-surface flow with surfactant: simulation and verification.
#[derive(Parser)]
#[command(name = "surfwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a JSON configuration.
    Run {
        config: PathBuf,
        /// Overrides output.directory from the configuration.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run property suites and print a pass/fail table.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Write the physical-domain mesh and velocity of a state dump as CSV.
    ExportTheta {
        dump: PathBuf,
        #[arg(long, default_value = "theta.csv")]
        output: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(threads) = std::env::var("SURFWAVE_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("cannot size the thread pool: {e}");
                }
            }
            _ => {
                eprintln!("error: SURFWAVE_THREADS must be a positive integer, got {threads:?}");
                std::process::exit(2);
            }
        }
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match cli.command {
        Command::Run { config, output_dir } => surfwave_cli::run::run(&config, output_dir.as_deref()),
        Command::Verify { suite } => surfwave_cli::verify::verify(suite),
        Command::ExportTheta { dump, output } => surfwave_cli::theta::export_theta(&dump, &output),
    };
    std::process::exit(code);
}
