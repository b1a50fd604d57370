use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use krylovflow_cli::error::{EXIT_OK, EXIT_USAGE};
use krylovflow_cli::{CliError, Command, Pipeline, RunConfig};

#[derive(Parser)]
#[command(name = "krylovflow", version, about = "Krylov complexity pipelines for dissipative spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Only errors on stderr, nothing on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Sub {
    /// Tridiagonalize the generator; writes coefficients and a structure report.
    Lanczos(Common),
    /// Evolve the Krylov chain; writes the moment series.
    Evolve(Common),
    /// Check the dispersion bound along the evolution.
    Bound(Common),
    /// Compare chain moments against direct superoperator evolution.
    Oracle(Common),
    /// Compare the continuum closed forms with the characteristics solver.
    Continuum(Common),
    /// Bound check on the synthetic saturating chain.
    Saturation(Common),
    /// Outlier removal and smoothing of the coefficient sequences.
    Filter(Common),
    /// Every stage in dependency order.
    Full(Common),
}

impl Sub {
    fn split(self) -> (Command, Common) {
        match self {
            Sub::Lanczos(c) => (Command::Lanczos, c),
            Sub::Evolve(c) => (Command::Evolve, c),
            Sub::Bound(c) => (Command::Bound, c),
            Sub::Oracle(c) => (Command::Oracle, c),
            Sub::Continuum(c) => (Command::Continuum, c),
            Sub::Saturation(c) => (Command::Saturation, c),
            Sub::Filter(c) => (Command::Filter, c),
            Sub::Full(c) => (Command::Full, c),
        }
    }
}

fn run(cmd: Command, common: Common) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(out) = common.out {
        cfg.output_dir = out;
    }
    let mut pipeline = Pipeline::new(cfg, common.quiet)?;
    pipeline.run(cmd)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::from(EXIT_OK as u8);
            }
            let err = CliError::Usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let (cmd, common) = cli.command.split();
    let level = if common.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cmd, common) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
