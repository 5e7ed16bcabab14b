use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hypiss::commands::{self, CommonArgs, GainSource};
use hypiss::{RunReport, EXIT_ERROR};

/// Boundary control design and simulation for saturated hyperbolic systems.
#[derive(Debug, Parser)]
#[command(name = "hypiss", version, args_conflicts_with_subcommands = true)]
struct Cli {
    /// Write the bundled reproduction configs into DIR (default: current directory)
    #[arg(long, value_name = "DIR", num_args = 0..=1, default_missing_value = ".")]
    seed_configs: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config's
    #[arg(long)]
    out: Option<PathBuf>,
}

impl From<Common> for CommonArgs {
    fn from(c: Common) -> Self {
        CommonArgs { config: c.config, out: c.out }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the synthesis LMIs at the configured (mu, alpha)
    Synth(Common),
    /// Solve every cell of the configured (mu, alpha) grids
    Grid(Common),
    /// Simulate the closed loop and write trajectory CSVs
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Gain source: a certificate path, `zero`, or `auto` (synthesize)
        #[arg(long, default_value = "auto")]
        gain: GainSource,
    },
    /// Recompute every margin of a certificate
    Verify {
        #[command(flatten)]
        common: Common,
        /// Certificate to check (JSON)
        #[arg(long)]
        certificate: PathBuf,
        /// Smallest accepted margin
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        tolerance: f64,
    },
}

fn run(cmd: Command) -> Result<RunReport, hypiss::CliError> {
    match cmd {
        Command::Synth(c) => commands::synth(&c.into()),
        Command::Grid(c) => commands::grid(&c.into()),
        Command::Simulate { common, gain } => commands::simulate(&common.into(), &gain),
        Command::Verify { common, certificate, tolerance } => commands::verify(&common.into(), &certificate, tolerance),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(dir) = cli.seed_configs {
        return match commands::seed_configs(&dir) {
            Ok(paths) => {
                for p in paths {
                    println!("{}", p.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_ERROR)
            }
        };
    }
    let Some(cmd) = cli.command else {
        eprintln!("error: no command given (see --help)");
        return ExitCode::from(EXIT_ERROR);
    };
    match run(cmd) {
        Ok(report) => {
            println!("{}: {}", report.command, report.summary);
            ExitCode::from(report.exit_code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
