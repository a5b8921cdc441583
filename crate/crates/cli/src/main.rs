//! `isotrack` command-line runner.
//!
//! Exit codes: 0 success, 1 invalid input, 2 simulation diverged, 3 conditions or
//! study thresholds not met.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isotrack::harness::{self, RunOptions, EXIT_INVALID, STUDIES};
use isotrack::SdotMode;

#[derive(Parser)]
#[command(name = "isotrack", version, about = "Isoline tracking by concentration feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every initial state of a scenario and write trajectory CSVs plus a JSON report.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Print equilibrium, stability and bound diagnostics for a scenario.
    Analyze {
        scenario: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Run the scenario's [sweep] table from its first initial state.
    Sweep {
        scenario: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Run a canned study and report pass/fail against its thresholds.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(STUDIES))]
        study: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Overrides {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Integration step in seconds, overriding the scenario.
    #[arg(long)]
    dt: Option<f64>,
    /// How the controller obtains the concentration rate.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Oracle,
    Measured,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

impl From<&Overrides> for RunOptions {
    fn from(o: &Overrides) -> Self {
        let Format::Csv = o.format;
        RunOptions {
            out: Some(o.out.clone()),
            dt: o.dt,
            mode: o.mode.map(|m| match m {
                Mode::Oracle => SdotMode::Oracle,
                Mode::Measured => SdotMode::Measured,
            }),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID as u8 } else { 0 });
        }
    };
    let code = match &cli.command {
        Command::Run { scenario, opts } => harness::cmd_run(scenario, &opts.into()),
        Command::Analyze { scenario, opts } => harness::cmd_analyze(scenario, &opts.into()),
        Command::Sweep { scenario, opts } => harness::cmd_sweep(scenario, &opts.into()),
        Command::Reproduce { study, out } => harness::cmd_reproduce(study, out),
    };
    ExitCode::from(code as u8)
}
