use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mixchoice::cli::{cmd_evaluate, cmd_fds, cmd_generate, GenerateOverrides};
use mixchoice::CriterionKind;

/// Optimal designs for choice experiments with mixtures and process
/// variables.
#[derive(Parser)]
#[command(name = "mixchoice", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an optimal design from a run config.
    Generate {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the optimizer seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of random starts.
        #[arg(long)]
        starts: Option<usize>,
        /// Override the maximum number of sweeps per start.
        #[arg(long)]
        passes: Option<usize>,
        /// Override the criterion (d or i).
        #[arg(long)]
        criterion: Option<String>,
    },
    /// Evaluate a stored design CSV under the config's prior.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Design CSV to evaluate.
        design: PathBuf,
    },
    /// Fraction-of-design-space curves (CSV + SVG) for stored designs.
    Fds {
        #[arg(long)]
        config: PathBuf,
        /// One or more design CSVs.
        #[arg(required = true)]
        designs: Vec<PathBuf>,
    },
}

fn parse_criterion(text: &str) -> Result<CriterionKind, String> {
    match text.to_ascii_lowercase().as_str() {
        "d" => Ok(CriterionKind::D),
        "i" => Ok(CriterionKind::I),
        other => Err(format!("unknown criterion '{other}', expected 'd' or 'i'")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate {
            config,
            seed,
            starts,
            passes,
            criterion,
        } => {
            let criterion = match criterion.as_deref().map(parse_criterion).transpose() {
                Ok(c) => c,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return ExitCode::from(2);
                }
            };
            let overrides = GenerateOverrides {
                seed,
                starts,
                passes,
                criterion,
            };
            cmd_generate(&config, &overrides).map(|()| 0)
        }
        Command::Evaluate { config, design } => cmd_evaluate(&config, &design),
        Command::Fds { config, designs } => cmd_fds(&config, &designs).map(|()| 0),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
