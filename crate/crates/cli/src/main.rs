mod commands;
mod problem;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use commands::{Overrides, Report};

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed problem file, or a bad command-line value.
    #[error("input error: {0}")]
    Input(String),
    /// The pipeline could not carry out a step.
    #[error("{0}")]
    Failed(String),
    #[error("cannot write report: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    fn failed<E: std::fmt::Display>(e: E) -> Self {
        CliError::Failed(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "firstint",
    version,
    about = "First integrals of ODEs and difference schemes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Problem definition file (TOML).
    #[arg(long)]
    problem: PathBuf,
    /// Number of integration or stepping steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Seed for every randomized check.
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance for the verification verdicts.
    #[arg(long)]
    tol: Option<f64>,
    /// Step scheme orbits in exact rational arithmetic.
    #[arg(long)]
    exact_rational: bool,
    /// Directory for the CSV reports and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the adjoint equation(s).
    Adjoint {
        #[command(flatten)]
        common: Common,
        /// Also solve the adjoint recurrences for polynomial solutions.
        #[arg(long)]
        solve: bool,
    },
    /// Tabulate the integral of every (symmetry, adjoint solution) pair.
    Integrals {
        #[command(flatten)]
        common: Common,
    },
    /// Integrate or step the problem and check the configured integrals.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Check the conservation identity for each symmetry.
    Identity {
        #[command(flatten)]
        common: Common,
        /// Restrict to these symmetries.
        #[arg(long = "symmetry")]
        symmetries: Vec<String>,
    },
    /// Check that the listed adjoint solutions solve the adjoint equations.
    VerifySubstitution {
        #[command(flatten)]
        common: Common,
        /// Restrict to these solutions.
        #[arg(long = "solution")]
        solutions: Vec<String>,
    },
}

fn write_reports(dir: &Path, report: &Report) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    for (name, contents) in &report.files {
        fs::write(dir.join(name), contents)?;
    }
    let summary = serde_json::to_string_pretty(&report.summary).map_err(CliError::failed)?;
    fs::write(dir.join("summary.json"), summary + "\n")?;
    Ok(())
}

type Action = Box<dyn FnOnce(&problem::Problem, &Overrides) -> Result<Report, CliError>>;

fn execute(cli: Cli) -> Result<Report, CliError> {
    let (common, action): (Common, Action) = match cli.command {
        Command::Adjoint { common, solve } => {
            (common, Box::new(move |p, _| commands::adjoint(p, solve)))
        }
        Command::Integrals { common } => (common, Box::new(commands::integrals)),
        Command::Run { common } => (common, Box::new(commands::run)),
        Command::Identity { common, symmetries } => (
            common,
            Box::new(move |p, o| commands::identity(p, o, &symmetries)),
        ),
        Command::VerifySubstitution { common, solutions } => (
            common,
            Box::new(move |p, o| commands::verify(p, o, &solutions)),
        ),
    };
    if let Some(tol) = common.tol {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(CliError::Input(format!(
                "--tol must be positive, got {tol}"
            )));
        }
    }
    let problem = problem::load(&common.problem)?;
    let overrides = Overrides {
        steps: common.steps,
        seed: common.seed,
        tol: common.tol,
        exact_rational: common.exact_rational,
    };
    let report = action(&problem, &overrides)?;
    if let Some(dir) = &common.out {
        write_reports(dir, &report)?;
    }
    Ok(report)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(report) => {
            print!("{}", report.text);
            println!("{}", if report.pass { "PASS" } else { "FAIL" });
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ CliError::Input(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            println!("FAIL");
            ExitCode::from(1)
        }
    }
}
