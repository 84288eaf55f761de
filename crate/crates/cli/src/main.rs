//! `funcgls`: fit, predict, simulate, screen and roll from the command line.
//!
//! Exit codes: 0 on success, 2 for invalid input or configuration, 3 when the
//! numerical core fails.

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use files::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "funcgls",
    version,
    about = "Functional regression with correlated errors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    #[value(alias = "md")]
    Markdown,
}

#[derive(Debug, Args)]
struct Common {
    /// `key = value` settings file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random seed; required by `simulate` and `roll`
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Functional covariate in wide CSV format; repeat for several
    #[arg(long = "x", required = true)]
    x: Vec<PathBuf>,
    /// Scalar responses, one per curve
    #[arg(long = "y")]
    y: PathBuf,
    /// lm, gls or igls
    #[arg(long)]
    method: Option<String>,
    /// fpc or bspline
    #[arg(long)]
    basis: Option<String>,
    /// Candidate dimensions: `3`, `2,4,6` or `1..8`
    #[arg(long)]
    k: Option<String>,
    /// identity, ar1 or equicorrelated
    #[arg(long)]
    covariance: Option<String>,
    /// Fixed covariance parameter instead of a search
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model and write its summary and coefficient function
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Fit a model, then forecast the responses of new curves
    Predict {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// New curves, one file per covariate in the order of `--x`
        #[arg(long = "new", required = true)]
        new: Vec<PathBuf>,
        /// Steps ahead of each new curve (default 1, 2, ...)
        #[arg(long, value_delimiter = ',')]
        horizons: Vec<i64>,
    },
    /// Run a Monte-Carlo study and write its summary tables
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Extra `key=value` settings, applied after the config file
        settings: Vec<String>,
    },
    /// Distance correlation screening table
    Dcor {
        #[command(flatten)]
        common: Common,
        /// Functional candidate as `name=path` (wide CSV)
        #[arg(long = "covariate")]
        covariates: Vec<String>,
        /// Scalar candidate as `name=path`
        #[arg(long = "scalar")]
        scalars: Vec<String>,
        /// Scalar response as `name=path`
        #[arg(long = "response", required = true)]
        responses: Vec<String>,
    },
    /// Rolling-origin forecast comparison of FLM and FGLS
    Roll {
        #[command(flatten)]
        common: Common,
        /// Panel responses (`group,week,rate`); a synthetic panel is used when absent
        #[arg(long)]
        rates: Option<PathBuf>,
        /// Functional covariate as `name=path` (`group,week,t_1..t_M`)
        #[arg(long = "covariate")]
        covariates: Vec<String>,
        /// Add the previous LEN responses as a covariate named `rate`
        #[arg(long)]
        lag_rate: Option<usize>,
        /// Extra `key=value` settings, applied after the config file
        settings: Vec<String>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit { common, model } => commands::fit(&common, &model),
        Command::Predict {
            common,
            model,
            new,
            horizons,
        } => commands::predict(&common, &model, &new, &horizons),
        Command::Simulate { common, settings } => commands::simulate(&common, &settings),
        Command::Dcor {
            common,
            covariates,
            scalars,
            responses,
        } => commands::dcor(&common, &covariates, &scalars, &responses),
        Command::Roll {
            common,
            rates,
            covariates,
            lag_rate,
            settings,
        } => commands::roll(&common, rates.as_deref(), &covariates, lag_rate, &settings),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
