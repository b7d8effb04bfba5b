//! `eigeninf`: eigen-decompositions, eigenspace tests, network centrality
//! and Monte Carlo checks from the command line.
//!
//! Exit codes: 0 on success, 1 on input or validation errors, 2 when
//! `--assert-null` is given and the null hypothesis is rejected.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "eigeninf", version, about = "Inference on eigenspaces of noisy non-symmetric matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Report format. CSV flattens the report to `key,value` rows.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Seed for commands that draw random numbers.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    Full,
    KroneckerColumns,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Eigenvalues, biorthogonal bases and spectral projectors of a matrix.
    Decompose {
        /// Matrix file (.csv or .json).
        #[arg(long)]
        input: PathBuf,
        /// Roots to split off: `largest:k`, `indices:1,3`, `modulus>x`, `modulus<x`, `real>x`.
        #[arg(long, default_value = "largest:1")]
        select: String,
    },
    /// Wald test that a candidate matrix spans (or annihilates) an eigenspace.
    Wald {
        #[command(flatten)]
        data: SampleArgs,
        /// Candidate basis `υ` (p×s).
        #[arg(long, conflicts_with = "annihilator", required_unless_present = "annihilator")]
        upsilon: Option<PathBuf>,
        /// Annihilator `υ⊥` (p×c) of the eigenspace, given directly.
        #[arg(long)]
        annihilator: Option<PathBuf>,
        #[arg(long, default_value = "largest:1")]
        select: String,
        /// Test level.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Exit with status 2 when the null is rejected at `--alpha`.
        #[arg(long)]
        assert_null: bool,
    },
    /// t-test on one coefficient of the normalized eigenspace basis `[D; I]`.
    Ttest {
        #[command(flatten)]
        data: SampleArgs,
        #[arg(long, default_value = "largest:1")]
        select: String,
        /// One-based coefficient `i,j` of `D`.
        #[arg(long, default_value = "1,1")]
        coef: String,
        /// Hypothesized value.
        #[arg(long, default_value_t = 0.0)]
        d0: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        assert_null: bool,
    },
    /// Eigenvector centrality with confidence statements from repeated snapshots.
    Centrality {
        /// A single edge list (.csv `from,to,weight` or .json); scores only.
        #[arg(long, conflicts_with = "series", required_unless_present = "series")]
        graph: Option<PathBuf>,
        /// Directory with one edge list per period.
        #[arg(long)]
        series: Option<PathBuf>,
        /// Score vector to test for membership in the confidence set
        /// (comma-separated, vertex order as in the report).
        #[arg(long, requires = "series")]
        scores: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        assert_null: bool,
    },
    /// Monte Carlo size and power of the tests.
    Simulate {
        /// Simulation config (JSON). Without it the built-in four-vertex trade design is used.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Sample sizes for the built-in design.
        #[arg(long, value_delimiter = ',', default_value = "200,2000")]
        n: Vec<usize>,
        /// Replications for the built-in design.
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        /// Also write `rejection.csv` and `distances.csv` into this directory.
        #[arg(long)]
        tables: Option<PathBuf>,
    },
    /// Whether some positive definite metric makes the matrix symmetric.
    CheckSymmetry {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct SampleArgs {
    /// Observations: a directory of matrix files or a JSON array of matrices.
    #[arg(long, required_unless_present = "mean", conflicts_with_all = ["mean", "covariance", "n"])]
    pub sample: Option<PathBuf>,
    /// Covariance structure estimated from `--sample`.
    #[arg(long, value_enum, default_value_t = Structure::Full)]
    pub structure: Structure,
    /// Estimated mean matrix, used with `--covariance` and `--n`.
    #[arg(long, requires_all = ["covariance", "n"])]
    pub mean: Option<PathBuf>,
    /// Covariance of `vec M` (p²×p²) or of one column (p×p, pooled as `I ⊗ Ω_M`).
    #[arg(long)]
    pub covariance: Option<PathBuf>,
    /// Number of observations behind `--mean`.
    #[arg(long)]
    pub n: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(&cli) {
        Ok(outcome) => {
            for note in &outcome.notices {
                eprintln!("notice: {note}");
            }
            if let Err(e) = output::emit(&outcome.report, &cli.common) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            if outcome.null_rejected {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(hint) = output::hint(&e) {
                eprintln!("hint: {hint}");
            }
            ExitCode::from(1)
        }
    }
}
