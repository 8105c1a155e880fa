//! Command-line entry point: dataset generation, training, prediction,
//! cross-validation, grid search, solver timing, and decision-boundary
//! export.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 solver failure.

mod cfg;
mod cmds;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfg::{ConfigOpts, DataOpts};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(frtsvm::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "frtsvm",
    about = "Fuzzy-weighted twin SVM trainer with a coordinate-descent solver",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Generator: sine or ripley
    #[arg(long)]
    kind: String,
    /// Instance count for the sine generator [default: 3000]
    #[arg(long)]
    count: Option<usize>,
    /// Training rows for the ripley generator [default: 250]
    #[arg(long)]
    train_count: Option<usize>,
    /// Test rows for the ripley generator [default: 1000]
    #[arg(long)]
    test_count: Option<usize>,
    /// Carve this many rows into a training file (sine only); the rest
    /// become the test file
    #[arg(long)]
    split: Option<usize>,
    /// Stddev of Gaussian noise added to training features [default: 0]
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Seed for every random draw [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; with a train/test pair this is the stem for
    /// `<stem>_train.csv` and `<stem>_test.csv`
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    config: ConfigOpts,
    /// Cross-validation folds per cell [default: 10]
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Smallest exponent of the 2^i weight grid [default: -8]
    #[arg(long)]
    c_exp_min: Option<i32>,
    /// Largest exponent of the 2^i weight grid [default: 8]
    #[arg(long)]
    c_exp_max: Option<i32>,
    /// Smallest exponent of the 2^i width grid [default: -4]
    #[arg(long)]
    g_exp_min: Option<i32>,
    /// Largest exponent of the 2^i width grid [default: 4]
    #[arg(long)]
    g_exp_max: Option<i32>,
    /// Write the full result table as CSV
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the winning configuration as a config file
    #[arg(long)]
    best_out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset
    Gen(GenArgs),
    /// Train a model and write it to disk
    Train {
        #[command(flatten)]
        data: DataOpts,
        #[command(flatten)]
        config: ConfigOpts,
        /// Model output path
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
        /// Also dump per-instance memberships as CSV
        #[arg(long)]
        memberships_out: Option<PathBuf>,
        /// Also dump the per-epoch solver trace as CSV
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Predict labels for a labeled CSV and report accuracy
    Predict {
        /// Trained model path
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataOpts,
        /// Write `index,label,predicted` rows as CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// k-fold cross-validation
    Cv {
        #[command(flatten)]
        data: DataOpts,
        #[command(flatten)]
        config: ConfigOpts,
        /// Number of folds [default: 10]
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Write per-fold accuracies as CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive hyperparameter grid search
    Grid(GridArgs),
    /// Compare solver wall times on the dataset's dual problems
    Time {
        #[command(flatten)]
        data: DataOpts,
        #[command(flatten)]
        config: ConfigOpts,
        /// Timed repetitions per method (after one warm-up) [default: 5]
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Write the timing table as CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export normalized plane distances and labels over a 2-D grid
    Boundary {
        /// Trained 2-D model path
        #[arg(long)]
        model: PathBuf,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x1_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        x1_max: f64,
        #[arg(long, allow_hyphen_values = true)]
        x2_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        x2_max: f64,
        /// Grid points per axis [default: 100]
        #[arg(long, default_value_t = 100)]
        resolution: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(args) => cmds::cmd_gen(args),
        Command::Train { data, config, out, memberships_out, trace_out } => {
            cmds::cmd_train(data, config, out, memberships_out.as_deref(), trace_out.as_deref())
        }
        Command::Predict { model, data, out } => cmds::cmd_predict(model, data, out.as_deref()),
        Command::Cv { data, config, folds, out } => {
            cmds::cmd_cv(data, config, *folds, out.as_deref())
        }
        Command::Grid(args) => cmds::cmd_grid(args),
        Command::Time { data, config, reps, out } => {
            cmds::cmd_time(data, config, *reps, out.as_deref())
        }
        Command::Boundary { model, out, x1_min, x1_max, x2_min, x2_max, resolution } => {
            cmds::cmd_boundary(model, out, *x1_min, *x1_max, *x2_min, *x2_max, *resolution)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Core(err)) => {
            eprintln!("error: {err}");
            let code = match err {
                frtsvm::Error::NonConvergence { .. }
                | frtsvm::Error::Factorization(_)
                | frtsvm::Error::Degenerate(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}
