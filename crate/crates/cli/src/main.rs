//! `xaml`: train, apply and benchmark extreme-learning-machine ensembles.
//!
//! Exit status is 0 on success, 1 on a runtime error (one diagnostic line on
//! stderr) and 2 on a usage error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use xaml_core::{SearchMode, TaskKind};

#[derive(Parser)]
#[command(name = "xaml", version, about = "Ensembles of extreme learning machines with automatic hyperparameter search")]
struct Cli {
    /// Worker threads for grid search and ensemble training (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select hyperparameters on a CSV file and save the fitted ensemble.
    Train(TrainArgs),
    /// Write one prediction per input row.
    Predict(PredictArgs),
    /// Score a saved model on labelled data.
    Evaluate(EvaluateArgs),
    /// Outer k-fold cross-validation of the whole AutoML procedure.
    Cv(CvArgs),
    /// Run a benchmark suite.
    Benchmark(BenchmarkArgs),
    /// Write a generated dataset and its schema.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Classification,
    Regression,
}

impl From<TaskArg> for TaskKind {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Classification => TaskKind::Classification,
            TaskArg::Regression => TaskKind::Regression,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Fast,
    Accurate,
}

impl From<ModeArg> for SearchMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Fast => SearchMode::Fast,
            ModeArg::Accurate => SearchMode::Accurate,
        }
    }
}

/// Options shared by every command that runs the search.
#[derive(Args)]
pub struct SearchArgs {
    #[arg(long, value_enum, default_value = "fast")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 7)]
    pub ensemble_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Half-width of the uniform input-weight and bias distribution.
    #[arg(long, default_value_t = 1.0)]
    pub weight_scale: f64,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long, value_enum)]
    pub task: TaskArg,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional training report (JSON).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Predictions CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Schema naming the target column.
    #[arg(long)]
    pub schema: PathBuf,
    /// Optional metrics document (JSON).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct CvArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long, value_enum)]
    pub task: TaskArg,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Double each training part and add 0.1% noise to the copies.
    #[arg(long)]
    pub augment: bool,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SuiteArg {
    Har,
    Parkinsons,
    Qsar,
    Cnae9,
    Movies,
    Synthetic,
}

#[derive(Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum)]
    pub suite: SuiteArg,
    /// Directory holding the downloaded dataset files.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Exit with status 1 when a run misses its floor.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum GeneratorArg {
    TwoGaussians,
    Blobs,
    Sine,
    Noise,
}

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: GeneratorArg,
    #[arg(long, default_value_t = 400)]
    pub rows: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Schema file to write next to the data.
    #[arg(long)]
    pub schema_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Cv(a) => commands::cv(&a),
        Command::Benchmark(a) => commands::benchmark(&a),
        Command::Generate(a) => commands::generate(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
