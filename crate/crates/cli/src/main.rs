//! `skelres`: encode skeleton corpora, train residual networks on the
//! encoded images, run evaluation protocols and compare against published
//! accuracies.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use skelres_core::resnet::VALID_DEPTHS;
use skelres_core::Error;

#[derive(Parser)]
#[command(name = "skelres", version, about = "Skeleton action recognition with residual networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a raw skeleton corpus into 40x40 PNG images plus a manifest.
    Encode(EncodeArgs),
    /// Expand an encoded image set into augmented 32x32 training views.
    Augment(AugmentArgs),
    /// Train one model on the training side of a protocol split.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test side of a protocol split.
    Evaluate(EvaluateArgs),
    /// Run full protocols (every split) and write a comparison report.
    Protocol(ProtocolArgs),
    /// Build the comparison report from saved results.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DatasetArg {
    Msr3d,
    Kard,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ExperimentArg {
    A,
    B,
    C,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    /// 8 crops x 3 flips x 6 channel orders.
    Full,
    /// 8 crops.
    Crops,
}

/// Options shared by every command that reads the run configuration.
#[derive(Args, Clone)]
pub struct ConfigArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Joint-to-part map file (`P1: i,j,...` lines).
    #[arg(long)]
    pub part_map: Option<PathBuf>,
    /// Sequence identifiers to drop, one per line.
    #[arg(long)]
    pub exclusions: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct TrainingArgs {
    /// One of 20, 32, 44, 56, 110.
    #[arg(long, value_parser = parse_depth)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
}

fn parse_depth(s: &str) -> Result<usize, String> {
    let d: usize = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if VALID_DEPTHS.contains(&d) {
        Ok(d)
    } else {
        Err(format!("depth must be one of {VALID_DEPTHS:?}"))
    }
}

#[derive(Args)]
pub struct EncodeArgs {
    #[arg(long, value_enum)]
    pub dataset: DatasetArg,
    /// Directory with the raw skeleton files.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Args)]
pub struct AugmentArgs {
    #[arg(long, value_enum)]
    pub dataset: DatasetArg,
    /// Manifest written by `encode`.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Which protocol split a single model is trained or evaluated on.
#[derive(Args, Clone)]
pub struct SplitArgs {
    #[arg(long, value_enum)]
    pub dataset: DatasetArg,
    #[arg(long)]
    pub subset: String,
    #[arg(long, value_enum)]
    pub experiment: Option<ExperimentArg>,
    /// Split index (KARD repeats); 0 for cross-subject.
    #[arg(long, default_value_t = 0)]
    pub split: usize,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Also write the evaluation as JSON into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ProtocolArgs {
    #[arg(long, value_enum)]
    pub dataset: DatasetArg,
    /// Restrict to one subset; all three by default.
    #[arg(long)]
    pub subset: Option<String>,
    /// Restrict to one KARD experiment; A, B and C by default.
    #[arg(long, value_enum)]
    pub experiment: Option<ExperimentArg>,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Result files or directories searched for them.
    #[arg(long, required = true, num_args = 1..)]
    pub results: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Why a command failed, and which exit code that maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Core(Error::Config(_)) => 1,
            Failure::Core(Error::Divergence { .. }) => 3,
            Failure::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Core(e) => e.fmt(f),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Encode(a) => commands::encode(a),
        Command::Augment(a) => commands::augment(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Protocol(a) => commands::protocol(a),
        Command::Report(a) => commands::report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
