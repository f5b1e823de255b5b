//! `audiotok` command-line tool.
//!
//! Exit codes: 0 on success, 1 when some or all inputs failed, 2 on usage
//! or configuration errors.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod cmd;
pub mod config;
pub mod inputs;
pub mod report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration; nothing was run.
    Usage(anyhow::Error),
    /// The command ran but some or all of its work failed.
    Failed(anyhow::Error),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Failed(_) => EXIT_PARTIAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(e) | Self::Failed(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        Self::Failed(e)
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub(crate) fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(anyhow::anyhow!("{msg}"))
}

#[derive(Debug, Parser)]
#[command(name = "audiotok", version, about = "Audio token compression and evaluation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compress feature files and write an accounting report.
    #[command(args_override_self = true)]
    Compress(CompressArgs),
    /// Token counts, rates and attention cost across compression factors.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Score hypotheses against references with WER or BLEU.
    #[command(args_override_self = true)]
    Score(ScoreArgs),
    /// Attention cost and savings for given token counts or rates.
    #[command(args_override_self = true)]
    Cost(CostArgs),
    /// Score hypotheses with an LLM judge over HTTP.
    #[command(args_override_self = true)]
    Judge(JudgeArgs),
    /// Log-mel features from 16 kHz WAV files.
    #[command(args_override_self = true)]
    Melfront(MelfrontArgs),
    /// Print ATCF headers.
    Info(InfoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    /// ATCF or WAV files, or directories containing them.
    #[arg(long = "input", short, required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// uniavg, unisamp, unseg, globalmean or globalmax.
    #[arg(long)]
    pub compressor: String,
    /// Compression factor; required for uniavg and unisamp only.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub report_format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long = "input", short, required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6")]
    pub factors: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "uniavg,unisamp")]
    pub families: Vec<String>,
    #[command(flatten)]
    pub shape: ShapeArgs,
    #[arg(long, value_enum, default_value = "csv")]
    pub report_format: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct ShapeArgs {
    #[arg(long, default_value_t = 28)]
    pub layers: usize,
    #[arg(long, default_value_t = 3584)]
    pub d_model: usize,
    /// Text tokens added to every sequence.
    #[arg(long, default_value_t = 0)]
    pub text_tokens: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Wer,
    Bleu,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub refs: PathBuf,
    #[arg(long)]
    pub hyps: PathBuf,
    #[arg(long, value_enum)]
    pub metric: Metric,
    /// Lowercase and strip punctuation before scoring.
    #[arg(long)]
    pub normalize: bool,
    /// Split tokens into characters (for unsegmented scripts).
    #[arg(long)]
    pub zh_char_split: bool,
    /// Also report the mean of per-utterance WER.
    #[arg(long)]
    pub both_aggregations: bool,
    #[arg(long, default_value_t = 4)]
    pub max_n: usize,
    #[arg(long, value_enum, default_value = "json")]
    pub report_format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Audio token counts; the first is the baseline.
    #[arg(long, value_delimiter = ',', conflicts_with = "rates")]
    pub tokens: Vec<usize>,
    /// Token rates in tok/s; converted to counts over `--seconds`.
    #[arg(long, value_delimiter = ',')]
    pub rates: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub seconds: f64,
    #[arg(long, value_enum, default_value = "json")]
    pub report_format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct JudgeArgs {
    #[arg(long)]
    pub refs: PathBuf,
    #[arg(long)]
    pub hyps: PathBuf,
    /// JSON-lines output: one record per pair, then a summary record.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub model: Option<String>,
    /// Prompt template with `{prediction}` and `{reference}` placeholders.
    #[arg(long)]
    pub prompt_file: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    pub timeout_secs: u64,
    #[arg(long, default_value_t = 3)]
    pub max_retries: u32,
    #[arg(long, default_value_t = 1000)]
    pub backoff_ms: u64,
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
}

#[derive(Debug, Args)]
pub struct MelfrontArgs {
    #[arg(long = "input", short, required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub n_mels: usize,
    #[arg(long, default_value_t = 2)]
    pub pool_rate: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub log_floor: f64,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// One JSON object per line instead of text.
    #[arg(long)]
    pub json: bool,
}

/// Parses `argv` (including the binary name), runs the command and returns
/// the process exit code.
pub fn run(argv: Vec<OsString>) -> i32 {
    let argv = match config::expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Compress(a) => cmd::compress::run(&a),
        Command::Sweep(a) => cmd::sweep::run(&a),
        Command::Score(a) => cmd::score::run(&a),
        Command::Cost(a) => cmd::cost::run(&a),
        Command::Judge(a) => cmd::judge::run(&a),
        Command::Melfront(a) => cmd::melfront::run(&a),
        Command::Info(a) => cmd::info::run(&a),
    }
}
