//! `d123`: convert, inspect, synchronize, query, analyze and export driving logs.
//!
//! Exit codes: 0 success, 1 user error, 2 data corruption, 3 internal error.
//! Results go to stdout, diagnostics to stderr.

/// `println!` that exits quietly once stdout is closed, e.g. piped into `head`.
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if let Err(e) = writeln!(std::io::stdout(), $($arg)*) {
            $crate::stdout_failed(e);
        }
    }};
}

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use d123_core::{Error, ErrorKind};

use config::Config;

#[derive(Debug, Parser)]
#[command(name = "d123", version, about = "Multi-modal driving log tools")]
struct Cli {
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    /// TOML config file.
    #[arg(long, global = true, env = "D123_CONFIG")]
    config: Option<PathBuf>,
    /// More diagnostics on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Errors only on stderr.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a source into log directories.
    Convert(ConvertArgs),
    /// Print modalities, rates, durations and metadata of a log.
    Info(InfoArgs),
    /// Build and persist a sync table.
    Sync(SyncArgs),
    /// Print the record of a modality matched at a timestamp or iteration.
    Query(QueryArgs),
    /// Ego-distance, speed and acceleration histograms per dataset and category.
    Stats(StatsArgs),
    /// Export a map, a lidar sweep or histograms to interchange formats.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SourceFormat {
    Jsonl,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    External,
    SelfContained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Criteria {
    Nearest,
    Exact,
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExportWhat {
    MapGeojson,
    LidarPly,
    HistogramsCsv,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    /// JSONL source directory or file:// URL; for synthetic, a preset name or a
    /// scenario file (.json or .toml).
    #[arg(long)]
    source: String,
    #[arg(long, value_enum)]
    format: SourceFormat,
    /// Output directory; defaults to the data root.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Upsample annotated boxes to this rate (Hz).
    #[arg(long, value_name = "HZ")]
    interpolate_boxes: Option<f64>,
    /// Synthetic only: number of logs to generate.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Synthetic only: seed of the first log; later logs use seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Synthetic only: log duration in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Synthetic only: log id, suffixed with `_<i>` when count > 1.
    #[arg(long)]
    log_id: Option<String>,
}

#[derive(Debug, Args)]
struct InfoArgs {
    log_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SyncArgs {
    log_dir: PathBuf,
    /// Reference modality; keyframes of it unless --rate is given.
    #[arg(long)]
    reference: Option<String>,
    /// Resample to this rate (Hz), anchored at the reference's first event.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    tolerance_ms: Option<f64>,
    #[arg(long, value_enum, default_value = "nearest")]
    criteria: Criteria,
    /// Directory the table is written to; defaults to the log directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct QueryArgs {
    log_dir: PathBuf,
    /// Timestamp in microseconds, or `iter:<n>` for frame n of a sync table.
    #[arg(long)]
    at: String,
    #[arg(long)]
    modality: String,
    #[arg(long, value_enum, default_value = "nearest")]
    criteria: Criteria,
    #[arg(long)]
    tolerance_ms: Option<f64>,
    /// Sync table used for `iter:<n>`; defaults to the first persisted one.
    #[arg(long)]
    sync: Option<String>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Data root with one directory per split; defaults to D123_DATA_ROOT.
    data_root: Option<PathBuf>,
    /// Splits to include; all splits when omitted.
    #[arg(long, value_delimiter = ',')]
    splits: Vec<String>,
    /// Histogram CSV; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON summary with per-category percentiles.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Taxonomy JSON replacing the built-in table.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Fail on labels the taxonomy does not cover.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Log directory, map file, or data root for histograms.
    input: PathBuf,
    #[arg(long, value_enum)]
    what: ExportWhat,
    /// Output file (lidar-ply, histograms-csv) or directory (map-geojson).
    #[arg(long)]
    out: PathBuf,
    /// lidar-ply: sensor id; defaults to the first lidar of the log.
    #[arg(long)]
    lidar: Option<String>,
    /// lidar-ply: sweep row.
    #[arg(long, default_value_t = 0)]
    row: usize,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.kind() {
                ErrorKind::User => 1,
                ErrorKind::Corruption => 2,
                ErrorKind::Internal => 3,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn stdout_failed(e: std::io::Error) -> ! {
    if e.kind() == std::io::ErrorKind::BrokenPipe {
        std::process::exit(0);
    }
    eprintln!("error: writing to stdout: {e}");
    std::process::exit(3);
}

pub struct Ctx {
    pub json: bool,
    pub config: Config,
}

impl Ctx {
    fn data_root(&self) -> Option<PathBuf> {
        std::env::var_os("D123_DATA_ROOT").map(PathBuf::from).or_else(|| self.config.data_root.clone())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let ctx = Ctx { json: cli.json || config.json, config };
    match cli.command {
        Command::Convert(a) => commands::convert(&ctx, a),
        Command::Info(a) => commands::info(&ctx, a),
        Command::Sync(a) => commands::sync(&ctx, a),
        Command::Query(a) => commands::query(&ctx, a),
        Command::Stats(a) => commands::stats(&ctx, a),
        Command::Export(a) => commands::export(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
