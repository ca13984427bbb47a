//! `formbench`: generation, screening, evaluation and reporting for
//! form-extraction benchmarks.

mod commands;
mod config;
mod corpus;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use formbench_core::doc_model::ModalityKind;

pub use config::FileConfig;

/// Exit status for a bad command line.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for a failed operation.
pub const EXIT_FAILURE: i32 = 1;

/// A command line that parsed but names inputs that cannot be used.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn parse_modality(s: &str) -> Result<ModalityKind, String> {
    ModalityKind::from_cli_name(s).ok_or_else(|| format!("expected one of plain, spatial, image, spatial+image; got {s:?}"))
}

fn parse_dpi(s: &str) -> Result<u32, String> {
    match s {
        "200" => Ok(200),
        "50" => Ok(50),
        _ => Err(format!("expected 200 or 50; got {s:?}")),
    }
}

#[derive(Debug, Parser)]
#[command(name = "formbench", version, about = "Form-extraction benchmark generation and structure-aware scoring")]
pub struct Cli {
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assign placeholder values to every widget of a template.
    Seed(SeedArgs),
    /// Ask a model to name and structure the placeholders, then reconcile.
    Discover(DiscoverArgs),
    /// Fill a template with synthetic values and write its ground truth.
    Reskin(ReskinArgs),
    /// Write plain and spatial text for a document.
    Export(ExportArgs),
    /// Screen generated documents and write findings and an exclusion ledger.
    Screen(ScreenArgs),
    /// Send every document of a corpus to a model endpoint.
    Run(RunArgs),
    /// Score predictions against ground truth.
    Score(ScoreArgs),
    /// Aggregate document scores into CSV and Markdown reports.
    Report(ReportArgs),
    /// Replace `$ref` references in a schema with their definitions.
    InlineDefs(InlineArgs),
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    /// Template document (.docmodel.json).
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Seed map output; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also write the template with placeholders rendered into its widgets.
    #[arg(long, value_name = "FILE")]
    pub seeded_doc: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Output directory for `<id>.schema.json`, `<id>.mapping.json` and
    /// `<id>.reconcile.json`.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Replay a saved model reply instead of calling an endpoint.
    #[arg(long, value_name = "FILE", conflicts_with = "endpoint")]
    pub response: Option<PathBuf>,
    /// OpenAI-compatible chat-completions URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Rendering of the seeded page to attach to the request.
    #[arg(long, value_name = "FILE")]
    pub image: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReskinArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub schema: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub mapping: PathBuf,
    /// Generation seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for `<id>.filled.docmodel.json`, `<id>.gt.json`
    /// and `<id>.fills.json`.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Output directory; defaults to the input's directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Page rendering to record in the manifest, as DPI=PATH.
    #[arg(long = "image", value_name = "DPI=PATH")]
    pub images: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    /// Corpus directory holding `<id>.gt.json`, `<id>.schema.json` and
    /// `<id>.manifest.json`.
    #[arg(long, value_name = "DIR")]
    pub dir: PathBuf,
    /// Findings output (default `<dir>/findings.jsonl`).
    #[arg(long, value_name = "FILE")]
    pub findings: Option<PathBuf>,
    /// Ledger output (default `<dir>/ledger.json`).
    #[arg(long, value_name = "FILE")]
    pub ledger: Option<PathBuf>,
    /// Existing ledger (for example from a manual audit) to merge in.
    #[arg(long, value_name = "FILE")]
    pub merge: Option<PathBuf>,
    /// Compare text case-insensitively.
    #[arg(long)]
    pub case_insensitive: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "DIR")]
    pub dir: PathBuf,
    /// Predictions JSONL output.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// plain, spatial, image or spatial+image.
    #[arg(long, value_parser = parse_modality)]
    pub modality: Option<ModalityKind>,
    /// Image resolution: 200 or 50.
    #[arg(long, value_parser = parse_dpi)]
    pub dpi: Option<u32>,
    /// Inline `$defs` into each schema before prompting.
    #[arg(long)]
    pub inline_defs: bool,
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Skip documents already present in the output.
    #[arg(long)]
    pub resume: bool,
    /// File whose text replaces the default prompt; `{schema}` marks the
    /// schema position.
    #[arg(long, value_name = "FILE")]
    pub prompt_template: Option<PathBuf>,
    /// Skip documents the ledger removes.
    #[arg(long, value_name = "FILE")]
    pub ledger: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Ground-truth file, or a directory of `<id>.gt.json` files.
    #[arg(long, value_name = "PATH")]
    pub gt: PathBuf,
    /// Predictions JSONL.
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,
    /// Schema for a single ground-truth file; otherwise `<id>.schema.json`
    /// next to it, or inferred from the ground truth.
    #[arg(long, value_name = "FILE")]
    pub schema: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub ledger: Option<PathBuf>,
    /// ANLS threshold (default 0.5).
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub case_insensitive: bool,
    /// Document scores as JSONL; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Document score files written by `score`.
    #[arg(long = "scores", value_name = "FILE", required = true, num_args = 1..)]
    pub scores: Vec<PathBuf>,
    /// Directory for report.csv and report.md.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Bootstrap seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub resamples: Option<usize>,
    /// Confidence level of the intervals (default 0.95).
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Debug, Args)]
pub struct InlineArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// Parse `args` (including the program name), run the command and return
/// the process exit status.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::run(cli) {
        Ok(()) => 0,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}
