use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "molbench", version = env!("MOLBENCH_VERSION"), about = "Multimodal molecular property benchmark harness")]
pub struct Cli {
    /// Print errors to stderr as one JSON object.
    #[arg(long, global = true)]
    pub json_errors: bool,
    /// Worker threads for parallel steps (default: logical cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Summary format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, canonicalize, deduplicate and depict a source table.
    Curate(CurateArgs),
    /// Seeded train/test partition of curated records.
    Split(SplitArgs),
    /// Assemble prompts for a split.
    Prompt(PromptArgs),
    /// Send prompts to a chat-completions endpoint.
    Run(RunArgs),
    /// Score transcripts against gold labels.
    Eval(EvalArgs),
    /// Build a contrastive pair manifest.
    MinePairs(MinePairsArgs),
    /// Render result tables and model ranks.
    Report(ReportArgs),
    /// Write a fine-tuning job file for the external trainer.
    TrainJob(TrainJobArgs),
    /// NT-Xent loss of an exported embedding file.
    Ntxent(NtxentArgs),
    /// Write a mock-server script answering prompts with gold labels.
    MockScript(MockScriptArgs),
    /// Serve a scripted chat-completions endpoint.
    MockServe(MockServeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct CurateArgs {
    /// Source CSV/TSV.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Builtin task name or path to a task TOML.
    #[arg(long)]
    pub task: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Read at most this many data rows.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Skip SELFIES encoding.
    #[arg(long)]
    pub no_selfies: bool,
    /// Skip PNG rendering.
    #[arg(long)]
    pub no_images: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub task: String,
    #[arg(long, default_value_t = molbench_core::dataset::DEFAULT_TRAIN_RATIO)]
    pub ratio: f64,
    #[arg(long, default_value_t = molbench_core::dataset::DEFAULT_SPLIT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    Test,
    Train,
    All,
}

#[derive(Debug, Args, Serialize)]
pub struct PromptArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub task: String,
    /// zero_shot, iclK or cotK.
    #[arg(long, default_value = "icl2")]
    pub mode: String,
    /// smiles or selfies.
    #[arg(long, default_value = "smiles")]
    pub repr: String,
    /// Template directory with a checksum manifest (default: bundled).
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Which split supplies the target molecules. Examples always come from
    /// train.
    #[arg(long, value_enum, default_value_t = Targets::Test)]
    pub targets: Targets,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RunArgs {
    #[arg(long)]
    pub prompts: PathBuf,
    /// Endpoint TOML (see EndpointConfig).
    #[arg(long)]
    pub endpoint: PathBuf,
    /// Directory image paths are relative to (default: the prompts file's directory).
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Ordered transcripts, written when the batch completes.
    #[arg(long)]
    pub out: PathBuf,
    /// Append-only progress file (default: `<out>.checkpoint`).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Exit with the runtime code when any prompt failed.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub transcripts: PathBuf,
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub task: String,
    /// Model label for the report (default: from the transcripts).
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyArg {
    Aug,
    TAug,
}

#[derive(Debug, Args, Serialize)]
pub struct MinePairsArgs {
    #[arg(long)]
    pub records: PathBuf,
    /// Restrict anchors and positives to the split's train ids.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// MetricReport JSON files from `eval`.
    #[arg(long, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    /// Tidy CSV grid from an earlier report.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Mode to tabulate (default: every mode present).
    #[arg(long)]
    pub mode: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainJobArgs {
    /// Curated records the trainer reads.
    #[arg(long)]
    pub records: PathBuf,
    /// Pair manifest; enables the contrastive stage.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub base_model: String,
    #[arg(long, default_value_t = 1)]
    pub epochs: u32,
    #[arg(long, default_value_t = 1.0)]
    pub fraction: f64,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where the trainer writes predictions and adapters.
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct NtxentArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Compare against a loss reported elsewhere; fail when off by more than `tol`.
    #[arg(long)]
    pub expect: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct MockScriptArgs {
    #[arg(long)]
    pub prompts: PathBuf,
    #[arg(long)]
    pub records: PathBuf,
    /// Fraction of prompts answered wrongly on purpose.
    #[arg(long, default_value_t = 0.0)]
    pub flip_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub latency_ms: u64,
    #[arg(long, default_value_t = 0)]
    pub latency_spread_ms: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MockServeArgs {
    /// Script JSON (see MockScript).
    #[arg(long)]
    pub script: PathBuf,
    #[arg(long, default_value = "127.0.0.1:0")]
    pub addr: String,
}
