use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pcb", version, about = "Appraisal-informed prediction of post-consumption behavior")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted-signal synthetic dataset.
    Synth(SynthArgs),
    /// Train one architecture (or the full sweep) over repeated seeds.
    Train(TrainArgs),
    /// Render the results table from metrics CSVs below a directory.
    Report(ReportArgs),
    /// Integrated-Gradients token attributions from a checkpoint.
    Attribute(AttributeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator config (JSON); omitted keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `key=value` override, repeatable; value is JSON.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Dataset path (`.jsonl` or `.csv`); defaults to `synthetic.jsonl`
    /// under the output root.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run config (JSON) naming the dataset and the experiment settings.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `experiment.base_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Repetitions trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Run all twelve architectures for both PCB targets.
    #[arg(long)]
    pub sweep: bool,
    /// Skip writing model checkpoints.
    #[arg(long)]
    pub no_checkpoints: bool,
    /// Output directory; defaults to the output root.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory searched recursively for `metrics.csv` files; defaults to
    /// the output root.
    pub dir: Option<PathBuf>,
    /// Also write the table to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Gold,
    Predicted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    Pad,
    Zero,
}

#[derive(Debug, Args)]
pub struct AttributeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Record ids, comma separated or repeated.
    #[arg(long = "id", value_delimiter = ',')]
    pub ids: Vec<String>,
    /// Also attribute the N records with the highest and the N with the
    /// lowest predicted probability of the High class.
    #[arg(long, value_name = "N")]
    pub extremes: Option<usize>,
    #[arg(long, value_enum, default_value_t = TargetArg::Gold)]
    pub target: TargetArg,
    #[arg(long, default_value_t = 128)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = BaselineArg::Pad)]
    pub baseline: BaselineArg,
    /// Tokens listed per report on stdout.
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Report directory; defaults to `attributions` under the output root.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
