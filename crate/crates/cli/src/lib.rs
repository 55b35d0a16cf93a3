//! The `motifgen` pipeline: label, build-dataset, motif, melody, train, eval
//! and synth-corpus. Every command is deterministic for a fixed seed.

pub mod commands;
pub mod config;
pub mod files;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{PipelineConfig, Preset};

/// Exit status 1 for usage and configuration problems, 2 for anything
/// wrong with the data being processed.
#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(e) | CliError::Data(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

pub fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(anyhow::anyhow!("{msg}"))
}

pub trait DataContext<T> {
    /// Tags an error as a data error with context.
    fn data(self, context: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> DataContext<T> for Result<T, E> {
    fn data(self, context: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|e| CliError::Data(e.into().context(context())))
    }
}

#[derive(Debug, Parser)]
#[command(name = "motifgen", version, about = "Motif labeling, motif synthesis and motif-driven melody generation")]
pub struct Cli {
    /// TOML pipeline config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label variants of each motif in MIDI files and write them back.
    Label(LabelArgs),
    /// Segment, tokenize and split a MIDI corpus.
    BuildDataset(DatasetArgs),
    /// Synthesize a one-bar motif from text or valence/arousal.
    Motif(MotifArgs),
    /// Generate a phrase from a motif with trained models.
    Melody(MelodyArgs),
    /// Train the variant branches and the phrase model.
    Train(TrainArgs),
    /// Variant proportion and variant distance of a labeled corpus.
    Eval(EvalArgs),
    /// Write a synthetic labeled corpus.
    SynthCorpus(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StepArg {
    Bar,
    HalfBar,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// MIDI file or directory.
    pub input: PathBuf,
    /// Directory for labeled MIDI files and labels.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Window step.
    #[arg(long, value_enum)]
    pub step: Option<StepArg>,
    /// Motif length in bars for files without a motif track.
    #[arg(long)]
    pub motif_bars: Option<u32>,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// MIDI file or directory.
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Train, validation and test ratios, e.g. 8.5,1,0.5.
    #[arg(long, value_delimiter = ',')]
    pub split: Option<Vec<f64>>,
    /// Longest token sequence; longer clips are cut at bar lines.
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Keep chord tokens in the sequences.
    #[arg(long)]
    pub keep_chords: bool,
    /// Replace existing variant labels with the labeler's.
    #[arg(long)]
    pub relabel: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderArg {
    Lexicon,
    Command,
}

#[derive(Debug, Args)]
pub struct MotifArgs {
    /// Valence and arousal, e.g. 3,8.
    #[arg(long, conflicts_with = "text")]
    pub va: Option<String>,
    /// Text describing the mood.
    #[arg(long)]
    pub text: Option<String>,
    #[arg(long, value_enum)]
    pub provider: Option<ProviderArg>,
    /// Tab-separated lexicon for the lexicon provider.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Program for the command provider; it reads text on stdin and prints `v,a`.
    #[arg(long)]
    pub va_command: Option<String>,
    /// Tonic, e.g. C4 or F#3.
    #[arg(long)]
    pub key: Option<String>,
    /// Output MIDI file.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional JSON report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MelodyArgs {
    /// Motif MIDI file; its motif track (or first bar) is the motif.
    #[arg(long, conflicts_with_all = ["text", "va"])]
    pub motif: Option<PathBuf>,
    #[arg(long, conflicts_with = "va")]
    pub text: Option<String>,
    #[arg(long)]
    pub va: Option<String>,
    #[arg(long, value_enum)]
    pub provider: Option<ProviderArg>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub va_command: Option<String>,
    #[arg(long)]
    pub key: Option<String>,
    /// Directory holding branches.ckpt and phrase.ckpt.
    #[arg(long)]
    pub checkpoints: Option<PathBuf>,
    /// Phrase length in bars.
    #[arg(long)]
    pub bars: Option<u32>,
    /// Sampling temperature; 0 is greedy.
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    All,
    Branches,
    Phrase,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of labeled MIDI files.
    pub corpus: PathBuf,
    /// Directory for checkpoints and loss.log.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, value_enum, default_value = "all")]
    pub stage: StageArg,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of labeled MIDI files.
    pub input: PathBuf,
    /// Write the report as JSON here.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Row name in the table.
    #[arg(long, default_value = "corpus")]
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Motif followed by variants of distinct types and free bars.
    Phrases,
    /// Two-bar motif/variant pairs, one per canonical transform.
    Pairs,
    /// Motifs of varying length with unlabeled transformed chunks.
    Stress,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "phrases")]
    pub kind: SynthKind,
    /// Number of clips (per transform for pairs).
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 8)]
    pub bars: u32,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let seed = cli.seed.unwrap_or(cfg.seed);
    match &cli.command {
        Command::Label(a) => commands::label::run(a, &cfg),
        Command::BuildDataset(a) => commands::dataset::run(a, &cfg, seed),
        Command::Motif(a) => commands::motif::run(a, &cfg, seed),
        Command::Melody(a) => commands::melody::run(a, &cfg, seed),
        Command::Train(a) => commands::train::run(a, &cfg, seed),
        Command::Eval(a) => commands::eval::run(a),
        Command::SynthCorpus(a) => commands::synth::run(a, seed),
    }
}
