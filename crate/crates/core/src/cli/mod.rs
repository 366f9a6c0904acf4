//! Command-line front end: one subcommand per pipeline stage plus `demo`.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::disambig::DisambigError;
use crate::pipeline::PipelineError;
use crate::training::{TrainConfig, TrainError};
use crate::treelstm::{ModelError, CHECKPOINT_VERSION};

pub use commands::*;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Diverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Diverged(_) => 3,
        }
    }

    pub(crate) fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NonFiniteState(_) => CliError::Diverged(e.to_string()),
            ModelError::InvalidConfig(_) | ModelError::BridgeRequired { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::MalformedConfigLine(_)
            | TrainError::UnknownKey(_)
            | TrainError::InvalidValue { .. }
            | TrainError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            TrainError::NonFiniteLoss | TrainError::Diverged { .. } => {
                CliError::Diverged(e.to_string())
            }
            TrainError::Model(m) => m.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DisambigError> for CliError {
    fn from(e: DisambigError) -> Self {
        match e {
            DisambigError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "treetrans",
    about = "Translate generic LaTeX formulae into semantic LaTeX",
    disable_version_flag = true
)]
pub struct Cli {
    /// Worker threads; 1 runs everything on the calling thread
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for every random choice of the subcommand (overrides config files)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print build information and the default configuration hash
    #[arg(long)]
    pub version: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic paired corpus as TSV
    GenCorpus(GenCorpusArgs),
    /// Split formulae at top-level comparators into extra pairs
    Augment(AugmentArgs),
    /// Parse one formula per line into canonical JSON trees
    Parse(ParseArgs),
    /// Cluster trees by topology into minibatches
    Cluster(ClusterArgs),
    /// Train a translation model
    Train(TrainArgs),
    /// Evaluate a checkpoint on a corpus
    Eval(EvalArgs),
    /// Translate a single formula
    Translate(TranslateArgs),
    /// Pick the semantic macro for an ambiguous symbol
    Disambiguate(DisambiguateArgs),
    /// Train the symbol disambiguator
    TrainDisambiguator(TrainDisambiguatorArgs),
    /// Run gen-corpus, augment, parse, cluster, train and eval end to end
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenCorpusArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Shallower formulae from a smaller grammar
    #[arg(long)]
    pub small: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AugmentArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ParseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub command_end: bool,
    #[arg(long)]
    pub concat_end: bool,
    #[arg(long)]
    pub infix_to_prefix: bool,
    /// Keep the binarized child order
    #[arg(long)]
    pub no_right_biggest: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Print cluster count, total hull size and cost proxy as JSON
    #[arg(long)]
    pub report: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Flat `key = value` file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, `key=value`; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub checkpoint_dir: PathBuf,
    /// Per-epoch metrics; defaults to metrics.csv in the checkpoint directory
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Bag-of-words accuracy over content positions only
    #[arg(long)]
    pub content_only_bow: bool,
    /// Feed the decoder the true parent values
    #[arg(long)]
    pub teacher_forcing: bool,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
}

#[derive(Debug, Clone, Args)]
pub struct TranslateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(
        long,
        conflicts_with = "formula_file",
        required_unless_present = "formula_file"
    )]
    pub formula: Option<String>,
    #[arg(long)]
    pub formula_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DisambiguateArgs {
    #[arg(long)]
    pub symbol: String,
    #[arg(
        long,
        conflicts_with = "formula_file",
        required_unless_present = "formula_file"
    )]
    pub formula: Option<String>,
    #[arg(long)]
    pub formula_file: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainDisambiguatorArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the candidate table as JSON
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub hidden_layers: usize,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    /// One network per symbol instead of a shared one
    #[arg(long)]
    pub per_symbol: bool,
    #[arg(long)]
    pub binary_bow: bool,
    /// Held-out share used for the reported accuracy
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
}

#[derive(Debug, Clone, Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 40)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub state: usize,
}

/// Hash of a training configuration's canonical `key = value` form.
pub fn config_hash(cfg: &TrainConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_kv().as_bytes()))
}

pub fn version_text() -> String {
    format!(
        "treetrans {} ({}-{}, {}), checkpoint format {}, default config sha256 {}",
        env!("CARGO_PKG_VERSION"),
        std::env::consts::ARCH,
        std::env::consts::OS,
        if cfg!(debug_assertions) {
            "debug"
        } else {
            "release"
        },
        CHECKPOINT_VERSION,
        config_hash(&TrainConfig::default())
    )
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if cli.version {
        println!("{}", version_text());
        return 0;
    }
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let Some(command) = &cli.command else {
        use clap::CommandFactory;
        eprintln!("{}", Cli::command().render_help());
        return Err(CliError::Usage("no subcommand given".into()));
    };
    if cli.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let seed = cli.seed;
    pool.install(|| match command {
        Command::GenCorpus(a) => gen_corpus(a, seed.unwrap_or(0)),
        Command::Augment(a) => augment(a),
        Command::Parse(a) => parse(a),
        Command::Cluster(a) => cluster(a).map(|_| ()),
        Command::Train(a) => train(a, seed).map(|_| ()),
        Command::Eval(a) => eval(a).map(|_| ()),
        Command::Translate(a) => translate(a).map(|s| println!("{s}")),
        Command::Disambiguate(a) => disambiguate(a).map(|s| println!("{s}")),
        Command::TrainDisambiguator(a) => train_disambiguator(a, seed.unwrap_or(0)).map(|_| ()),
        Command::Demo(a) => demo(a, seed.unwrap_or(0)),
    })
}
