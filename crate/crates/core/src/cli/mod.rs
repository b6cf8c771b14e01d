//! Command-line front end. Every command reads an optional TOML config,
//! applies flag overrides, and writes its artifacts plus `config.toml` and a
//! `manifest.tsv` of SHA-256 hashes under `--out`.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{synthetic_tasks, OutDir};
pub use config::{
    AlignConfig, AnalyzeConfig, EmbedTrainConfig, FeaturizeConfig, FinetuneSection, MetaTrainSection, RunConfig,
    SyntheticConfig,
};

use crate::artic::FeatureBlock;
use crate::embedding::Architecture;
use crate::error::Result;
use crate::meta_learn::Procedure;

#[derive(Debug, Parser)]
#[command(name = "laml", version, about = "Articulatory features, meta-learning and duration extraction for TTS")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Feature table TSV; the bundled table is used otherwise.
    #[arg(long, global = true)]
    pub table: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print one row of 66 articulatory features per phoneme.
    Featurize(FeaturizeArgs),
    /// Fit an embedding function to gold vectors and print the final average distance.
    EmbedTrain(EmbedTrainArgs),
    /// Meta-train an acoustic model over several tasks.
    MetaTrain(MetaTrainArgs),
    /// Adapt a meta-checkpoint to an unseen task.
    Finetune(FinetuneArgs),
    /// Extract durations from an attention map.
    Align(AlignArgs),
    /// Zero-shot report and embedding export for a checkpoint.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// IPA string.
    pub text: Option<String>,
    /// File with one IPA utterance per line.
    #[arg(long, conflicts_with = "text")]
    pub file: Option<PathBuf>,
    /// Emit a word-boundary row between words.
    #[arg(long)]
    pub word_boundary: bool,
}

#[derive(Debug, Args)]
pub struct EmbedTrainArgs {
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub architecture: Option<Architecture>,
    #[arg(long)]
    pub block: Option<FeatureBlock>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub output_dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MetaTrainArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub procedure: Option<Procedure>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub tasks: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub inner_steps: Option<usize>,
    #[arg(long)]
    pub inner_lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// Meta-checkpoint to start from.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Attention TSV, one row per decoder frame.
    pub attention: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Held-out symbol; may be repeated.
    #[arg(long)]
    pub heldout: Vec<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub collapse_tolerance: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Cli {
    /// Config file (if any) with every flag applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        set(&mut c.seed, self.seed);
        if self.table.is_some() {
            c.table = self.table.clone();
        }
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        match &self.command {
            Command::Featurize(a) => c.featurize.word_boundary |= a.word_boundary,
            Command::EmbedTrain(a) => {
                let e = &mut c.embed_train;
                if a.gold.is_some() {
                    e.gold = a.gold.clone();
                }
                set(&mut e.architecture, a.architecture);
                set(&mut e.block, a.block);
                set(&mut e.hidden_dim, a.hidden_dim);
                set(&mut e.output_dim, a.output_dim);
                set(&mut e.epochs, a.epochs);
                set(&mut e.batch_size, a.batch_size);
                set(&mut e.lr, a.lr);
            }
            Command::MetaTrain(a) => {
                let m = &mut c.meta_train;
                if a.corpus.is_some() {
                    m.corpus = a.corpus.clone();
                }
                set(&mut m.procedure, a.procedure);
                set(&mut m.steps, a.steps);
                set(&mut m.hidden, a.hidden);
                set(&mut m.batch_size, a.batch_size);
                set(&mut m.lr, a.lr);
                set(&mut m.inner_steps, a.inner_steps);
                set(&mut m.inner_lr, a.inner_lr);
                set(&mut c.synthetic.tasks, a.tasks);
            }
            Command::Finetune(a) => {
                let f = &mut c.finetune;
                if a.meta.is_some() {
                    f.meta = a.meta.clone();
                }
                if a.corpus.is_some() {
                    f.corpus = a.corpus.clone();
                }
                set(&mut f.steps, a.steps);
                set(&mut f.lr, a.lr);
                set(&mut f.snapshot_every, a.snapshot_every);
            }
            Command::Align(a) => {
                if a.attention.is_some() {
                    c.align.attention = a.attention.clone();
                }
            }
            Command::Analyze(a) => {
                let z = &mut c.analyze;
                if a.checkpoint.is_some() {
                    z.checkpoint = a.checkpoint.clone();
                }
                if !a.heldout.is_empty() {
                    z.heldout = a.heldout.clone();
                }
                set(&mut z.k, a.k);
                set(&mut z.collapse_tolerance, a.collapse_tolerance);
            }
        }
        c.validate()?;
        Ok(c)
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.resolve().and_then(|config| commands::execute(&cli.command, &config)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
