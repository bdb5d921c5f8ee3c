use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use spai_core::ganzoo::ConditionLabel;

use crate::recipes::Recipe;

#[derive(Debug, Parser)]
#[command(name = "spai", version, about = "Synthetic periocular image benchmark: train GANs, score image quality, replay presentation attacks")]
pub struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan an image directory into a labeled manifest.
    Ingest(IngestArgs),
    /// Train a generator from a recipe or a config file.
    Train(TrainArgs),
    /// Draw images from a checkpoint.
    Generate(GenerateArgs),
    /// Fréchet distance between two image sets.
    Fid(FidArgs),
    /// Laplacian-of-Gaussian sharpness per image.
    Sharpness(SharpnessArgs),
    /// 2-D t-SNE map of embedded image sets.
    Tsne(TsneArgs),
    /// Present synthetic images to a detector as an unknown attack.
    Attack(AttackArgs),
    /// Collect FID and D-EER tables from finished runs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub dir: PathBuf,
    /// JSON labeling rules; file-name token defaults otherwise.
    #[arg(long)]
    pub labeling: Option<PathBuf>,
    #[arg(long, default_value = "manifest.json")]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["recipe", "config"])))]
pub struct TrainArgs {
    #[arg(long)]
    pub recipe: Option<Recipe>,
    /// Full run config (JSON).
    #[arg(long, conflicts_with = "recipe")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Image directory ingested before training.
    #[arg(long, conflicts_with = "manifest")]
    pub corpus: Option<PathBuf>,
    #[arg(long, requires = "corpus")]
    pub labeling: Option<PathBuf>,
    /// Defaults to `<workspace>/runs/<name>`.
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    #[arg(long, conflicts_with = "budget_epochs")]
    pub budget_kimg: Option<f64>,
    #[arg(long)]
    pub budget_epochs: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `WIDTHxHEIGHT`.
    #[arg(long, value_parser = parse_size)]
    pub image_size: Option<(usize, usize)>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub eval_every_kimg: Option<f64>,
    #[arg(long)]
    pub fid_samples: Option<usize>,
    #[arg(long)]
    pub base_channels: Option<usize>,
    #[arg(long)]
    pub max_channels: Option<usize>,
    #[arg(long)]
    pub augmentation_p: Option<f64>,
    /// `lite` or `inception:<weights.safetensors>`.
    #[arg(long)]
    pub embedder: Option<String>,
    /// Log wall time as zero so logs compare byte for byte.
    #[arg(long)]
    pub deterministic: bool,
    /// Print the resolved config and exit.
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LabelArg {
    Female,
    Male,
}

impl From<LabelArg> for ConditionLabel {
    fn from(l: LabelArg) -> Self {
        match l {
            LabelArg::Female => ConditionLabel::Female,
            LabelArg::Male => ConditionLabel::Male,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Checkpoint file, or `best` to take the best one of `--run-dir`.
    #[arg(long)]
    pub ckpt: String,
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    #[arg(long)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Condition for conditional models.
    #[arg(long)]
    pub label: Option<LabelArg>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct FidArgs {
    /// Image directory or manifest.
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// `auto`, `lite` or `inception[:<weights.safetensors>]`. `auto` uses
    /// Inception when SPAI_INCEPTION_WEIGHTS is set.
    #[arg(long, default_value = "auto")]
    pub embedder: String,
    /// Seed of the lite embedder fit.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct SharpnessArgs {
    /// Image directory or manifest.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct TsneArgs {
    /// `name=path`, repeatable.
    #[arg(long = "set", required = true, value_parser = parse_named_path)]
    pub sets: Vec<(String, PathBuf)>,
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cap on images taken from each set, in file order.
    #[arg(long)]
    pub max_per_set: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// Synthetic images presented as attacks.
    #[arg(long)]
    pub pai: PathBuf,
    #[arg(long)]
    pub bonafide: PathBuf,
    /// `baseline[:archive]`, `file:scores.csv` or `const:value`.
    #[arg(long)]
    pub clf: String,
    #[arg(long, default_value_t = spai_core::padlab::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Bona fide images the bundled classifier trains on when no archive is
    /// given. Must be disjoint from `--bonafide`.
    #[arg(long)]
    pub baseline_train: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Generator family of the PAI set, for the report tables.
    #[arg(long)]
    pub model_kind: Option<spai_core::ganzoo::ModelKind>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory searched for run logs and attack reports.
    #[arg(long)]
    pub runs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(w)?, p(h)?))
}

fn parse_named_path(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or_else(|| format!("expected name=path, got {s:?}"))?;
    if name.is_empty() || path.is_empty() {
        return Err(format!("expected name=path, got {s:?}"));
    }
    Ok((name.to_string(), path.into()))
}
