use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use intent_gan::dataset::Split;
use intent_gan::pipeline::{self, RunConfig, OUTPUT_DIR_ENV};
use intent_gan::ssgan::load_checkpoint;
use intent_gan::{Error, Result};

const CONFIG_KEYS: &str = "\
Config file keys (one JSON object; every key optional):
  dataset                  canonical JSONL dataset path
  features.kind            \"hashed\" or \"precomputed\"         [hashed]
  features.dim             hashed feature dimension            [768]
  features.ngram_min       shortest character n-gram           [2]
  features.ngram_max       longest character n-gram            [4]
  features.seed            hash seed                           [0]
  features.path            EMB1 file (precomputed only)
  output_dir               artifact directory                  [runs/latest]
  label_mask               label mask from mask-labels
  classes                  class list file for prepare-data
  min_tokens               drop utterances with fewer tokens   [2]
  train.epochs             training epochs                     [50]
  train.batch_size         real examples per batch             [64]
  train.lr                 Adam learning rate                  [0.01]
  train.generator_lr       generator-only learning rate        [train.lr]
  train.dropout            dropout rate in both networks       [0.2]
  train.noise.dim          generator noise dimension           [100]
  train.noise.mean         noise mean                          [0]
  train.noise.std          noise standard deviation            [1]
  train.generator_hidden   generator hidden width              [512]
  train.discriminator_hidden
                           discriminator hidden width          [512]
  train.seed               seed for init, shuffling, noise
                           and masking                         [0]
  train.labeled_fraction   per-class labeled share when no
                           label_mask is given                 [1.0]

Command-line flags override config keys. INTENT_GAN_OUTPUT_DIR overrides
output_dir.

Exit codes: 0 ok, 2 config, 3 data, 4 checkpoint, 5 numeric.";

/// Semi-supervised adversarial intent classifier.
#[derive(Parser)]
#[command(name = "intent-gan", version, after_help = CONFIG_KEYS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select classes from a CLINC150 JSON file, drop short utterances and
    /// write canonical JSONL.
    #[command(after_help = CONFIG_KEYS)]
    PrepareData {
        #[command(flatten)]
        common: Common,
        /// CLINC150-layout JSON file.
        #[arg(long)]
        input: PathBuf,
        /// Canonical JSONL output.
        #[arg(long)]
        out: PathBuf,
        /// Class list file (overrides `classes`); all classes when absent.
        #[arg(long)]
        classes: Option<PathBuf>,
        #[arg(long)]
        min_tokens: Option<usize>,
    },
    /// Draw a stratified labeled subset of the train split.
    #[command(after_help = CONFIG_KEYS)]
    MaskLabels {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        labeled_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Mask JSON output.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and write checkpoint.gbnb, curves.csv and resolved-config.json.
    #[command(after_help = CONFIG_KEYS)]
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Score a checkpoint and write metrics.json, confusion.csv and
    /// misclassified.jsonl.
    #[command(after_help = CONFIG_KEYS)]
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        overrides: Overrides,
        /// Defaults to <output_dir>/checkpoint.gbnb.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Classify newline-delimited texts; one JSON object per output line.
    #[command(after_help = CONFIG_KEYS)]
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Text file, or `-` for standard input.
        #[arg(long, default_value = "-")]
        input: PathBuf,
    },
    /// Summarize a run directory into report.md.
    #[command(after_help = CONFIG_KEYS)]
    ExportReport {
        #[command(flatten)]
        common: Common,
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
        /// Misclassified examples listed.
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run config.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        match &self.config {
            Some(p) => RunConfig::load(p),
            None => Ok(RunConfig::default()),
        }
    }
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    label_mask: Option<PathBuf>,
    /// EMB1 file; switches features to precomputed.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    generator_lr: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    labeled_fraction: Option<f64>,
}

impl Overrides {
    fn apply(self, mut c: RunConfig) -> Result<RunConfig> {
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),*) => {$(
                if let Some(v) = self.$src { c.$($dst).+ = v.into(); }
            )*};
        }
        set!(output_dir => output_dir, epochs => train.epochs, batch_size => train.batch_size,
             lr => train.lr, dropout => train.dropout, seed => train.seed,
             labeled_fraction => train.labeled_fraction);
        if self.dataset.is_some() {
            c.dataset = self.dataset;
        }
        if self.label_mask.is_some() {
            c.label_mask = self.label_mask;
        }
        if self.generator_lr.is_some() {
            c.train.generator_lr = self.generator_lr;
        }
        if let Some(path) = self.embeddings {
            c.features = intent_gan::encoder::FeatureSpec::Precomputed { path };
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::PrepareData {
            common,
            input,
            out,
            classes,
            min_tokens,
        } => {
            let config = common.load()?;
            let classes = match classes.or(config.classes) {
                Some(p) => Some(pipeline::read_class_list(p)?),
                None => None,
            };
            let bundle = pipeline::prepare_data(
                input,
                classes.as_deref(),
                min_tokens.unwrap_or(config.min_tokens),
                &out,
            )?;
            eprintln!(
                "wrote {} utterances in {} classes to {}",
                bundle.len(),
                bundle.num_classes(),
                out.display()
            );
        }
        Command::MaskLabels {
            common,
            dataset,
            labeled_fraction,
            seed,
            out,
        } => {
            let config = common.load()?;
            let dataset = match dataset {
                Some(d) => d,
                None => config.dataset_path()?.to_owned(),
            };
            let mask = pipeline::write_label_mask(
                dataset,
                labeled_fraction.unwrap_or(config.train.labeled_fraction),
                seed.unwrap_or(config.train.seed),
                &out,
            )?;
            eprintln!(
                "{} labeled ids written to {}",
                mask.labeled_ids.len(),
                out.display()
            );
        }
        Command::Train { common, overrides } => {
            let config = overrides.apply(common.load()?)?;
            let outcome = pipeline::train_run(&config)?;
            if let Some(last) = outcome.logs.last() {
                eprintln!(
                    "epoch {}: L_D {:.4} L_G {:.4} train accuracy {:.4}",
                    last.epoch, last.l_d, last.l_g, last.train_accuracy
                );
            }
            eprintln!("artifacts in {}", config.output_dir.display());
        }
        Command::Evaluate {
            common,
            overrides,
            checkpoint,
            split,
        } => {
            let config = overrides.apply(common.load()?)?;
            let checkpoint =
                checkpoint.unwrap_or_else(|| config.output_dir.join(pipeline::CHECKPOINT_FILE));
            let outcome = pipeline::evaluate_run(&config, checkpoint, split)?;
            let m = &outcome.metrics;
            eprintln!(
                "{} {}: accuracy {} macro-F1 {} MCC {}",
                split.as_str(),
                m.support,
                m.accuracy,
                m.f1,
                m.mcc
            );
        }
        Command::Predict {
            common,
            checkpoint,
            input,
        } => {
            let encoder = match &common.config {
                Some(p) => Some(RunConfig::load(p)?.features),
                None => None,
            };
            let checkpoint = load_checkpoint(checkpoint)?;
            let texts = if input.as_os_str() == "-" {
                pipeline::read_texts(io::stdin().lock())?
            } else {
                let f = File::open(&input).map_err(|e| Error::io(&input, e))?;
                pipeline::read_texts(BufReader::new(f))?
            };
            let lines = pipeline::predict_texts(&checkpoint, &texts, encoder.as_ref())?;
            let stdout = io::stdout().lock();
            let mut w = io::BufWriter::new(stdout);
            pipeline::write_predictions(&lines, &mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io("<stdout>", e))?;
        }
        Command::ExportReport {
            common,
            output_dir,
            top,
        } => {
            let dir = match output_dir {
                Some(d) => d,
                None => common.load()?.output_dir,
            };
            let path = pipeline::export_report(dir, top)?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
