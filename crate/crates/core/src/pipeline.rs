//! The operations behind each `intent-gan` subcommand.
//!
//! A run is described by one JSON [`RunConfig`]; the resolved config is
//! echoed into the output directory next to the artifacts:
//!
//! ```text
//! <output_dir>/checkpoint.gbnb
//! <output_dir>/curves.csv
//! <output_dir>/metrics.json
//! <output_dir>/confusion.csv
//! <output_dir>/misclassified.jsonl
//! <output_dir>/resolved-config.json
//! ```
//!
//! Every real written by these functions is rounded to 9 significant digits
//! and JSON objects keep a fixed key order, so identical inputs give
//! byte-identical files.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{
    clean_min_length, load_canonical_jsonl, load_clinc_json, mask_labels, save_canonical_jsonl,
    select_classes, DatasetBundle, SemiSupervisedView, Split,
};
use crate::encoder::{FeatureSource, FeatureSpec};
use crate::error::{Error, Result};
use crate::metrics::{
    evaluate_split, export_confusion_csv, export_curves, misclass_report, parse_curves_csv, report,
    round_sig9, MetricsReport, MisclassRecord,
};
use crate::nn::Matrix;
use crate::ssgan::{
    load_checkpoint, predict_batch, rank_prediction, save_checkpoint, train, Checkpoint, EpochLog,
    TrainConfig,
};

pub const CHECKPOINT_FILE: &str = "checkpoint.gbnb";
pub const CURVES_FILE: &str = "curves.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const MISCLASSIFIED_FILE: &str = "misclassified.jsonl";
pub const RESOLVED_CONFIG_FILE: &str = "resolved-config.json";
pub const REPORT_FILE: &str = "report.md";

/// Environment variable that replaces `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "INTENT_GAN_OUTPUT_DIR";

/// A complete run description. Relative paths resolve against the working
/// directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Canonical JSONL dataset.
    pub dataset: Option<PathBuf>,
    pub features: FeatureSpec,
    pub output_dir: PathBuf,
    /// Label mask written by `mask-labels`. Without it the train split is
    /// masked on the fly with `train.labeled_fraction` and `train.seed`.
    pub label_mask: Option<PathBuf>,
    /// One class name per line, for `prepare-data`.
    pub classes: Option<PathBuf>,
    pub min_tokens: usize,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            features: FeatureSpec::default(),
            output_dir: PathBuf::from("runs/latest"),
            label_mask: None,
            classes: None,
            min_tokens: 2,
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_tokens == 0 {
            return Err(Error::Config("min_tokens must be at least 1".into()));
        }
        if let FeatureSpec::Hashed(c) = &self.features {
            c.validate()?;
        }
        self.train.validate()
    }

    pub fn dataset_path(&self) -> Result<&Path> {
        self.dataset
            .as_deref()
            .ok_or_else(|| Error::Config("no dataset path given".into()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}

/// One class name per non-blank line; `#` starts a comment line.
pub fn read_class_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}

/// CLINC150 JSON → class subset (all classes when `classes` is `None`) →
/// length filter → canonical JSONL at `out`.
pub fn prepare_data(
    clinc_json: impl AsRef<Path>,
    classes: Option<&[String]>,
    min_tokens: usize,
    out: impl AsRef<Path>,
) -> Result<DatasetBundle> {
    if min_tokens == 0 {
        return Err(Error::Config("min_tokens must be at least 1".into()));
    }
    let full = load_clinc_json(clinc_json)?;
    let subset = match classes {
        Some(names) => select_classes(&full, names)?,
        None => full,
    };
    let cleaned = clean_min_length(&subset, min_tokens)?;
    save_canonical_jsonl(&cleaned, out)?;
    Ok(cleaned)
}

/// Stored label mask: the labeled train ids and how they were drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelMask {
    pub labeled_fraction: f64,
    pub seed: u64,
    pub labeled_ids: Vec<usize>,
}

impl LabelMask {
    pub fn from_view(view: &SemiSupervisedView<'_>, labeled_fraction: f64, seed: u64) -> Self {
        Self {
            labeled_fraction,
            seed,
            labeled_ids: view.labeled_ids().iter().copied().collect(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).expect("mask serializes") + "\n";
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::data(path.display().to_string(), e.to_string()))
    }

    pub fn view<'a>(&self, bundle: &'a DatasetBundle) -> Result<SemiSupervisedView<'a>> {
        SemiSupervisedView::from_labeled_ids(bundle, self.labeled_ids.iter().copied())
    }
}

pub fn write_label_mask(
    dataset: impl AsRef<Path>,
    labeled_fraction: f64,
    seed: u64,
    out: impl AsRef<Path>,
) -> Result<LabelMask> {
    let bundle = load_canonical_jsonl(dataset)?;
    let view = mask_labels(&bundle, labeled_fraction, seed)?;
    let mask = LabelMask::from_view(&view, labeled_fraction, seed);
    mask.save(out)?;
    Ok(mask)
}

/// The labeled/unlabeled partition a run trains on.
pub fn resolve_view<'a>(
    bundle: &'a DatasetBundle,
    config: &RunConfig,
) -> Result<SemiSupervisedView<'a>> {
    match &config.label_mask {
        Some(path) => LabelMask::load(path)?.view(bundle),
        None => mask_labels(bundle, config.train.labeled_fraction, config.train.seed),
    }
}

fn create_output_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Result of [`train_run`].
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub logs: Vec<EpochLog>,
}

/// Trains on `config` and writes the checkpoint, curves and resolved config
/// into `config.output_dir`.
pub fn train_run(config: &RunConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let bundle = load_canonical_jsonl(config.dataset_path()?)?;
    let features = config.features.open()?.table(&bundle)?;
    let view = resolve_view(&bundle, config)?;
    let (model, logs) = train(&features, &view, &config.train)?;
    let checkpoint = Checkpoint::new(
        model,
        &config.train,
        bundle.vocab.names().to_vec(),
        Some(config.features.clone()),
    )?;
    let dir = &config.output_dir;
    create_output_dir(dir)?;
    save_checkpoint(&checkpoint, dir.join(CHECKPOINT_FILE))?;
    export_curves(&logs, dir.join(CURVES_FILE))?;
    write_text(&dir.join(RESOLVED_CONFIG_FILE), &config.to_json())?;
    Ok(TrainOutcome { checkpoint, logs })
}

fn check_compatible(
    checkpoint: &Checkpoint,
    bundle: &DatasetBundle,
    features: &Matrix,
) -> Result<()> {
    checkpoint.ensure_classes(bundle.num_classes())?;
    if checkpoint.header.labels != bundle.vocab.names() {
        return Err(Error::Checkpoint(
            "checkpoint class names differ from the dataset's".into(),
        ));
    }
    if checkpoint.header.feature_dim != features.cols() {
        return Err(Error::Checkpoint(format!(
            "checkpoint expects {}-d features, encoder gives {}",
            checkpoint.header.feature_dim,
            features.cols()
        )));
    }
    Ok(())
}

/// Result of [`evaluate_run`].
#[derive(Clone, Debug)]
pub struct EvaluationOutcome {
    pub metrics: MetricsReport,
    pub misclassified: Vec<MisclassRecord>,
}

/// Scores `checkpoint` on one split and writes the metrics, confusion matrix
/// and misclassification list into `config.output_dir`.
pub fn evaluate_run(
    config: &RunConfig,
    checkpoint: impl AsRef<Path>,
    split: Split,
) -> Result<EvaluationOutcome> {
    config.validate()?;
    let checkpoint = load_checkpoint(checkpoint)?;
    let bundle = load_canonical_jsonl(config.dataset_path()?)?;
    let features = config.features.open()?.table(&bundle)?;
    check_compatible(&checkpoint, &bundle, &features)?;
    let eval = evaluate_split(&checkpoint.model.discriminator, &bundle, split, &features)?;
    let metrics = report(&eval.confusion)?.rounded();
    let misclassified = misclass_report(&eval, &bundle);

    let dir = &config.output_dir;
    create_output_dir(dir)?;
    write_text(
        &dir.join(METRICS_FILE),
        &(serde_json::to_string_pretty(&metrics).expect("metrics serialize") + "\n"),
    )?;
    export_confusion_csv(&eval.confusion, &bundle.vocab, dir.join(CONFUSION_FILE))?;
    let mut lines = String::new();
    for r in &misclassified {
        let mut r = r.clone();
        r.p_predicted = round_sig9(r.p_predicted);
        r.p_runner_up = round_sig9(r.p_runner_up);
        lines.push_str(&serde_json::to_string(&r).expect("record serializes"));
        lines.push('\n');
    }
    write_text(&dir.join(MISCLASSIFIED_FILE), &lines)?;
    Ok(EvaluationOutcome {
        metrics,
        misclassified,
    })
}

/// One line of `predict` output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub text: String,
    pub intent: String,
    pub prob: f64,
    pub runner_up: Option<String>,
    pub runner_up_prob: Option<f64>,
}

/// Classifies raw texts with the encoder recorded in the checkpoint, or
/// `encoder` when given. Only the hashed encoder can featurize unseen text.
pub fn predict_texts(
    checkpoint: &Checkpoint,
    texts: &[String],
    encoder: Option<&FeatureSpec>,
) -> Result<Vec<PredictionLine>> {
    let spec = encoder
        .or(checkpoint.header.encoder.as_ref())
        .ok_or_else(|| {
            Error::Config("checkpoint records no encoder; pass one in the config".into())
        })?;
    let FeatureSource::Hashed(cfg) = spec.open()? else {
        return Err(Error::Config(
            "precomputed embeddings cannot featurize new text; use a hashed encoder".into(),
        ));
    };
    if cfg.dim != checkpoint.header.feature_dim {
        return Err(Error::Checkpoint(format!(
            "checkpoint expects {}-d features, encoder gives {}",
            checkpoint.header.feature_dim, cfg.dim
        )));
    }
    let mut data = Vec::with_capacity(texts.len() * cfg.dim);
    for t in texts {
        data.extend(
            crate::encoder::encode_hashed(t, &cfg)
                .0
                .iter()
                .map(|&x| x as f64),
        );
    }
    let features = Matrix::new(texts.len(), cfg.dim, data)?;
    let probs = predict_batch(&checkpoint.model.discriminator, &features)?;
    let labels = &checkpoint.header.labels;
    Ok(texts
        .iter()
        .zip(probs.iter_rows())
        .map(|(text, p)| {
            let r = rank_prediction(p);
            PredictionLine {
                text: text.clone(),
                intent: labels[r.class].clone(),
                prob: round_sig9(r.prob),
                runner_up: r.runner_up.map(|(c, _)| labels[c].clone()),
                runner_up_prob: r.runner_up.map(|(_, q)| round_sig9(q)),
            }
        })
        .collect())
}

/// Non-empty lines of `reader`, trailing `\r` removed.
pub fn read_texts(reader: impl BufRead) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::data("input", format!("line {}: {e}", i + 1)))?;
        let line = line.trim_end_matches('\r');
        if !line.trim().is_empty() {
            out.push(line.to_owned());
        }
    }
    Ok(out)
}

pub fn write_predictions(lines: &[PredictionLine], mut w: impl Write) -> std::io::Result<()> {
    for l in lines {
        serde_json::to_writer(&mut w, l)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Markdown summary of a run directory: final epoch of the curves, the
/// metrics and the most confident mistakes. Missing artifacts are skipped.
pub fn render_report(dir: impl AsRef<Path>, max_misclassified: usize) -> Result<String> {
    let dir = dir.as_ref();
    let read = |name: &str| -> Result<Option<String>> {
        let p = dir.join(name);
        match fs::read_to_string(&p) {
            Ok(t) => Ok(Some(t)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(p, e)),
        }
    };
    let mut out = format!("# Run report: {}\n", dir.display());
    let mut found = false;

    if let Some(text) = read(CURVES_FILE)? {
        found = true;
        let logs = parse_curves_csv(&text)?;
        out.push_str("\n## Training\n\n");
        match logs.last() {
            None => out.push_str("No epochs were run.\n"),
            Some(l) => {
                out.push_str(&format!("Epochs: {}\n\n", logs.len()));
                out.push_str("| quantity | final epoch |\n|---|---|\n");
                for (k, v) in [
                    ("L_D", l.l_d),
                    ("L_sup", l.l_sup),
                    ("L_unsup_real", l.l_unsup_real),
                    ("L_unsup_fake", l.l_unsup_fake),
                    ("L_G", l.l_g),
                    ("L_fm", l.l_fm),
                    ("L_fool", l.l_fool),
                    ("train accuracy", l.train_accuracy),
                ] {
                    out.push_str(&format!("| {k} | {v} |\n"));
                }
                if let Some(v) = l.validation_accuracy {
                    out.push_str(&format!("| validation accuracy | {v} |\n"));
                }
            }
        }
    }

    if let Some(text) = read(METRICS_FILE)? {
        found = true;
        let m: MetricsReport =
            serde_json::from_str(&text).map_err(|e| Error::data(METRICS_FILE, e.to_string()))?;
        out.push_str(&format!("\n## Evaluation\n\nExamples: {}\n\n", m.support));
        out.push_str("| metric | value |\n|---|---|\n");
        for (k, v) in [
            ("accuracy", m.accuracy),
            ("precision (macro)", m.precision),
            ("recall (macro)", m.recall),
            ("F1 (macro)", m.f1),
            ("MCC", m.mcc),
            ("precision (weighted)", m.weighted_precision),
            ("recall (weighted)", m.weighted_recall),
            ("F1 (weighted)", m.weighted_f1),
        ] {
            out.push_str(&format!("| {k} | {v} |\n"));
        }
    }

    if let Some(text) = read(MISCLASSIFIED_FILE)? {
        found = true;
        let records = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str::<MisclassRecord>(l)
                    .map_err(|e| Error::data(MISCLASSIFIED_FILE, format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push_str(&format!("\n## Misclassified ({} total)\n\n", records.len()));
        if !records.is_empty() {
            out.push_str(
                "| text | true | predicted | p | runner-up | p |\n|---|---|---|---|---|---|\n",
            );
            for r in records.iter().take(max_misclassified) {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} |\n",
                    r.text.replace('|', "\\|"),
                    r.true_class,
                    r.predicted,
                    r.p_predicted,
                    r.runner_up,
                    r.p_runner_up
                ));
            }
        }
    }

    if !found {
        return Err(Error::data(
            dir.display().to_string(),
            "no run artifacts (curves.csv, metrics.json, misclassified.jsonl) found",
        ));
    }
    Ok(out)
}

/// Writes [`render_report`] to `<dir>/report.md` and returns its path.
pub fn export_report(dir: impl AsRef<Path>, max_misclassified: usize) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let text = render_report(dir, max_misclassified)?;
    let path = dir.join(REPORT_FILE);
    write_text(&path, &text)?;
    Ok(path)
}
