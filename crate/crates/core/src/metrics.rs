//! Confusion matrices and the classification metrics derived from them.
//!
//! Precision, recall and F1 are macro-averaged (unweighted mean over
//! classes); a class whose precision or recall has a zero denominator scores
//! 0. Support-weighted variants are reported alongside. MCC is the
//! multiclass `R_K` statistic
//!
//! ```text
//! MCC = (c·s − Σ p_k t_k) / sqrt((s² − Σ p_k²)(s² − Σ t_k²))
//! ```
//!
//! with `c` the trace, `s` the total, `t_k` row sums (true counts) and `p_k`
//! column sums (predicted counts); a zero denominator gives 0.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetBundle, LabelVocab, Split};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::ssgan::{predict_batch, rank_prediction, Discriminator, EpochLog, RankedPrediction};

/// `counts[i][j]`: true class `i` predicted as `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

pub fn confusion(preds: &[usize], truths: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if preds.len() != truths.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} truths",
            preds.len(),
            truths.len()
        )));
    }
    let mut cm = ConfusionMatrix {
        k,
        counts: vec![0; k * k],
    };
    for (i, (&p, &t)) in preds.iter().zip(truths).enumerate() {
        if p >= k || t >= k {
            return Err(Error::Index(format!(
                "pair {i}: ({t}, {p}) with {k} classes"
            )));
        }
        cm.counts[t * k + p] += 1;
    }
    Ok(cm)
}

impl ConfusionMatrix {
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("confusion matrix must be square".into()));
        }
        Ok(Self {
            k,
            counts: rows.concat(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    /// Per true class.
    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.k)
            .map(|i| (0..self.k).map(|j| self.get(i, j)).sum())
            .collect()
    }

    /// Per predicted class.
    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.k)
            .map(|j| (0..self.k).map(|i| self.get(i, j)).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0; self.k * self.k];
        for i in 0..self.k {
            for j in 0..self.k {
                counts[j * self.k + i] = self.get(i, j);
            }
        }
        Self { k: self.k, counts }
    }

    pub fn per_class(&self) -> Vec<ClassMetrics> {
        let rows = self.row_sums();
        let cols = self.col_sums();
        (0..self.k)
            .map(|c| {
                let tp = self.get(c, c) as f64;
                let precision = if cols[c] == 0 {
                    0.0
                } else {
                    tp / cols[c] as f64
                };
                let recall = if rows[c] == 0 {
                    0.0
                } else {
                    tp / rows[c] as f64
                };
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassMetrics {
                    precision,
                    recall,
                    f1,
                    support: rows[c],
                }
            })
            .collect()
    }

    pub fn mcc(&self) -> f64 {
        let s = self.total() as f64;
        let c = self.trace() as f64;
        let t = self.row_sums();
        let p = self.col_sums();
        let pt: f64 = p.iter().zip(&t).map(|(&a, &b)| a as f64 * b as f64).sum();
        let pp: f64 = p.iter().map(|&a| (a as f64).powi(2)).sum();
        let tt: f64 = t.iter().map(|&a| (a as f64).powi(2)).sum();
        let denom = ((s * s - pp) * (s * s - tt)).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            (c * s - pt) / denom
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Averaging used for `precision`, `recall` and `f1`.
    pub averaging: String,
    pub support: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
}

pub fn report(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::data("confusion matrix", "no evaluated examples"));
    }
    let per = cm.per_class();
    let k = per.len() as f64;
    let macro_avg = |f: fn(&ClassMetrics) -> f64| per.iter().map(f).sum::<f64>() / k;
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64
    };
    Ok(MetricsReport {
        averaging: "macro".into(),
        support: total,
        accuracy: cm.trace() as f64 / total as f64,
        precision: macro_avg(|m| m.precision),
        recall: macro_avg(|m| m.recall),
        f1: macro_avg(|m| m.f1),
        mcc: cm.mcc(),
        weighted_precision: weighted(|m| m.precision),
        weighted_recall: weighted(|m| m.recall),
        weighted_f1: weighted(|m| m.f1),
    })
}

impl MetricsReport {
    /// Same report with every real rounded to 9 significant digits.
    pub fn rounded(&self) -> Self {
        Self {
            averaging: self.averaging.clone(),
            support: self.support,
            accuracy: round_sig9(self.accuracy),
            precision: round_sig9(self.precision),
            recall: round_sig9(self.recall),
            f1: round_sig9(self.f1),
            mcc: round_sig9(self.mcc),
            weighted_precision: round_sig9(self.weighted_precision),
            weighted_recall: round_sig9(self.weighted_recall),
            weighted_f1: round_sig9(self.weighted_f1),
        }
    }
}

/// One misclassified utterance with the two most probable classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MisclassRecord {
    pub id: usize,
    pub text: String,
    pub true_class: String,
    pub predicted: String,
    pub p_predicted: f64,
    pub runner_up: String,
    pub p_runner_up: f64,
}

/// Predictions for every labeled utterance of one split, in id order.
#[derive(Clone, Debug)]
pub struct SplitEvaluation {
    pub ids: Vec<usize>,
    pub truths: Vec<usize>,
    pub predictions: Vec<RankedPrediction>,
    pub confusion: ConfusionMatrix,
}

/// `features` holds one row per utterance id of `bundle`.
pub fn evaluate_split(
    disc: &Discriminator,
    bundle: &DatasetBundle,
    split: Split,
    features: &Matrix,
) -> Result<SplitEvaluation> {
    if disc.num_classes() != bundle.num_classes() {
        return Err(Error::Checkpoint(format!(
            "model has {} classes, dataset has {}",
            disc.num_classes(),
            bundle.num_classes()
        )));
    }
    let (ids, truths): (Vec<usize>, Vec<usize>) = bundle
        .split(split)
        .filter_map(|u| u.label.map(|l| (u.id, l)))
        .unzip();
    let probs = predict_batch(disc, &features.select_rows(&ids))?;
    let predictions: Vec<RankedPrediction> = probs.iter_rows().map(rank_prediction).collect();
    let preds: Vec<usize> = predictions.iter().map(|p| p.class).collect();
    let confusion = confusion(&preds, &truths, bundle.num_classes())?;
    Ok(SplitEvaluation {
        ids,
        truths,
        predictions,
        confusion,
    })
}

/// Misclassified utterances, most confident first (ties by id).
pub fn misclass_report(eval: &SplitEvaluation, bundle: &DatasetBundle) -> Vec<MisclassRecord> {
    let name = |c: usize| bundle.vocab.name(c).unwrap_or("?").to_owned();
    let mut out: Vec<MisclassRecord> = eval
        .ids
        .iter()
        .zip(&eval.truths)
        .zip(&eval.predictions)
        .filter(|((_, &t), p)| p.class != t)
        .map(|((&id, &t), p)| {
            let (runner, p_runner) = p.runner_up.expect("a wrong prediction implies two classes");
            MisclassRecord {
                id,
                text: bundle.utterances[id].text.clone(),
                true_class: name(t),
                predicted: name(p.class),
                p_predicted: p.prob,
                runner_up: name(runner),
                p_runner_up: p_runner,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.p_predicted
            .total_cmp(&a.p_predicted)
            .then(a.id.cmp(&b.id))
    });
    out
}

/// Rounds to 9 significant decimal digits.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

/// Shortest decimal rendering of `x` rounded to 9 significant digits.
pub fn fmt_sig9(x: f64) -> String {
    format!("{}", round_sig9(x))
}

pub const CURVES_HEADER: &str =
    "epoch,l_sup,l_unsup_real,l_unsup_fake,l_d,l_fm,l_fool,l_g,train_accuracy,validation_accuracy";

pub fn curves_csv(logs: &[EpochLog]) -> String {
    let mut s = String::from(CURVES_HEADER);
    s.push('\n');
    for l in logs {
        let vals = [
            l.l_sup,
            l.l_unsup_real,
            l.l_unsup_fake,
            l.l_d,
            l.l_fm,
            l.l_fool,
            l.l_g,
            l.train_accuracy,
        ];
        let _ = write!(s, "{}", l.epoch);
        for v in vals {
            let _ = write!(s, ",{}", fmt_sig9(v));
        }
        let _ = writeln!(
            s,
            ",{}",
            l.validation_accuracy.map(fmt_sig9).unwrap_or_default()
        );
    }
    s
}

pub fn export_curves(logs: &[EpochLog], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, curves_csv(logs)).map_err(|e| Error::io(path, e))
}

pub fn parse_curves_csv(text: &str) -> Result<Vec<EpochLog>> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVES_HEADER) {
        return Err(Error::data("curves", "unexpected header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |m: &str| Error::data("curves", format!("row {}: {m}", i + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 10 {
                return Err(bad("expected 10 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            Ok(EpochLog {
                epoch: f[0].parse().map_err(|_| bad("bad epoch"))?,
                l_sup: num(f[1])?,
                l_unsup_real: num(f[2])?,
                l_unsup_fake: num(f[3])?,
                l_d: num(f[4])?,
                l_fm: num(f[5])?,
                l_fool: num(f[6])?,
                l_g: num(f[7])?,
                train_accuracy: num(f[8])?,
                validation_accuracy: if f[9].is_empty() {
                    None
                } else {
                    Some(num(f[9])?)
                },
            })
        })
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// `K+1` rows and columns: a header row of predicted class names and a
/// leading column of true class names.
pub fn confusion_csv(cm: &ConfusionMatrix, vocab: &LabelVocab) -> String {
    let mut s = String::from("true\\predicted");
    for c in 0..cm.num_classes() {
        let _ = write!(s, ",{}", csv_field(vocab.name(c).unwrap_or("?")));
    }
    s.push('\n');
    for i in 0..cm.num_classes() {
        s.push_str(&csv_field(vocab.name(i).unwrap_or("?")));
        for j in 0..cm.num_classes() {
            let _ = write!(s, ",{}", cm.get(i, j));
        }
        s.push('\n');
    }
    s
}

pub fn export_confusion_csv(
    cm: &ConfusionMatrix,
    vocab: &LabelVocab,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, confusion_csv(cm, vocab)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn empty_and_perfect() {
        let cm = confusion(&[], &[], 3).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(report(&cm).is_err());
        let cm = confusion(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix::from_rows(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 2]]).unwrap()
        );
        let r = report(&cm).unwrap();
        assert_eq!(
            (r.accuracy, r.precision, r.recall, r.f1, r.mcc),
            (1.0, 1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn chance_level_two_class() {
        let cm = ConfusionMatrix::from_rows(&[vec![25, 25], vec![25, 25]]).unwrap();
        let r = report(&cm).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.mcc, 0.0);
    }

    #[test]
    fn three_class_matches_high_precision_oracle() {
        // frozen from tests/oracles/metrics.py
        let cm =
            ConfusionMatrix::from_rows(&[vec![5, 1, 0], vec![0, 4, 2], vec![1, 0, 7]]).unwrap();
        let r = report(&cm).unwrap();
        assert!(close(r.accuracy, 0.8));
        assert!(close(r.precision, 0.803_703_703_703_703_7));
        assert!(close(r.recall, 0.791_666_666_666_666_7));
        assert!(close(r.f1, 0.794_711_824_123_588_8));
        assert!(close(r.mcc, 0.697_364_076_305_416));
    }

    #[test]
    fn absent_predicted_class_scores_zero() {
        let cm = ConfusionMatrix::from_rows(&[vec![3, 0], vec![2, 0]]).unwrap();
        let per = cm.per_class();
        assert_eq!(per[1].precision, 0.0);
        assert_eq!(per[1].f1, 0.0);
        assert_eq!(cm.mcc(), 0.0);
    }

    #[test]
    fn index_and_length_errors() {
        assert!(confusion(&[0, 1], &[0], 2).is_err());
        assert!(confusion(&[2], &[0], 2).is_err());
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(fmt_sig9(31f64.ln()), "3.4339872");
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(1.0), "1");
        assert_eq!(fmt_sig9(0.1 + 0.2), "0.3");
        assert_eq!(fmt_sig9(-1.23456789012e-7), "-0.000000123456789");
    }

    #[test]
    fn curves_round_trip() {
        assert_eq!(curves_csv(&[]), format!("{CURVES_HEADER}\n"));
        let log = EpochLog {
            epoch: 3,
            l_sup: 1.0 / 3.0,
            l_unsup_real: 0.032_789_822_822_990_87,
            l_unsup_fake: 3.4339872044851463,
            l_d: 1.0 / 3.0 + 0.032_789_822_822_990_87 + 3.4339872044851463,
            l_fm: 1e-9 / 7.0,
            l_fool: 2.5,
            l_g: 2.5 + 1e-9 / 7.0,
            train_accuracy: 0.95,
            validation_accuracy: None,
        };
        let mut with_val = log.clone();
        with_val.epoch = 4;
        with_val.validation_accuracy = Some(2.0 / 3.0);
        let back = parse_curves_csv(&curves_csv(&[log.clone(), with_val.clone()])).unwrap();
        assert_eq!(back[0].l_sup, round_sig9(log.l_sup));
        assert_eq!(back[0].l_fm, round_sig9(log.l_fm));
        assert_eq!(back[0].validation_accuracy, None);
        assert_eq!(back[1].validation_accuracy, Some(round_sig9(2.0 / 3.0)));
        assert_eq!(back[1].epoch, 4);
    }

    #[test]
    fn confusion_csv_layout() {
        let cm = ConfusionMatrix::from_rows(&[vec![2, 1], vec![0, 3]]).unwrap();
        let vocab = LabelVocab::new(vec!["yes".into(), "a,b".into()]).unwrap();
        assert_eq!(
            confusion_csv(&cm, &vocab),
            "true\\predicted,yes,\"a,b\"\nyes,2,1\n\"a,b\",0,3\n"
        );
    }
}
