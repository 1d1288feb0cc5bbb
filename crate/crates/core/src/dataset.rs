//! Intent corpora: loading, class selection, cleaning, label masking and
//! corpus statistics.
//!
//! Two on-disk layouts are understood. The CLINC150 layout is a single JSON
//! object with `"train"`, `"val"` and `"test"` lists of `[text, label]` pairs.
//! The canonical layout is JSON Lines, one utterance per line, in id order:
//!
//! ```text
//! {"text":"wake me up at 7","label":"alarm","label_id":0,"split":"train"}
//! ```
//!
//! `label_id` is written by [`save_canonical_jsonl`] so the label vocabulary
//! order survives a round trip. Files without it are accepted; their
//! vocabulary is the sorted set of label names. `label` may be `null` for
//! unlabeled training utterances.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub mod bnintent30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Utterance {
    pub id: usize,
    pub text: String,
    pub label: Option<usize>,
    pub split: Split,
}

/// Ordered class names; a name's position is its class index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelVocab {
    names: Vec<String>,
}

impl LabelVocab {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::Config(format!("duplicate class name {n:?}")));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetBundle {
    pub vocab: LabelVocab,
    pub utterances: Vec<Utterance>,
    /// Source path followed by one line per transform applied.
    pub provenance: String,
}

impl DatasetBundle {
    /// Builds a bundle, assigning dense ids in the given order.
    pub fn from_parts(
        vocab: LabelVocab,
        items: impl IntoIterator<Item = (String, Option<usize>, Split)>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let k = vocab.len();
        let mut utterances = Vec::new();
        for (id, (text, label, split)) in items.into_iter().enumerate() {
            if let Some(l) = label {
                if l >= k {
                    return Err(Error::Index(format!(
                        "label {l} >= class count {k} (item {id})"
                    )));
                }
            } else if split != Split::Train {
                return Err(Error::data(
                    "bundle",
                    format!("{split} item {id} has no label"),
                ));
            }
            utterances.push(Utterance {
                id,
                text,
                label,
                split,
            });
        }
        Ok(Self {
            vocab,
            utterances,
            provenance: provenance.into(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.vocab.len()
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Utterance> {
        self.utterances.iter().filter(move |u| u.split == split)
    }

    pub fn split_counts(&self) -> BTreeMap<Split, usize> {
        let mut counts: BTreeMap<Split, usize> = Split::ALL.iter().map(|s| (*s, 0)).collect();
        for u in &self.utterances {
            *counts.entry(u.split).or_default() += 1;
        }
        counts
    }

    /// Per-class counts for one split, indexed by class.
    pub fn class_counts(&self, split: Split) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for u in self.split(split) {
            if let Some(l) = u.label {
                counts[l] += 1;
            }
        }
        counts
    }

    fn with_items(
        &self,
        vocab: LabelVocab,
        items: Vec<(String, Option<usize>, Split)>,
        log: &str,
    ) -> Self {
        let utterances = items
            .into_iter()
            .enumerate()
            .map(|(id, (text, label, split))| Utterance {
                id,
                text,
                label,
                split,
            })
            .collect();
        Self {
            vocab,
            utterances,
            provenance: format!("{}\n{log}", self.provenance),
        }
    }
}

/// Whitespace tokenization used for cleaning and statistics.
pub fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
}

pub fn token_count(text: &str) -> usize {
    tokens(text).count()
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Reads the published CLINC150 JSON layout. Extra keys such as `oos_train`
/// are ignored.
pub fn load_clinc_json(path: impl AsRef<Path>) -> Result<DatasetBundle> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    parse_clinc_json(&bytes, &path.display().to_string())
}

pub fn parse_clinc_json(bytes: &[u8], source_name: &str) -> Result<DatasetBundle> {
    let root: serde_json::Value = serde_json::from_slice(bytes)
        .map_err(|e| Error::data(source_name, format!("invalid JSON: {e}")))?;
    let obj = root
        .as_object()
        .ok_or_else(|| Error::data(source_name, "top level is not an object"))?;

    let mut raw = Vec::new();
    for (key, split) in [
        ("train", Split::Train),
        ("val", Split::Validation),
        ("test", Split::Test),
    ] {
        let list = obj
            .get(key)
            .ok_or_else(|| Error::data(source_name, format!("missing key {key:?}")))?
            .as_array()
            .ok_or_else(|| Error::data(source_name, format!("{key:?} is not a list")))?;
        for (i, entry) in list.iter().enumerate() {
            let pair = entry.as_array().filter(|p| p.len() == 2);
            let (text, label) = match pair.map(|p| (p[0].as_str(), p[1].as_str())) {
                Some((Some(t), Some(l))) => (t, l),
                _ => {
                    return Err(Error::data(
                        source_name,
                        format!("{key}[{i}] is not a [text, label] pair of strings"),
                    ))
                }
            };
            raw.push((text.to_owned(), label.to_owned(), split));
        }
    }

    let names: BTreeSet<&str> = raw.iter().map(|(_, l, _)| l.as_str()).collect();
    let vocab = LabelVocab::new(names.into_iter().map(str::to_owned).collect())?;
    let items: Vec<_> = raw
        .iter()
        .map(|(t, l, s)| (t.clone(), vocab.index_of(l), *s))
        .collect();
    DatasetBundle::from_parts(vocab, items, format!("clinc150:{source_name}"))
}

#[derive(Serialize, Deserialize)]
struct CanonicalLine {
    text: String,
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label_id: Option<usize>,
    split: Split,
}

pub fn save_canonical_jsonl(bundle: &DatasetBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_canonical_jsonl(bundle, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_canonical_jsonl(bundle: &DatasetBundle, mut w: impl Write) -> std::io::Result<()> {
    for u in &bundle.utterances {
        let line = CanonicalLine {
            text: u.text.clone(),
            label: u
                .label
                .and_then(|l| bundle.vocab.name(l))
                .map(str::to_owned),
            label_id: u.label,
            split: u.split,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn load_canonical_jsonl(path: impl AsRef<Path>) -> Result<DatasetBundle> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_canonical_jsonl(BufReader::new(file), &path.display().to_string())
}

pub fn read_canonical_jsonl(reader: impl BufRead, source_name: &str) -> Result<DatasetBundle> {
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::data(source_name, format!("line {lineno}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CanonicalLine = serde_json::from_str(&line)
            .map_err(|e| Error::data(source_name, format!("line {lineno}: {e}")))?;
        lines.push((lineno, parsed));
    }

    let with_ids = lines.iter().filter(|(_, l)| l.label_id.is_some()).count();
    let with_labels = lines.iter().filter(|(_, l)| l.label.is_some()).count();
    let vocab = if with_ids > 0 {
        if with_ids != with_labels {
            return Err(Error::data(
                source_name,
                "label_id present on some labeled lines but not all",
            ));
        }
        let mut slots: BTreeMap<usize, &str> = BTreeMap::new();
        for (lineno, l) in &lines {
            if let (Some(id), Some(name)) = (l.label_id, l.label.as_deref()) {
                match slots.insert(id, name) {
                    Some(prev) if prev != name => {
                        return Err(Error::data(
                            source_name,
                            format!(
                                "line {lineno}: label_id {id} names both {prev:?} and {name:?}"
                            ),
                        ))
                    }
                    _ => {}
                }
            }
        }
        if let Some((&max, _)) = slots.iter().next_back() {
            if max + 1 != slots.len() {
                return Err(Error::data(
                    source_name,
                    "label_id values are not contiguous from 0",
                ));
            }
        }
        LabelVocab::new(slots.into_values().map(str::to_owned).collect())
            .map_err(|e| Error::data(source_name, e.to_string()))?
    } else {
        let names: BTreeSet<&str> = lines
            .iter()
            .filter_map(|(_, l)| l.label.as_deref())
            .collect();
        LabelVocab::new(names.into_iter().map(str::to_owned).collect())?
    };

    let mut items = Vec::with_capacity(lines.len());
    for (lineno, l) in lines {
        let label = l.label.as_deref().and_then(|n| vocab.index_of(n));
        if label.is_none() && l.split != Split::Train {
            return Err(Error::data(
                source_name,
                format!("line {lineno}: {} item without label", l.split),
            ));
        }
        items.push((l.text, label, l.split));
    }
    DatasetBundle::from_parts(vocab, items, format!("canonical:{source_name}"))
}

/// Keeps only the named classes, re-indexing the vocabulary to `names` order.
pub fn select_classes<S: AsRef<str>>(bundle: &DatasetBundle, names: &[S]) -> Result<DatasetBundle> {
    let unknown: Vec<String> = names
        .iter()
        .map(AsRef::as_ref)
        .filter(|n| bundle.vocab.index_of(n).is_none())
        .map(str::to_owned)
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownClasses(unknown));
    }
    let vocab = LabelVocab::new(names.iter().map(|n| n.as_ref().to_owned()).collect())?;
    // old index -> new index
    let remap: BTreeMap<usize, usize> = names
        .iter()
        .enumerate()
        .filter_map(|(new, n)| bundle.vocab.index_of(n.as_ref()).map(|old| (old, new)))
        .collect();
    let items: Vec<_> = bundle
        .utterances
        .iter()
        .filter_map(|u| {
            let new = remap.get(&u.label?)?;
            Some((u.text.clone(), Some(*new), u.split))
        })
        .collect();
    let log = format!(
        "select_classes: kept {} classes, {} of {} utterances",
        vocab.len(),
        items.len(),
        bundle.len()
    );
    Ok(bundle.with_items(vocab, items, &log))
}

/// Drops utterances with fewer than `min_tokens` whitespace tokens.
pub fn clean_min_length(bundle: &DatasetBundle, min_tokens: usize) -> Result<DatasetBundle> {
    if min_tokens == 0 {
        return Err(Error::Config("min_tokens must be at least 1".into()));
    }
    let items: Vec<_> = bundle
        .utterances
        .iter()
        .filter(|u| token_count(&u.text) >= min_tokens)
        .map(|u| (u.text.clone(), u.label, u.split))
        .collect();
    let removed = bundle.len() - items.len();
    if removed == 0 {
        return Ok(bundle.clone());
    }
    let mut by_split = BTreeMap::new();
    for u in &bundle.utterances {
        if token_count(&u.text) < min_tokens {
            *by_split.entry(u.split.as_str()).or_insert(0usize) += 1;
        }
    }
    let detail: Vec<String> = by_split.iter().map(|(s, n)| format!("{s}={n}")).collect();
    let log = format!(
        "clean_min_length({min_tokens}): removed {removed} of {} ({})",
        bundle.len(),
        detail.join(", ")
    );
    Ok(bundle.with_items(bundle.vocab.clone(), items, &log))
}

/// Train-split partition into labeled and unlabeled ids.
#[derive(Clone, Debug)]
pub struct SemiSupervisedView<'a> {
    bundle: &'a DatasetBundle,
    labeled: BTreeSet<usize>,
    unlabeled: BTreeSet<usize>,
}

impl<'a> SemiSupervisedView<'a> {
    /// Every labeled train utterance is labeled.
    pub fn fully_labeled(bundle: &'a DatasetBundle) -> Self {
        let (labeled, unlabeled) = bundle
            .split(Split::Train)
            .partition::<Vec<_>, _>(|u| u.label.is_some());
        Self {
            bundle,
            labeled: labeled.iter().map(|u| u.id).collect(),
            unlabeled: unlabeled.iter().map(|u| u.id).collect(),
        }
    }

    /// Rebuilds a view from an explicit labeled id set, e.g. one read from disk.
    pub fn from_labeled_ids(
        bundle: &'a DatasetBundle,
        ids: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let labeled: BTreeSet<usize> = ids.into_iter().collect();
        for &id in &labeled {
            match bundle.utterances.get(id) {
                Some(u) if u.split == Split::Train && u.label.is_some() => {}
                _ => {
                    return Err(Error::data(
                        "label mask",
                        format!("id {id} is not a labeled train utterance"),
                    ))
                }
            }
        }
        let unlabeled = bundle
            .split(Split::Train)
            .map(|u| u.id)
            .filter(|id| !labeled.contains(id))
            .collect();
        Ok(Self {
            bundle,
            labeled,
            unlabeled,
        })
    }

    pub fn bundle(&self) -> &'a DatasetBundle {
        self.bundle
    }

    pub fn labeled_ids(&self) -> &BTreeSet<usize> {
        &self.labeled
    }

    pub fn unlabeled_ids(&self) -> &BTreeSet<usize> {
        &self.unlabeled
    }

    pub fn is_labeled(&self, id: usize) -> bool {
        self.labeled.contains(&id)
    }

    /// All train ids, ascending.
    pub fn train_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .labeled
            .iter()
            .chain(&self.unlabeled)
            .copied()
            .collect();
        ids.sort_unstable();
        ids
    }
}

/// Stratified label masking.
///
/// Class `c` with `n` labeled train items keeps `max(1, round(fraction * n))`
/// of them, picked as the prefix of a Fisher-Yates shuffle of its ascending
/// id list. One generator seeded with `seed` is shared across classes, which
/// are visited in class-index order.
pub fn mask_labels(
    bundle: &DatasetBundle,
    labeled_fraction: f64,
    seed: u64,
) -> Result<SemiSupervisedView<'_>> {
    if !(labeled_fraction > 0.0 && labeled_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "labeled_fraction must lie in (0, 1], got {labeled_fraction}"
        )));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); bundle.num_classes()];
    for u in bundle.split(Split::Train) {
        if let Some(l) = u.label {
            per_class[l].push(u.id);
        }
    }
    let mut rng = Rng::new(seed);
    let mut labeled = Vec::new();
    for mut ids in per_class.into_iter().filter(|ids| !ids.is_empty()) {
        let keep = ((labeled_fraction * ids.len() as f64).round() as usize).clamp(1, ids.len());
        rng.shuffle(&mut ids);
        labeled.extend_from_slice(&ids[..keep]);
    }
    SemiSupervisedView::from_labeled_ids(bundle, labeled)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total_words: usize,
    pub unique_words: usize,
    pub max_len: usize,
    pub min_len: usize,
    pub avg_len: f64,
}

/// Length statistics in Unicode scalar values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharLengthStats {
    pub max_len: usize,
    pub min_len: usize,
    pub avg_len: f64,
}

pub fn stats(bundle: &DatasetBundle) -> DatasetStats {
    if bundle.is_empty() {
        return DatasetStats {
            total_words: 0,
            unique_words: 0,
            max_len: 0,
            min_len: 0,
            avg_len: 0.0,
        };
    }
    let mut unique = HashSet::new();
    let mut total = 0;
    let mut max_len = 0;
    let mut min_len = usize::MAX;
    for u in &bundle.utterances {
        let mut n = 0;
        for t in tokens(&u.text) {
            unique.insert(t);
            n += 1;
        }
        total += n;
        max_len = max_len.max(n);
        min_len = min_len.min(n);
    }
    DatasetStats {
        total_words: total,
        unique_words: unique.len(),
        max_len,
        min_len,
        avg_len: total as f64 / bundle.len() as f64,
    }
}

pub fn char_length_stats(bundle: &DatasetBundle) -> CharLengthStats {
    let lens: Vec<usize> = bundle
        .utterances
        .iter()
        .map(|u| u.text.chars().count())
        .collect();
    if lens.is_empty() {
        return CharLengthStats {
            max_len: 0,
            min_len: 0,
            avg_len: 0.0,
        };
    }
    CharLengthStats {
        max_len: *lens.iter().max().unwrap(),
        min_len: *lens.iter().min().unwrap(),
        avg_len: lens.iter().sum::<usize>() as f64 / lens.len() as f64,
    }
}
