//! Utterance features: a signed character n-gram hashing encoder and the
//! EMB1 table of precomputed sentence embeddings.
//!
//! EMB1 is little-endian throughout:
//!
//! | bytes | content |
//! |-------|---------|
//! | 0..4  | magic `EMB1` |
//! | 4..8  | `u32` version, always 1 |
//! | 8..12 | `u32` row count |
//! | 12..16 | `u32` dimension |
//! | 16..  | `count * dim` binary32 values, row-major |
//!
//! Row `i` belongs to utterance id `i` of the canonical dataset the table was
//! exported from.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetBundle, Utterance};
use crate::error::{Error, Result};
use crate::nn::Matrix;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
pub const EMB1_VERSION: u32 = 1;
const EMB1_HEADER_LEN: usize = 16;

fn fnv1a64_from(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    fnv1a64_from(FNV_OFFSET, bytes)
}

/// FNV-1a-64 over the little-endian seed bytes followed by `bytes`.
pub fn fnv1a64_seeded(seed: u64, bytes: &[u8]) -> u64 {
    fnv1a64_from(fnv1a64(&seed.to_le_bytes()), bytes)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(pub Vec<f32>);

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .map(|&x| (x as f64) * (x as f64))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HashedNgramConfig {
    pub dim: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub seed: u64,
}

impl Default for HashedNgramConfig {
    fn default() -> Self {
        Self {
            dim: 768,
            ngram_min: 2,
            ngram_max: 4,
            seed: 0,
        }
    }
}

impl HashedNgramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config(
                "hashed encoder dim must be at least 1".into(),
            ));
        }
        if self.ngram_min == 0 || self.ngram_min > self.ngram_max {
            return Err(Error::Config(format!(
                "invalid n-gram range [{}, {}]",
                self.ngram_min, self.ngram_max
            )));
        }
        Ok(())
    }
}

/// Bucket and sign of one n-gram: bucket `h mod dim`, sign negative when
/// bit 63 of the hash is set.
pub fn ngram_slot(ngram: &str, config: &HashedNgramConfig) -> (usize, f64) {
    let h = fnv1a64_seeded(config.seed, ngram.as_bytes());
    let bucket = (h % config.dim as u64) as usize;
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    (bucket, sign)
}

/// Signed hashing of character n-grams, L2-normalised.
///
/// n-grams run over Unicode scalar values of the raw text, for every `n` in
/// `ngram_min..=ngram_max`. A text with no n-grams maps to the zero vector.
pub fn encode_hashed(text: &str, config: &HashedNgramConfig) -> FeatureVector {
    let chars: Vec<char> = text.chars().collect();
    let mut acc = vec![0f64; config.dim];
    let mut buf = String::new();
    for n in config.ngram_min..=config.ngram_max {
        if n == 0 {
            continue;
        }
        for window in chars.windows(n) {
            buf.clear();
            buf.extend(window);
            let (bucket, sign) = ngram_slot(&buf, config);
            acc[bucket] += sign;
        }
    }
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        acc.iter_mut().for_each(|x| *x /= norm);
    }
    FeatureVector(acc.into_iter().map(|x| x as f32).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrecomputedEmbeddings {
    dim: usize,
    count: usize,
    data: Vec<f32>,
}

impl PrecomputedEmbeddings {
    pub fn new(count: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != count * dim {
            return Err(Error::Shape(format!(
                "{} values for a {count}x{dim} embedding table",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!(
                "embedding value {i} is {}",
                data[i]
            )));
        }
        Ok(Self { dim, count, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::Shape(format!(
                "row {r} has length {} not {dim}",
                rows[r].len()
            )));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn values(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> Option<&[f32]> {
        (i < self.count).then(|| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let count =
            u32::try_from(self.count).map_err(|_| Error::Shape("row count exceeds u32".into()))?;
        let dim =
            u32::try_from(self.dim).map_err(|_| Error::Shape("dimension exceeds u32".into()))?;
        let mut out = Vec::with_capacity(EMB1_HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(EMB1_MAGIC);
        out.extend_from_slice(&EMB1_VERSION.to_le_bytes());
        out.extend_from_slice(&count.to_le_bytes());
        out.extend_from_slice(&dim.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |offset: usize, message: String| Error::EmbeddingFormat {
            offset: offset as u64,
            message,
        };
        if bytes.len() < EMB1_HEADER_LEN {
            return Err(fail(
                bytes.len(),
                format!(
                    "header needs {EMB1_HEADER_LEN} bytes, file has {}",
                    bytes.len()
                ),
            ));
        }
        if &bytes[0..4] != EMB1_MAGIC {
            return Err(fail(0, format!("bad magic {:?}", &bytes[0..4])));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let version = word(4);
        if version != EMB1_VERSION {
            return Err(fail(4, format!("unsupported version {version}")));
        }
        let count = word(8) as usize;
        let dim = word(12) as usize;
        let expected = count
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(EMB1_HEADER_LEN))
            .ok_or_else(|| fail(8, "payload size overflows".into()))?;
        if bytes.len() < expected {
            return Err(fail(
                bytes.len(),
                format!(
                    "truncated payload: expected {expected} bytes, found {}",
                    bytes.len()
                ),
            ));
        }
        if bytes.len() > expected {
            return Err(fail(
                expected,
                format!("{} trailing bytes after payload", bytes.len() - expected),
            ));
        }
        let mut data = Vec::with_capacity(count * dim);
        for (i, chunk) in bytes[EMB1_HEADER_LEN..].chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(fail(
                    EMB1_HEADER_LEN + 4 * i,
                    format!("non-finite value {v}"),
                ));
            }
            data.push(v);
        }
        Ok(Self { dim, count, data })
    }
}

pub fn save_embeddings(table: &PrecomputedEmbeddings, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = table.to_bytes()?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<PrecomputedEmbeddings> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    PrecomputedEmbeddings::from_bytes(&bytes)
}

/// Serializable description of where features come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureSpec {
    Hashed(HashedNgramConfig),
    Precomputed { path: PathBuf },
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec::Hashed(HashedNgramConfig::default())
    }
}

impl FeatureSpec {
    pub fn open(&self) -> Result<FeatureSource> {
        match self {
            FeatureSpec::Hashed(c) => {
                c.validate()?;
                Ok(FeatureSource::Hashed(c.clone()))
            }
            FeatureSpec::Precomputed { path } => {
                Ok(FeatureSource::Precomputed(load_embeddings(path)?))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum FeatureSource {
    Precomputed(PrecomputedEmbeddings),
    Hashed(HashedNgramConfig),
}

impl FeatureSource {
    pub fn dim(&self) -> usize {
        match self {
            FeatureSource::Precomputed(t) => t.dim(),
            FeatureSource::Hashed(c) => c.dim,
        }
    }

    pub fn get_feature(&self, utterance: &Utterance) -> Result<FeatureVector> {
        match self {
            FeatureSource::Precomputed(t) => t
                .row(utterance.id)
                .map(|r| FeatureVector(r.to_vec()))
                .ok_or(Error::Binding {
                    id: utterance.id,
                    count: t.count(),
                }),
            FeatureSource::Hashed(c) => Ok(encode_hashed(&utterance.text, c)),
        }
    }

    /// Features for every utterance of `bundle`, one row per id.
    pub fn table(&self, bundle: &DatasetBundle) -> Result<Matrix> {
        if let FeatureSource::Precomputed(t) = self {
            if t.count() != bundle.len() {
                return Err(Error::data(
                    "embedding table",
                    format!(
                        "{} rows bound to a dataset of {} utterances",
                        t.count(),
                        bundle.len()
                    ),
                ));
            }
        }
        let dim = self.dim();
        let mut data = Vec::with_capacity(bundle.len() * dim);
        for u in &bundle.utterances {
            data.extend(self.get_feature(u)?.0.iter().map(|&x| x as f64));
        }
        Matrix::new(bundle.len(), dim, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Split;

    fn cfg(min: usize, max: usize, dim: usize) -> HashedNgramConfig {
        HashedNgramConfig {
            dim,
            ngram_min: min,
            ngram_max: max,
            seed: 0,
        }
    }

    #[test]
    fn fnv_reference_vectors() {
        // published FNV-1a 64 test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn empty_text_is_zero() {
        let v = encode_hashed("", &HashedNgramConfig::default());
        assert_eq!(v.dim(), 768);
        assert_eq!(v.norm(), 0.0);
        // shorter than the smallest n-gram
        assert_eq!(encode_hashed("x", &cfg(2, 4, 8)).norm(), 0.0);
    }

    #[test]
    fn single_bigram_hits_one_bucket() {
        let v = encode_hashed("ab", &cfg(2, 2, 8));
        let nz: Vec<f32> = v.0.iter().copied().filter(|x| *x != 0.0).collect();
        assert_eq!(nz.len(), 1);
        assert_eq!(nz[0].abs(), 1.0);
    }

    #[test]
    fn slots_match_standalone_hash() {
        // frozen from tests/oracles/fnv.py, seed 0, dim 768
        let c = cfg(2, 3, 768);
        assert_eq!(ngram_slot("ab", &c), (10, 1.0));
        assert_eq!(ngram_slot("bc", &c), (530, 1.0));
        assert_eq!(ngram_slot("abc", &c), (107, -1.0));
        let v = encode_hashed("abc", &c);
        let s = (1.0 / 3f64.sqrt()) as f32;
        assert_eq!(v.0[10], s);
        assert_eq!(v.0[530], s);
        assert_eq!(v.0[107], -s);
    }

    #[test]
    fn unicode_ngrams_use_scalar_values() {
        let c = cfg(2, 2, 1024);
        // two scalars -> one bigram, regardless of byte length
        let v = encode_hashed("আমি", &cfg(3, 3, 1024));
        assert_eq!(v.0.iter().filter(|x| **x != 0.0).count(), 1);
        assert!((encode_hashed("ঘড়ি", &c).norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn emb1_hand_assembled() {
        let mut bytes = b"EMB1".to_vec();
        bytes.extend_from_slice(&[1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        bytes.extend_from_slice(&[0x00, 0x00, 0x80, 0x3f]); // 1.0
        bytes.extend_from_slice(&[0x00, 0x00, 0x00, 0xc0]); // -2.0
        let t = PrecomputedEmbeddings::from_bytes(&bytes).unwrap();
        assert_eq!((t.count(), t.dim()), (1, 2));
        assert_eq!(t.row(0).unwrap(), [1.0, -2.0]);
        assert_eq!(t.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn emb1_empty_table() {
        let t = PrecomputedEmbeddings::new(0, 768, vec![]).unwrap();
        let back = PrecomputedEmbeddings::from_bytes(&t.to_bytes().unwrap()).unwrap();
        assert_eq!(back.count(), 0);
        assert_eq!(back.dim(), 768);
    }

    #[test]
    fn emb1_errors_carry_offsets() {
        let good = PrecomputedEmbeddings::new(2, 2, vec![1.0, 2.0, 3.0, 4.0])
            .unwrap()
            .to_bytes()
            .unwrap();
        let offset = |b: &[u8]| match PrecomputedEmbeddings::from_bytes(b) {
            Err(Error::EmbeddingFormat { offset, .. }) => offset,
            other => panic!("expected format error, got {other:?}"),
        };
        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(offset(&bad), 0);
        let mut bad = good.clone();
        bad[4] = 2;
        assert_eq!(offset(&bad), 4);
        assert_eq!(offset(&good[..good.len() - 1]), good.len() as u64 - 1);
        let mut bad = good.clone();
        bad[16 + 8..16 + 12].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(offset(&bad), 24);
        assert_eq!(offset(&good[..10]), 10);
    }

    #[test]
    fn lookup_and_binding() {
        let t = PrecomputedEmbeddings::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let src = FeatureSource::Precomputed(t);
        let u = |id| Utterance {
            id,
            text: "x y".into(),
            label: None,
            split: Split::Train,
        };
        assert_eq!(src.get_feature(&u(1)).unwrap().0, [3.0, 4.0]);
        assert!(matches!(
            src.get_feature(&u(2)),
            Err(Error::Binding { id: 2, count: 2 })
        ));
        let h = HashedNgramConfig::default();
        let hs = FeatureSource::Hashed(h.clone());
        assert_eq!(hs.get_feature(&u(9)).unwrap(), encode_hashed("x y", &h));
    }
}
