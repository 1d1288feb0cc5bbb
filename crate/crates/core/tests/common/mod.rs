#![allow(dead_code)]

pub mod fd;

use std::io::Write;
use std::path::{Path, PathBuf};

use intent_gan::dataset::{save_canonical_jsonl, DatasetBundle};
use intent_gan::encoder::{save_embeddings, PrecomputedEmbeddings};
use intent_gan::synthetic::{gaussian_blobs, BlobSpec};

/// Writes a blob dataset as canonical JSONL plus EMB1 under `dir`.
pub fn write_blobs(
    dir: &Path,
    spec: &BlobSpec,
) -> (DatasetBundle, PrecomputedEmbeddings, PathBuf, PathBuf) {
    let (bundle, table) = gaussian_blobs(spec).unwrap();
    let data = dir.join("blobs.jsonl");
    let emb = dir.join("blobs.emb");
    save_canonical_jsonl(&bundle, &data).unwrap();
    save_embeddings(&table, &emb).unwrap();
    (bundle, table, data, emb)
}

/// Written straight to stderr so it shows without `--nocapture`.
pub fn announce(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}
