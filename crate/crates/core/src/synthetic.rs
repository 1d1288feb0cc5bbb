//! Gaussian-blob fixtures: a dataset whose features are known to be
//! separable, for smoke-testing the training loop without a text encoder.

use crate::dataset::{DatasetBundle, LabelVocab, Split};
use crate::encoder::PrecomputedEmbeddings;
use crate::error::Result;
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct BlobSpec {
    pub classes: usize,
    pub dim: usize,
    pub train_per_class: usize,
    pub validation_per_class: usize,
    pub test_per_class: usize,
    /// Per-coordinate standard deviation around each class mean.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            classes: 5,
            dim: 16,
            train_per_class: 200,
            validation_per_class: 0,
            test_per_class: 100,
            sigma: 0.1,
            seed: 0,
        }
    }
}

/// Class means are i.i.d. standard normal vectors scaled to unit norm.
pub fn class_means(spec: &BlobSpec) -> Vec<Vec<f64>> {
    let mut rng = Rng::stream(spec.seed, "blobs/means");
    (0..spec.classes)
        .map(|_| {
            let v: Vec<f64> = (0..spec.dim).map(|_| rng.standard_normal()).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
        .collect()
}

/// A bundle (train, then validation, then test; classes interleaved) and the
/// matching embedding table.
pub fn gaussian_blobs(spec: &BlobSpec) -> Result<(DatasetBundle, PrecomputedEmbeddings)> {
    let means = class_means(spec);
    let mut rng = Rng::stream(spec.seed, "blobs/points");
    let vocab = LabelVocab::new((0..spec.classes).map(|c| format!("blob_{c}")).collect())?;
    let mut items = Vec::new();
    let mut rows = Vec::new();
    for (split, per_class) in [
        (Split::Train, spec.train_per_class),
        (Split::Validation, spec.validation_per_class),
        (Split::Test, spec.test_per_class),
    ] {
        for i in 0..per_class {
            for (c, mean) in means.iter().enumerate() {
                items.push((format!("blob {c} {split} {i}"), Some(c), split));
                rows.push(
                    mean.iter()
                        .map(|m| (m + spec.sigma * rng.standard_normal()) as f32)
                        .collect::<Vec<f32>>(),
                );
            }
        }
    }
    let table = PrecomputedEmbeddings::new(rows.len(), spec.dim, rows.concat())?;
    let bundle = DatasetBundle::from_parts(vocab, items, format!("synthetic blobs {spec:?}"))?;
    Ok((bundle, table))
}
