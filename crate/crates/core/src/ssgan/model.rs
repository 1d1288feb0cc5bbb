use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Matrix, Mlp, MlpSpec};
use crate::rng::Rng;
use crate::ssgan::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub dim: usize,
    pub mean: f64,
    pub std: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            dim: 100,
            mean: 0.0,
            std: 1.0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("noise dim must be at least 1".into()));
        }
        if !(self.std > 0.0 && self.std.is_finite() && self.mean.is_finite()) {
            return Err(Error::Config(format!(
                "noise needs finite mean and std > 0, got N({}, {}²)",
                self.mean, self.std
            )));
        }
        Ok(())
    }
}

/// `batch_size x dim` i.i.d. draws of `N(mean, std²)`, row-major, one
/// Box-Muller draw per entry.
pub fn sample_noise(batch_size: usize, spec: &NoiseSpec, rng: &mut Rng) -> Result<Matrix> {
    spec.validate()?;
    if batch_size == 0 {
        return Err(Error::Config("noise batch size must be at least 1".into()));
    }
    let data = (0..batch_size * spec.dim)
        .map(|_| spec.mean + spec.std * rng.standard_normal())
        .collect();
    Matrix::new(batch_size, spec.dim, data)
}

/// Noise to feature-space MLP, `[noise_dim, hidden, d]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub mlp: Mlp,
}

/// `[d, hidden, K+1]`; the hidden activation is the feature layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    pub mlp: Mlp,
}

impl Discriminator {
    pub fn num_classes(&self) -> usize {
        self.mlp.output_dim() - 1
    }

    pub fn fake_index(&self) -> usize {
        self.num_classes()
    }

    pub fn feature_dim(&self) -> usize {
        self.mlp.input_dim()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GanModel {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub noise: NoiseSpec,
}

impl GanModel {
    pub fn init(feature_dim: usize, num_classes: usize, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        if num_classes == 0 {
            return Err(Error::Config("at least one class is required".into()));
        }
        let g_spec = MlpSpec::new(
            vec![config.noise.dim, config.generator_hidden, feature_dim],
            config.dropout,
        );
        let d_spec = MlpSpec::new(
            vec![feature_dim, config.discriminator_hidden, num_classes + 1],
            config.dropout,
        );
        let generator = Generator {
            mlp: Mlp::init(&g_spec, &mut Rng::stream(config.seed, "init/generator"))?,
        };
        let discriminator = Discriminator {
            mlp: Mlp::init(&d_spec, &mut Rng::stream(config.seed, "init/discriminator"))?,
        };
        Ok(Self {
            generator,
            discriminator,
            noise: config.noise.clone(),
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.discriminator.feature_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.discriminator.num_classes()
    }
}

/// Softmax over all `K+1` logits, renormalised over the first `K`.
pub fn real_class_probs(logits: &[f64]) -> Vec<f64> {
    let all = crate::nn::softmax_row(logits);
    let k = logits.len() - 1;
    let mass: f64 = all[..k].iter().sum();
    all[..k].iter().map(|p| p / mass).collect()
}

/// Real-class distribution for one feature vector; the generator plays no
/// part.
pub fn predict(disc: &Discriminator, feature: &[f64]) -> Result<Vec<f64>> {
    let x = Matrix::new(1, feature.len(), feature.to_vec())?;
    Ok(predict_batch(disc, &x)?.row(0).to_vec())
}

/// One row of `K` real-class probabilities per input row.
pub fn predict_batch(disc: &Discriminator, features: &Matrix) -> Result<Matrix> {
    let cache = disc.mlp.forward_eval(features)?;
    let rows: Vec<Vec<f64>> = cache.output().iter_rows().map(real_class_probs).collect();
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, disc.num_classes()));
    }
    Matrix::from_rows(&rows)
}

/// Top class and the runner-up, the shape of a misclassification report row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankedPrediction {
    pub class: usize,
    pub prob: f64,
    pub runner_up: Option<(usize, f64)>,
}

/// Ties go to the lower class index.
pub fn rank_prediction(probs: &[f64]) -> RankedPrediction {
    assert!(!probs.is_empty(), "no classes to rank");
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    RankedPrediction {
        class: order[0],
        prob: probs[order[0]],
        runner_up: order.get(1).map(|&c| (c, probs[c])),
    }
}
