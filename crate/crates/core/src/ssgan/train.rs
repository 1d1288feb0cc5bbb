use serde::{Deserialize, Serialize};

use crate::dataset::{SemiSupervisedView, Split};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, Matrix, Mode};
use crate::rng::Rng;
use crate::ssgan::{
    d_loss, g_loss, predict_batch, rank_prediction, sample_noise, GanModel, NoiseSpec,
};

/// Run hyperparameters. Defaults: Adam at 0.01 for both networks, 50
/// epochs, batches of 64, dropout 0.2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Overrides `lr` for the generator only.
    pub generator_lr: Option<f64>,
    pub dropout: f64,
    pub noise: NoiseSpec,
    pub generator_hidden: usize,
    pub discriminator_hidden: usize,
    pub seed: u64,
    pub labeled_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 64,
            lr: 0.01,
            generator_lr: None,
            dropout: 0.2,
            noise: NoiseSpec::default(),
            generator_hidden: 512,
            discriminator_hidden: 512,
            seed: 0,
            labeled_fraction: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if let Some(g) = self.generator_lr {
            if !(g >= 0.0 && g.is_finite()) {
                return bad(format!("generator_lr must be non-negative, got {g}"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.generator_hidden == 0 || self.discriminator_hidden == 0 {
            return bad("hidden sizes must be positive".into());
        }
        if !(self.labeled_fraction > 0.0 && self.labeled_fraction <= 1.0) {
            return bad(format!(
                "labeled_fraction must lie in (0, 1], got {}",
                self.labeled_fraction
            ));
        }
        self.noise.validate()
    }
}

/// Epoch means of the per-batch loss parts, plus accuracies measured after
/// the epoch with the fake class excluded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub l_sup: f64,
    pub l_unsup_real: f64,
    pub l_unsup_fake: f64,
    pub l_d: f64,
    pub l_fm: f64,
    pub l_fool: f64,
    pub l_g: f64,
    /// Over the labeled training examples.
    pub train_accuracy: f64,
    /// Over the validation split, when it has any examples.
    pub validation_accuracy: Option<f64>,
}

/// Alternating discriminator / generator optimisation over one dataset.
pub struct Trainer<'a> {
    model: GanModel,
    config: TrainConfig,
    features: &'a Matrix,
    train_ids: Vec<usize>,
    /// Indexed by utterance id; `Some` only for labeled training examples.
    labels: Vec<Option<usize>>,
    labeled_ids: Vec<usize>,
    validation: Vec<(usize, usize)>,
    d_opt: AdamState,
    g_opt: AdamState,
    shuffle_rng: Rng,
    noise_rng: Rng,
    dropout_rng: Rng,
    epoch: usize,
}

impl<'a> Trainer<'a> {
    /// `features` holds one row per utterance id of the view's bundle.
    pub fn new(
        model: GanModel,
        features: &'a Matrix,
        view: &SemiSupervisedView<'_>,
        config: &TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        let bundle = view.bundle();
        if features.rows() != bundle.len() {
            return Err(Error::data(
                "features",
                format!(
                    "{} feature rows for {} utterances",
                    features.rows(),
                    bundle.len()
                ),
            ));
        }
        if features.cols() != model.feature_dim() {
            return Err(Error::Shape(format!(
                "features have {} columns, model expects {}",
                features.cols(),
                model.feature_dim()
            )));
        }
        if bundle.num_classes() != model.num_classes() {
            return Err(Error::Shape(format!(
                "dataset has {} classes, model has {}",
                bundle.num_classes(),
                model.num_classes()
            )));
        }
        let mut labels = vec![None; bundle.len()];
        for &id in view.labeled_ids() {
            labels[id] = bundle.utterances[id].label;
        }
        let validation = bundle
            .split(Split::Validation)
            .filter_map(|u| u.label.map(|l| (u.id, l)))
            .collect();
        let d_opt = AdamState::new(
            AdamConfig::with_lr(config.lr),
            &model.discriminator.mlp.param_sizes(),
        );
        let g_opt = AdamState::new(
            AdamConfig::with_lr(config.generator_lr.unwrap_or(config.lr)),
            &model.generator.mlp.param_sizes(),
        );
        Ok(Self {
            model,
            config: config.clone(),
            features,
            train_ids: view.train_ids(),
            labels,
            labeled_ids: view.labeled_ids().iter().copied().collect(),
            validation,
            d_opt,
            g_opt,
            shuffle_rng: Rng::stream(config.seed, "train/shuffle"),
            noise_rng: Rng::stream(config.seed, "train/noise"),
            dropout_rng: Rng::stream(config.seed, "train/dropout"),
            epoch: 0,
        })
    }

    pub fn model(&self) -> &GanModel {
        &self.model
    }

    pub fn into_model(self) -> GanModel {
        self.model
    }

    pub fn epochs_run(&self) -> usize {
        self.epoch
    }

    pub fn run_epoch(&mut self) -> Result<EpochLog> {
        let epoch = self.epoch;
        let mut order = self.train_ids.clone();
        self.shuffle_rng.shuffle(&mut order);

        let mut sums = [0.0f64; 5];
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(self.config.batch_size).enumerate() {
            let at = |what: &str, e: Error| match e {
                Error::Numeric(m) => {
                    Error::Numeric(format!("epoch {epoch}, batch {b}, {what}: {m}"))
                }
                other => other,
            };
            let (lab_ids, unl_ids): (Vec<usize>, Vec<usize>) =
                chunk.iter().partition(|&&id| self.labels[id].is_some());
            let labels: Vec<usize> = lab_ids.iter().map(|&id| self.labels[id].unwrap()).collect();
            let labeled = self.features.select_rows(&lab_ids);
            let unlabeled = self.features.select_rows(&unl_ids);

            // discriminator step on detached fakes
            let noise = sample_noise(
                self.config.batch_size,
                &self.model.noise,
                &mut self.noise_rng,
            )?;
            let fake = self
                .model
                .generator
                .mlp
                .forward(&noise, Mode::Train, &mut self.dropout_rng)
                .map_err(|e| at("generator", e))?
                .output()
                .clone();
            let (d_parts, d_grads) = d_loss(
                &self.model.discriminator,
                &labeled,
                &labels,
                &unlabeled,
                &fake,
                Mode::Train,
                &mut self.dropout_rng,
            )
            .map_err(|e| at("discriminator loss", e))?;
            check_finite(
                &[d_parts.sup, d_parts.unsup_real, d_parts.unsup_fake],
                epoch,
                b,
                "discriminator loss",
            )?;
            self.model
                .discriminator
                .mlp
                .apply_adam(&d_grads, &mut self.d_opt)
                .map_err(|e| at("discriminator update", e))?;

            // generator step against the updated, frozen discriminator
            let real = self.features.select_rows(chunk);
            let real_mean = self
                .model
                .discriminator
                .mlp
                .forward(&real, Mode::Train, &mut self.dropout_rng)
                .map_err(|e| at("discriminator features", e))?
                .penultimate()
                .column_means();
            let noise = sample_noise(
                self.config.batch_size,
                &self.model.noise,
                &mut self.noise_rng,
            )?;
            let (g_parts, g_grads) = g_loss(
                &self.model.discriminator,
                &self.model.generator,
                &real_mean,
                &noise,
                Mode::Train,
                &mut self.dropout_rng,
            )
            .map_err(|e| at("generator loss", e))?;
            check_finite(
                &[g_parts.feature_matching, g_parts.fool],
                epoch,
                b,
                "generator loss",
            )?;
            self.model
                .generator
                .mlp
                .apply_adam(&g_grads, &mut self.g_opt)
                .map_err(|e| at("generator update", e))?;

            for (s, v) in sums.iter_mut().zip([
                d_parts.sup,
                d_parts.unsup_real,
                d_parts.unsup_fake,
                g_parts.feature_matching,
                g_parts.fool,
            ]) {
                *s += v;
            }
            batches += 1;
        }

        let n = batches.max(1) as f64;
        let [l_sup, l_unsup_real, l_unsup_fake, l_fm, l_fool] = sums.map(|s| s / n);
        let train_accuracy = self.accuracy(
            self.labeled_ids
                .iter()
                .map(|&id| (id, self.labels[id].unwrap())),
        )?;
        let validation_accuracy = if self.validation.is_empty() {
            None
        } else {
            Some(self.accuracy(self.validation.iter().copied())?)
        };
        self.epoch += 1;
        Ok(EpochLog {
            epoch,
            l_sup,
            l_unsup_real,
            l_unsup_fake,
            l_d: l_sup + l_unsup_real + l_unsup_fake,
            l_fm,
            l_fool,
            l_g: l_fm + l_fool,
            train_accuracy,
            validation_accuracy,
        })
    }

    fn accuracy(&self, items: impl Iterator<Item = (usize, usize)>) -> Result<f64> {
        let (ids, truth): (Vec<usize>, Vec<usize>) = items.unzip();
        if ids.is_empty() {
            return Ok(0.0);
        }
        let probs = predict_batch(&self.model.discriminator, &self.features.select_rows(&ids))?;
        let correct = probs
            .iter_rows()
            .zip(&truth)
            .filter(|(p, &t)| rank_prediction(p).class == t)
            .count();
        Ok(correct as f64 / ids.len() as f64)
    }
}

fn check_finite(values: &[f64], epoch: usize, batch: usize, what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "epoch {epoch}, batch {batch}: {what} is {values:?}"
        )))
    }
}

/// Initialises a model from `config` and trains it for `config.epochs`.
pub fn train(
    features: &Matrix,
    view: &SemiSupervisedView<'_>,
    config: &TrainConfig,
) -> Result<(GanModel, Vec<EpochLog>)> {
    let model = GanModel::init(features.cols(), view.bundle().num_classes(), config)?;
    let mut trainer = Trainer::new(model, features, view, config)?;
    let logs = (0..config.epochs)
        .map(|_| trainer.run_epoch())
        .collect::<Result<Vec<_>>>()?;
    Ok((trainer.into_model(), logs))
}
