//! Plain supervised MLP head over the same features: the reference point
//! the adversarial model is compared against.

use crate::dataset::SemiSupervisedView;
use crate::error::{Error, Result};
use crate::nn::{softmax_xent, AdamConfig, AdamState, Matrix, Mlp, MlpSpec, Mode};
use crate::rng::Rng;
use crate::ssgan::TrainConfig;

/// `[d, discriminator_hidden, K]` trained with softmax cross-entropy on the
/// labeled ids only, with the same optimizer, epochs and batch size as the
/// adversarial run.
pub fn train_supervised(
    features: &Matrix,
    view: &SemiSupervisedView<'_>,
    config: &TrainConfig,
) -> Result<(Mlp, Vec<f64>)> {
    config.validate()?;
    let bundle = view.bundle();
    let spec = MlpSpec::new(
        vec![
            features.cols(),
            config.discriminator_hidden,
            bundle.num_classes(),
        ],
        config.dropout,
    );
    let mut mlp = Mlp::init(&spec, &mut Rng::stream(config.seed, "baseline/init"))?;
    let mut opt = AdamState::new(AdamConfig::with_lr(config.lr), &mlp.param_sizes());
    let mut shuffle = Rng::stream(config.seed, "baseline/shuffle");
    let mut dropout = Rng::stream(config.seed, "baseline/dropout");
    let mut ids: Vec<usize> = view.labeled_ids().iter().copied().collect();
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        shuffle.shuffle(&mut ids);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in ids.chunks(config.batch_size) {
            let targets: Vec<usize> = chunk
                .iter()
                .map(|&id| {
                    bundle.utterances[id]
                        .label
                        .expect("labeled ids carry labels")
                })
                .collect();
            let cache = mlp.forward(&features.select_rows(chunk), Mode::Train, &mut dropout)?;
            let (loss, grad) = softmax_xent(cache.output(), &targets)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "baseline epoch {epoch}: loss is {loss}"
                )));
            }
            let grads = mlp.backward_with(&cache, &grad, None, false)?;
            mlp.apply_adam(&grads, &mut opt)?;
            total += loss;
            batches += 1;
        }
        losses.push(total / batches.max(1) as f64);
    }
    Ok((mlp, losses))
}

/// Arg-max class per row.
pub fn predict_classes(mlp: &Mlp, features: &Matrix) -> Result<Vec<usize>> {
    let cache = mlp.forward_eval(features)?;
    Ok(cache
        .output()
        .iter_rows()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect())
}
