//! The adversarial classifier: a noise-to-feature generator and a `K+1`-way
//! discriminator whose last logit is the "fake" class.
//!
//! Discriminator loss, with `p = softmax` over all `K+1` logits:
//!
//! * `L_sup = -mean_labeled ln p(y | x)`
//! * `L_unsup_real = -mean_real ln(1 - p(fake | x))`
//! * `L_unsup_fake = -mean_fake ln p(fake | x)`
//!
//! Generator loss:
//!
//! * `L_fm = ‖mean f(real) - mean f(fake)‖²` over discriminator features
//! * `L_fool = -mean_fake ln(1 - p(fake | x))`
//!
//! `ln(1 - p(fake | x))` is always evaluated as
//! `logsumexp(real logits) - logsumexp(all logits)`.

mod checkpoint;
mod losses;
mod model;
mod train;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointHeader, GBNB_MAGIC, GBNB_VERSION,
};
pub use losses::{
    d_loss, d_loss_from_logits, d_loss_with_input, g_loss, g_loss_with_input, log_not_fake,
    DLossParts, GLossParts,
};
pub use model::{
    predict, predict_batch, rank_prediction, real_class_probs, sample_noise, Discriminator,
    GanModel, Generator, NoiseSpec, RankedPrediction,
};
pub use train::{train, EpochLog, TrainConfig, Trainer};
