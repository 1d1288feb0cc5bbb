//! Semi-supervised adversarial intent classification.
//!
//! A generator maps Gaussian noise into the feature space of a frozen
//! sentence encoder; a discriminator classifies real features into one of
//! `K` intents and generated ones into an extra `K+1`-th "fake" class.
//! Labeled, unlabeled and generated examples all contribute to training,
//! and the generator is dropped at inference time.
//!
//! The crate is organised bottom-up:
//!
//! * [`dataset`]: CLINC150-style and canonical JSONL corpora, class
//!   selection, cleaning, stratified label masking, statistics.
//! * [`encoder`]: hashed character n-gram features and EMB1 embedding tables.
//! * [`nn`]: the small MLP engine with hand-written gradients and Adam.
//! * [`ssgan`]: generator, discriminator, adversarial losses, training,
//!   prediction and GBNB checkpoints.
//! * [`metrics`]: confusion matrices, macro metrics, multiclass MCC and
//!   report exports.
//! * [`pipeline`]: the operations behind the `intent-gan` command line.

pub mod baseline;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod ssgan;
pub mod synthetic;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/adversarial-training.md")]
    mod adversarial_training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
