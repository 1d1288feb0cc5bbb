//! A small deterministic engine for fixed-topology multilayer perceptrons:
//! dense layers, leaky ReLU, inverted dropout, stable softmax losses,
//! hand-written reverse-mode gradients and Adam.
//!
//! Arithmetic is `f64` throughout. Trainable parameters are kept on the
//! binary32 grid (every stored weight is exactly representable as `f32`) so
//! that checkpoints, which store `f32`, reload to bit-identical models.

mod adam;
mod loss;
mod matrix;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use loss::{log_softmax_row, logsumexp, softmax_row, softmax_xent};
pub use matrix::Matrix;
pub use mlp::{DenseLayer, ForwardCache, Gradients, LayerGrad, Mlp, MlpSpec, Mode, LEAKY_SLOPE};

/// Rounds to the nearest binary32 value, returned as `f64`.
#[inline]
pub fn to_f32_grid(x: f64) -> f64 {
    x as f32 as f64
}
