use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{to_f32_grid, AdamState, Matrix};
use crate::rng::Rng;

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// `[d_in, h_1, ..., d_out]`
    pub layer_dims: Vec<usize>,
    /// Applied after every hidden activation in training mode.
    pub dropout_rate: f64,
}

impl MlpSpec {
    pub fn new(layer_dims: Vec<usize>, dropout_rate: f64) -> Self {
        Self {
            layer_dims,
            dropout_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::Config(format!(
                "an MLP needs at least 2 dims, got {:?}",
                self.layer_dims
            )));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::Config(format!(
                "zero-width layer in {:?}",
                self.layer_dims
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// `out x in`
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let mut z = x.matmul_transposed(&self.weight)?;
        z.add_row_vector(&self.bias);
        Ok(z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub input: Matrix,
    /// Pre-activation of every layer; the last entry holds the outputs.
    pub pre: Vec<Matrix>,
    /// Hidden activations after leaky ReLU and dropout.
    pub post: Vec<Matrix>,
    /// Inverted-dropout multipliers (0 or 1/keep) per hidden layer.
    pub masks: Vec<Option<Matrix>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.pre.last().expect("an MLP has at least one layer")
    }

    /// Input of the last layer.
    pub fn penultimate(&self) -> &Matrix {
        self.post.last().unwrap_or(&self.input)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    pub input: Option<Matrix>,
}

impl Gradients {
    /// Weight then bias, layer by layer; the order of [`Mlp::params_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }
}

/// Leaky-ReLU hidden layers, linear output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    dropout_rate: f64,
}

impl Mlp {
    /// Glorot-uniform weights on the binary32 grid, zero biases.
    pub fn init(spec: &MlpSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| {
                        let x = (2.0 * rng.uniform() - 1.0) * a;
                        let mut s = x as f32;
                        if (s as f64).abs() >= a {
                            s = f32::from_bits(s.to_bits() - 1);
                        }
                        s as f64
                    })
                    .collect();
                DenseLayer {
                    weight: Matrix::new(fan_out, fan_in, data).expect("sized above"),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self {
            layers,
            dropout_rate: spec.dropout_rate,
        })
    }

    pub fn from_layers(layers: Vec<DenseLayer>, dropout_rate: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("an MLP needs at least one layer".into()));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::Shape(format!(
                    "layer {i} outputs {} but layer {} takes {}",
                    w[0].out_dim(),
                    i + 1,
                    w[1].in_dim()
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::Shape(format!(
                    "layer {i} bias has {} entries",
                    l.bias.len()
                )));
            }
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {dropout_rate} outside [0, 1)"
            )));
        }
        Ok(Self {
            layers,
            dropout_rate,
        })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].in_dim()];
        d.extend(self.layers.iter().map(DenseLayer::out_dim));
        d
    }

    pub fn spec(&self) -> MlpSpec {
        MlpSpec::new(self.dims(), self.dropout_rate)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    pub fn forward(&self, batch: &Matrix, mode: Mode, rng: &mut Rng) -> Result<ForwardCache> {
        self.forward_impl(batch, (mode == Mode::Train).then_some(rng))
    }

    /// Evaluation-mode forward pass; consumes no randomness.
    pub fn forward_eval(&self, batch: &Matrix) -> Result<ForwardCache> {
        self.forward_impl(batch, None)
    }

    fn forward_impl(&self, batch: &Matrix, mut rng: Option<&mut Rng>) -> Result<ForwardCache> {
        if batch.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "batch has {} columns, network expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(last);
        let mut masks = Vec::with_capacity(last);
        for (l, layer) in self.layers.iter().enumerate() {
            let x = if l == 0 { batch } else { &post[l - 1] };
            let z = layer.apply(x)?;
            z.ensure_finite("layer pre-activation")?;
            if l < last {
                let mut a = z.clone();
                a.map_inplace(|v| if v > 0.0 { v } else { LEAKY_SLOPE * v });
                let mask = match rng.as_deref_mut() {
                    Some(r) if self.dropout_rate > 0.0 => {
                        let keep = 1.0 - self.dropout_rate;
                        let scale = 1.0 / keep;
                        let m: Vec<f64> = (0..a.as_slice().len())
                            .map(|_| {
                                if r.uniform() >= self.dropout_rate {
                                    scale
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                        for (v, s) in a.as_mut_slice().iter_mut().zip(&m) {
                            *v *= s;
                        }
                        Some(Matrix::new(a.rows(), a.cols(), m)?)
                    }
                    _ => None,
                };
                post.push(a);
                masks.push(mask);
            }
            pre.push(z);
        }
        Ok(ForwardCache {
            input: batch.clone(),
            pre,
            post,
            masks,
        })
    }

    pub fn backward(&self, cache: &ForwardCache, grad_output: &Matrix) -> Result<Gradients> {
        self.backward_with(cache, grad_output, None, true)
    }

    /// Reverse pass from `grad_output` (gradient at the outputs), optionally
    /// adding `penultimate_grad` at the input of the last layer.
    pub fn backward_with(
        &self,
        cache: &ForwardCache,
        grad_output: &Matrix,
        penultimate_grad: Option<&Matrix>,
        want_input: bool,
    ) -> Result<Gradients> {
        if cache.pre.len() != self.layers.len() || grad_output.shape() != cache.output().shape() {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} does not match cached output {:?}",
                grad_output.shape(),
                cache.output().shape()
            )));
        }
        if let Some(p) = penultimate_grad {
            if p.shape() != cache.penultimate().shape() {
                return Err(Error::Shape(format!(
                    "feature gradient {:?} does not match features {:?}",
                    p.shape(),
                    cache.penultimate().shape()
                )));
            }
        }
        let n = self.layers.len();
        let mut layer_grads = Vec::with_capacity(n);
        let mut g = grad_output.clone();
        let mut input_grad = None;
        for l in (0..n).rev() {
            let x = if l == 0 {
                &cache.input
            } else {
                &cache.post[l - 1]
            };
            let layer = &self.layers[l];
            layer_grads.push(LayerGrad {
                weight: g.transposed_matmul(x)?,
                bias: g.column_sums(),
            });
            if l == 0 && !want_input && !(n == 1 && penultimate_grad.is_some()) {
                break;
            }
            let mut gx = g.matmul(&layer.weight)?;
            if l == n - 1 {
                if let Some(p) = penultimate_grad {
                    gx.add_assign(p)?;
                }
            }
            if l == 0 {
                input_grad = want_input.then_some(gx);
                break;
            }
            if let Some(mask) = &cache.masks[l - 1] {
                for (v, m) in gx.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                    *v *= m;
                }
            }
            for (v, z) in gx
                .as_mut_slice()
                .iter_mut()
                .zip(cache.pre[l - 1].as_slice())
            {
                if *z <= 0.0 {
                    *v *= LEAKY_SLOPE;
                }
            }
            g = gx;
        }
        layer_grads.reverse();
        Ok(Gradients {
            layers: layer_grads,
            input: input_grad,
        })
    }

    /// Weight then bias, layer by layer.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.param_slices().iter().map(|s| s.len()).collect()
    }

    /// One Adam update; parameters are rounded back onto the binary32 grid.
    pub fn apply_adam(&mut self, grads: &Gradients, state: &mut AdamState) -> Result<()> {
        let g = grads.slices();
        let mut params = self.params_mut();
        state.step(&mut params, &g)?;
        for p in params {
            p.iter_mut().for_each(|x| *x = to_f32_grid(*x));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(dims: &[usize], dropout: f64) -> MlpSpec {
        MlpSpec::new(dims.to_vec(), dropout)
    }

    fn random_batch(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
        Matrix::new(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.standard_normal()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn init_ranges_and_zero_bias() {
        let mut rng = Rng::new(1);
        let m = Mlp::init(&spec(&[10, 7, 3], 0.0), &mut rng).unwrap();
        for l in m.layers() {
            let a = (6.0 / (l.in_dim() + l.out_dim()) as f64).sqrt();
            assert!(l.weight.as_slice().iter().all(|w| w.abs() < a));
            assert!(l.weight.as_slice().iter().all(|w| *w == (*w as f32) as f64));
            assert!(l.bias.iter().all(|b| *b == 0.0));
        }
        let again = Mlp::init(&spec(&[10, 7, 3], 0.0), &mut Rng::new(1)).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn invalid_specs() {
        let mut rng = Rng::new(0);
        assert!(Mlp::init(&spec(&[3], 0.0), &mut rng).is_err());
        assert!(Mlp::init(&spec(&[3, 2], 1.0), &mut rng).is_err());
        assert!(Mlp::init(&spec(&[3, 0, 2], 0.1), &mut rng).is_err());
    }

    #[test]
    fn leaky_relu_on_identity_layer() {
        let ident = Matrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let m = Mlp::from_layers(
            vec![
                DenseLayer {
                    weight: ident.clone(),
                    bias: vec![0.0; 2],
                },
                DenseLayer {
                    weight: ident,
                    bias: vec![0.0; 2],
                },
            ],
            0.0,
        )
        .unwrap();
        let c = m
            .forward_eval(&Matrix::new(1, 2, vec![-1.0, 3.0]).unwrap())
            .unwrap();
        assert_eq!(c.post[0].as_slice(), [-0.2, 3.0]);
        assert_eq!(c.output().as_slice(), [-0.2, 3.0]);
    }

    #[test]
    fn no_dropout_means_train_equals_eval() {
        let mut rng = Rng::new(5);
        let m = Mlp::init(&spec(&[4, 6, 3], 0.0), &mut rng).unwrap();
        let x = random_batch(5, 4, &mut rng);
        let t = m.forward(&x, Mode::Train, &mut rng).unwrap();
        let e = m.forward_eval(&x).unwrap();
        assert_eq!(t.output(), e.output());
    }

    #[test]
    fn eval_mode_consumes_no_randomness() {
        let mut rng = Rng::new(5);
        let m = Mlp::init(&spec(&[4, 6, 3], 0.5), &mut rng).unwrap();
        let x = random_batch(5, 4, &mut rng);
        let before = rng.clone();
        let a = m.forward(&x, Mode::Eval, &mut rng).unwrap();
        let b = m.forward(&x, Mode::Eval, &mut rng).unwrap();
        assert_eq!(a.output(), b.output());
        assert_eq!(before.clone().next_u64(), rng.next_u64());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = Rng::new(2);
        let m = Mlp::init(&spec(&[4, 8, 3], 0.2), &mut rng).unwrap();
        let x = random_batch(6, 4, &mut rng);
        let c = m.forward(&x, Mode::Train, &mut rng).unwrap();
        let g = m.backward(&c, &Matrix::zeros(6, 3)).unwrap();
        assert!(g.slices().iter().all(|s| s.iter().all(|v| *v == 0.0)));
        assert!(g.input.unwrap().as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let mut rng = Rng::new(11);
        let m = Mlp::init(&spec(&[3, 5, 2], 0.2), &mut rng).unwrap();
        let x = random_batch(1, 3, &mut rng);
        let clean = m.forward_eval(&x).unwrap().post[0].clone();
        let trials = 20_000;
        let mut acc = [0.0; 5];
        for _ in 0..trials {
            let c = m.forward(&x, Mode::Train, &mut rng).unwrap();
            for (a, v) in acc.iter_mut().zip(c.post[0].as_slice()) {
                *a += v;
            }
        }
        for (a, c) in acc.iter().zip(clean.as_slice()) {
            let mean = a / trials as f64;
            // std of the mean: |c| * sqrt(p/(1-p)) / sqrt(trials) ~ 0.0035|c|
            assert!((mean - c).abs() <= 0.02 * c.abs() + 1e-12, "{mean} vs {c}");
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut rng = Rng::new(0);
        let m = Mlp::init(&spec(&[4, 3], 0.0), &mut rng).unwrap();
        assert!(m.forward_eval(&Matrix::zeros(2, 5)).is_err());
        let c = m.forward_eval(&Matrix::zeros(2, 4)).unwrap();
        assert!(m.backward(&c, &Matrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut rng = Rng::new(0);
        let m = Mlp::init(&spec(&[2, 3], 0.0), &mut rng).unwrap();
        let x = Matrix::new(1, 2, vec![f64::NAN, 0.0]).unwrap();
        assert!(matches!(m.forward_eval(&x), Err(Error::Numeric(_))));
    }
}
