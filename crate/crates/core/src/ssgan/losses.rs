use crate::error::{Error, Result};
use crate::nn::{logsumexp, softmax_row, Gradients, Matrix, Mode};
use crate::rng::Rng;
use crate::ssgan::{Discriminator, Generator};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DLossParts {
    pub sup: f64,
    pub unsup_real: f64,
    pub unsup_fake: f64,
}

impl DLossParts {
    pub fn total(&self) -> f64 {
        self.sup + self.unsup_real + self.unsup_fake
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GLossParts {
    pub feature_matching: f64,
    pub fool: f64,
}

impl GLossParts {
    pub fn total(&self) -> f64 {
        self.feature_matching + self.fool
    }
}

/// `ln(1 - p(fake | x))` for one row of `K+1` logits.
pub fn log_not_fake(logits: &[f64]) -> f64 {
    logsumexp(&logits[..logits.len() - 1]) - logsumexp(logits)
}

/// Gradient of `-ln(1 - p(fake | x))` with respect to the logits, scaled.
fn add_not_fake_grad(logits: &[f64], scale: f64, out: &mut [f64]) {
    let k = logits.len() - 1;
    let all = softmax_row(logits);
    let real = softmax_row(&logits[..k]);
    for j in 0..=k {
        let r = if j < k { real[j] } else { 0.0 };
        out[j] += scale * (all[j] - r);
    }
}

/// Gradient of `-ln p(target | x)`, scaled.
fn add_xent_grad(logits: &[f64], target: usize, scale: f64, out: &mut [f64]) {
    for (j, p) in softmax_row(logits).into_iter().enumerate() {
        out[j] += scale * (p - if j == target { 1.0 } else { 0.0 });
    }
}

/// Discriminator loss parts and their summed gradient at the logits.
///
/// Rows of `logits` are `labels.len()` labeled examples, then `n_unlabeled`
/// unlabeled real examples, then `n_fake` generated ones. An empty group
/// contributes zero.
pub fn d_loss_from_logits(
    logits: &Matrix,
    labels: &[usize],
    n_unlabeled: usize,
    n_fake: usize,
) -> Result<(DLossParts, Matrix)> {
    let n_lab = labels.len();
    let n_real = n_lab + n_unlabeled;
    if logits.rows() != n_real + n_fake {
        return Err(Error::Shape(format!(
            "{} logit rows for {n_lab} labeled + {n_unlabeled} unlabeled + {n_fake} fake",
            logits.rows()
        )));
    }
    if logits.cols() < 2 {
        return Err(Error::Shape(
            "the discriminator needs at least one real class and the fake class".into(),
        ));
    }
    let fake = logits.cols() - 1;
    let mut parts = DLossParts::default();
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    for (i, &y) in labels.iter().enumerate() {
        if y >= fake {
            return Err(Error::Index(format!("label {y} for {fake} real classes")));
        }
        let row = logits.row(i);
        parts.sup -= (row[y] - logsumexp(row)) / n_lab as f64;
        add_xent_grad(row, y, 1.0 / n_lab as f64, grad.row_mut(i));
    }
    for i in 0..n_real {
        let row = logits.row(i);
        parts.unsup_real -= log_not_fake(row) / n_real as f64;
        add_not_fake_grad(row, 1.0 / n_real as f64, grad.row_mut(i));
    }
    for i in n_real..logits.rows() {
        let row = logits.row(i);
        parts.unsup_fake -= (row[fake] - logsumexp(row)) / n_fake as f64;
        add_xent_grad(row, fake, 1.0 / n_fake as f64, grad.row_mut(i));
    }
    Ok((parts, grad))
}

/// Discriminator loss over one batch and its parameter gradients.
pub fn d_loss(
    disc: &Discriminator,
    labeled: &Matrix,
    labels: &[usize],
    unlabeled: &Matrix,
    fake: &Matrix,
    mode: Mode,
    rng: &mut Rng,
) -> Result<(DLossParts, Gradients)> {
    d_loss_impl(disc, labeled, labels, unlabeled, fake, mode, rng, false)
}

/// As [`d_loss`], also returning the gradient with respect to the stacked
/// labeled, unlabeled and fake inputs in `Gradients::input`.
pub fn d_loss_with_input(
    disc: &Discriminator,
    labeled: &Matrix,
    labels: &[usize],
    unlabeled: &Matrix,
    fake: &Matrix,
    mode: Mode,
    rng: &mut Rng,
) -> Result<(DLossParts, Gradients)> {
    d_loss_impl(disc, labeled, labels, unlabeled, fake, mode, rng, true)
}

#[allow(clippy::too_many_arguments)]
fn d_loss_impl(
    disc: &Discriminator,
    labeled: &Matrix,
    labels: &[usize],
    unlabeled: &Matrix,
    fake: &Matrix,
    mode: Mode,
    rng: &mut Rng,
    want_input: bool,
) -> Result<(DLossParts, Gradients)> {
    if labeled.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} labeled rows, {} labels",
            labeled.rows(),
            labels.len()
        )));
    }
    let batch = labeled.vstack(unlabeled)?.vstack(fake)?;
    let cache = disc.mlp.forward(&batch, mode, rng)?;
    let (parts, grad) = d_loss_from_logits(cache.output(), labels, unlabeled.rows(), fake.rows())?;
    let grads = disc.mlp.backward_with(&cache, &grad, None, want_input)?;
    Ok((parts, grads))
}

/// Generator loss for one noise batch, with gradients for the generator
/// only. The discriminator is read but not updated.
pub fn g_loss(
    disc: &Discriminator,
    gen: &Generator,
    real_features_mean: &[f64],
    noise: &Matrix,
    mode: Mode,
    rng: &mut Rng,
) -> Result<(GLossParts, Gradients)> {
    g_loss_impl(disc, gen, real_features_mean, noise, mode, rng, false)
}

/// As [`g_loss`], also returning the gradient with respect to the noise
/// batch in `Gradients::input`.
pub fn g_loss_with_input(
    disc: &Discriminator,
    gen: &Generator,
    real_features_mean: &[f64],
    noise: &Matrix,
    mode: Mode,
    rng: &mut Rng,
) -> Result<(GLossParts, Gradients)> {
    g_loss_impl(disc, gen, real_features_mean, noise, mode, rng, true)
}

fn g_loss_impl(
    disc: &Discriminator,
    gen: &Generator,
    real_features_mean: &[f64],
    noise: &Matrix,
    mode: Mode,
    rng: &mut Rng,
    want_input: bool,
) -> Result<(GLossParts, Gradients)> {
    let g_cache = gen.mlp.forward(noise, mode, rng)?;
    let d_cache = disc.mlp.forward(g_cache.output(), mode, rng)?;
    let feats = d_cache.penultimate();
    if real_features_mean.len() != feats.cols() {
        return Err(Error::Shape(format!(
            "real feature mean has {} entries, discriminator features have {}",
            real_features_mean.len(),
            feats.cols()
        )));
    }
    let n = feats.rows() as f64;
    let diff: Vec<f64> = real_features_mean
        .iter()
        .zip(feats.column_means())
        .map(|(r, f)| r - f)
        .collect();
    let feature_matching = diff.iter().map(|d| d * d).sum();
    let mut feat_grad = Matrix::zeros(feats.rows(), feats.cols());
    for i in 0..feats.rows() {
        for (g, d) in feat_grad.row_mut(i).iter_mut().zip(&diff) {
            *g = -2.0 * d / n;
        }
    }

    let logits = d_cache.output();
    let mut fool = 0.0;
    let mut logit_grad = Matrix::zeros(logits.rows(), logits.cols());
    for i in 0..logits.rows() {
        fool -= log_not_fake(logits.row(i)) / n;
        add_not_fake_grad(logits.row(i), 1.0 / n, logit_grad.row_mut(i));
    }

    let d_grads = disc
        .mlp
        .backward_with(&d_cache, &logit_grad, Some(&feat_grad), true)?;
    let fake_grad = d_grads.input.expect("input gradient requested");
    let g_grads = gen
        .mlp
        .backward_with(&g_cache, &fake_grad, None, want_input)?;
    Ok((
        GLossParts {
            feature_matching,
            fool,
        },
        g_grads,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_analytic_values() {
        let logits = Matrix::zeros(3, 31);
        let (p, _) = d_loss_from_logits(&logits, &[4], 1, 1).unwrap();
        assert!((p.unsup_fake - 3.433987).abs() < 1e-6);
        assert!((p.unsup_real - 0.032790).abs() < 1e-6);
        assert!((p.sup - 31f64.ln()).abs() < 1e-12);
        assert!((p.unsup_real + (30f64 / 31.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn no_labels_means_no_supervised_term() {
        let logits = Matrix::new(2, 3, vec![1.0, 2.0, 0.5, -1.0, 0.0, 2.0]).unwrap();
        let (p, g) = d_loss_from_logits(&logits, &[], 1, 1).unwrap();
        assert_eq!(p.sup, 0.0);
        assert!(p.unsup_real > 0.0 && p.unsup_fake > 0.0);
        assert!(g.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn supervised_term_vanishes_with_margin() {
        let mut prev = f64::INFINITY;
        for margin in [0.0, 2.0, 8.0, 30.0, 60.0] {
            let logits = Matrix::new(1, 4, vec![margin, 0.0, 0.0, 0.0]).unwrap();
            let (p, _) = d_loss_from_logits(&logits, &[0], 0, 0).unwrap();
            assert!(p.sup < prev);
            prev = p.sup;
        }
        assert!(prev < 1e-20);
    }

    #[test]
    fn random_instance_matches_high_precision_oracle() {
        // frozen from tests/oracles/losses.py (K = 3, two of each kind)
        let logits = Matrix::new(
            6,
            4,
            vec![
                1.0, -0.5, 0.25, -1.0, //
                0.0, 2.0, -1.5, 0.5, //
                -0.75, 0.5, 1.25, 0.0, //
                3.0, -2.0, 0.0, 1.0, //
                0.1, 0.2, -0.3, 1.5, //
                -1.0, -1.0, 0.5, -0.25,
            ],
        )
        .unwrap();
        let (p, _) = d_loss_from_logits(&logits, &[0, 1], 2, 2).unwrap();
        assert!((p.sup - 0.466_555_897_626_107_3).abs() < 1e-12);
        assert!((p.unsup_real - 0.134_120_582_699_535_55).abs() < 1e-12);
        assert!((p.unsup_fake - 0.961_517_794_775_518).abs() < 1e-12);
    }

    #[test]
    fn stable_log_identity_at_extremes() {
        let mut rng = Rng::new(17);
        for _ in 0..1000 {
            let row: Vec<f64> = (0..6)
                .map(|_| (rng.uniform() * 2.0 - 1.0) * 100.0)
                .collect();
            let p_fake = softmax_row(&row)[5];
            let direct = (1.0 - p_fake).ln();
            let stable = log_not_fake(&row);
            // -softplus(z_fake - lse(real)), evaluated on the stable side
            let a = row[5] - logsumexp(&row[..5]);
            let softplus = if a > 0.0 {
                a + (-a).exp().ln_1p()
            } else {
                a.exp().ln_1p()
            };
            assert!((stable + softplus).abs() < 1e-10, "{row:?}");
            if p_fake < 0.5 {
                assert!((direct - stable).abs() < 1e-10, "{row:?}");
            }
            assert!(stable.is_finite() && stable <= 0.0);
        }
    }

    #[test]
    fn bad_label_is_rejected() {
        assert!(d_loss_from_logits(&Matrix::zeros(1, 4), &[3], 0, 0).is_err());
        assert!(d_loss_from_logits(&Matrix::zeros(2, 4), &[0], 0, 0).is_err());
    }
}
