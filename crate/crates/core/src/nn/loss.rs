use crate::error::{Error, Result};
use crate::nn::Matrix;

/// `m + ln Σ exp(x - m)` with `m = max(x)`.
pub fn logsumexp(row: &[f64]) -> f64 {
    assert!(!row.is_empty(), "logsumexp of an empty row");
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax_row(row: &[f64]) -> Vec<f64> {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn log_softmax_row(row: &[f64]) -> Vec<f64> {
    let l = logsumexp(row);
    row.iter().map(|x| x - l).collect()
}

/// Mean cross-entropy of `targets` under row-wise softmax, and its gradient
/// with respect to the logits.
pub fn softmax_xent(logits: &Matrix, targets: &[usize]) -> Result<(f64, Matrix)> {
    if logits.rows() != targets.len() {
        return Err(Error::Shape(format!(
            "{} logit rows for {} targets",
            logits.rows(),
            targets.len()
        )));
    }
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    if targets.is_empty() {
        return Ok((0.0, grad));
    }
    let n = targets.len() as f64;
    let mut loss = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        let row = logits.row(i);
        if t >= row.len() {
            return Err(Error::Index(format!(
                "target {t} for {} classes",
                row.len()
            )));
        }
        loss -= row[t] - logsumexp(row);
        let g = grad.row_mut(i);
        for (gj, pj) in g.iter_mut().zip(softmax_row(row)) {
            *gj = pj / n;
        }
        g[t] -= 1.0 / n;
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_basics() {
        assert_eq!(logsumexp(&[1.25]), 1.25);
        assert!((logsumexp(&[0.0; 31]) - 31f64.ln()).abs() < 1e-12);
        let x = [0.3, -1.2, 4.0, 2.2];
        let shifted: Vec<f64> = x.iter().map(|v| v + 17.5).collect();
        assert!((logsumexp(&shifted) - logsumexp(&x) - 17.5).abs() < 1e-12);
        assert!(logsumexp(&[1000.0, 1000.0]).is_finite());
    }

    #[test]
    fn uniform_logits_give_ln_c() {
        let logits = Matrix::zeros(3, 31);
        let (loss, _) = softmax_xent(&logits, &[0, 5, 30]).unwrap();
        assert!((loss - 3.433987).abs() < 1e-6);
        assert!((loss - 31f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn loss_decreases_with_margin() {
        let mut prev = f64::INFINITY;
        for margin in [0.0, 1.0, 2.0, 5.0, 10.0, 40.0] {
            let logits = Matrix::new(1, 3, vec![margin, 0.0, 0.0]).unwrap();
            let (loss, _) = softmax_xent(&logits, &[0]).unwrap();
            assert!(loss < prev);
            prev = loss;
        }
        assert!(prev < 1e-15);
    }

    #[test]
    fn random_case_matches_high_precision_oracle() {
        // frozen from tests/oracles/losses.py (mpmath, 50 digits)
        let logits = Matrix::new(
            4,
            5,
            vec![
                0.5, -1.25, 2.0, 0.0, 3.5, //
                -2.0, 0.75, 0.25, 1.5, -0.5, //
                10.0, 9.5, -3.0, 0.0, 2.25, //
                -0.125, -0.25, -0.375, -0.5, -0.625,
            ],
        )
        .unwrap();
        let (loss, grad) = softmax_xent(&logits, &[4, 1, 0, 3]).unwrap();
        assert!((loss - ORACLE_LOSS).abs() < 1e-12, "{loss}");
        assert!((grad.get(0, 4) - ORACLE_GRAD_04).abs() < 1e-12);
        assert!((grad.get(2, 1) - ORACLE_GRAD_21).abs() < 1e-12);
        for r in grad.iter_rows() {
            assert!(r.iter().sum::<f64>().abs() < 1e-15);
        }
    }

    const ORACLE_LOSS: f64 = 0.975_093_985_124_280_2;
    const ORACLE_GRAD_04: f64 = -0.059_417_273_001_365_36;
    const ORACLE_GRAD_21: f64 = 0.094_357_068_958_340_33;

    #[test]
    fn bad_target_is_an_error() {
        assert!(softmax_xent(&Matrix::zeros(1, 3), &[3]).is_err());
        assert!(softmax_xent(&Matrix::zeros(2, 3), &[0]).is_err());
    }
}
