use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for a fixed list of parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Self {
        Self {
            config,
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Bias-corrected Adam:
    /// `θ -= lr · m̂ / (sqrt(v̂) + eps)` with `m̂ = m / (1 - β1^t)`,
    /// `v̂ = v / (1 - β2^t)`.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "{} parameter tensors and {} gradients for an optimizer over {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[i].len() || g.len() != self.m[i].len() {
                return Err(Error::Shape(format!(
                    "tensor {i}: sizes {} / {} / {}",
                    p.len(),
                    g.len(),
                    self.m[i].len()
                )));
            }
            if let Some(j) = g.iter().position(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!("gradient {i}[{j}] is {}", g[j])));
            }
        }
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let update = lr * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
                let next = p[j] - update;
                if !next.is_finite() {
                    return Err(Error::Numeric(format!(
                        "Adam update of tensor {i}[{j}] is {next}"
                    )));
                }
                p[j] = next;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = AdamState::new(AdamConfig::with_lr(0.01), &[3]);
        let mut p = [1.0, -2.0, 0.5];
        s.step(&mut [&mut p[..]], &[&[0.0; 3]]).unwrap();
        assert_eq!(p, [1.0, -2.0, 0.5]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_closed_form() {
        let mut s = AdamState::new(AdamConfig::with_lr(0.01), &[1]);
        let mut p = [0.0];
        s.step(&mut [&mut p[..]], &[&[0.5]]).unwrap();
        // t = 1: m̂ = g, v̂ = g², Δ = -lr·g/(|g| + eps)
        let expected = -0.01 * 0.5 / (0.5 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - -0.00999999).abs() < 1e-8);
    }

    #[test]
    fn minimises_a_parabola() {
        // reference loop written out independently of AdamState
        let (lr, b1, b2, eps) = (0.01, 0.9, 0.999, 1e-8);
        let (mut theta_ref, mut m, mut v) = (1.0f64, 0.0, 0.0);
        let mut s = AdamState::new(AdamConfig::with_lr(lr), &[1]);
        let mut p = [1.0];
        let mut prev = 1.0f64;
        for t in 1..=100 {
            let g = 2.0 * theta_ref;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            theta_ref -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
            let grad = [2.0 * p[0]];
            s.step(&mut [&mut p[..]], &[&grad]).unwrap();
            assert_eq!(p[0], theta_ref);
            assert!(p[0].abs() < prev);
            prev = p[0].abs();
        }
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut s = AdamState::new(AdamConfig::with_lr(0.01), &[1]);
        let mut p = [0.0];
        assert!(matches!(
            s.step(&mut [&mut p[..]], &[&[f64::NAN]]),
            Err(Error::Numeric(_))
        ));
        assert!(s.step(&mut [&mut p[..]], &[&[0.0, 1.0]]).is_err());
    }
}
