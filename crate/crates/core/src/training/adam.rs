//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter first/second moment buffers plus the shared step counter.
#[derive(Clone, Debug)]
pub struct Adam {
    pub cfg: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Advance the step counter; call once per optimizer step, before the
    /// per-parameter updates.
    pub fn begin_step(&mut self) {
        self.t += 1;
    }

    /// Bias-corrected update of one parameter (index-addressed moments).
    pub fn update(&mut self, idx: usize, name: &str, param: &mut Tensor, grad: &[f64]) -> Result<()> {
        if grad.len() != param.len() {
            return Err(Error::config(format!(
                "gradient length {} does not match parameter '{name}' length {}",
                grad.len(),
                param.len()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!(
                "NaN/Inf gradient for parameter '{name}' at step {}",
                self.t
            )));
        }
        while self.m.len() <= idx {
            self.m.push(Vec::new());
            self.v.push(Vec::new());
        }
        if self.m[idx].is_empty() {
            self.m[idx] = vec![0.0; param.len()];
            self.v[idx] = vec![0.0; param.len()];
        }
        let (b1, b2, eps, lr) = (self.cfg.beta1, self.cfg.beta2, self.cfg.eps, self.cfg.lr);
        let t = self.t as f64;
        let bc1 = 1.0 - b1.powf(t);
        let bc2 = 1.0 - b2.powf(t);
        let m = &mut self.m[idx];
        let v = &mut self.v[idx];
        for (i, p) in param.data_mut().iter_mut().enumerate() {
            let g = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }

    /// One full step over a flat parameter list.
    pub fn step_pairs(&mut self, params: &mut [(&str, &mut Tensor)], grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::config(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        self.begin_step();
        for (idx, ((name, param), grad)) in params.iter_mut().zip(grads.iter()).enumerate() {
            self.update(idx, name, param, grad)?;
        }
        Ok(())
    }
}

/// Scale gradients in place so their global L2 norm does not exceed `clip`.
pub fn clip_global_norm(grads: &mut [Vec<f64>], clip: f64) -> f64 {
    let norm: f64 = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > clip && norm > 0.0 {
        let scale = clip / norm;
        for g in grads.iter_mut() {
            for v in g.iter_mut() {
                *v *= scale;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_matches_hand_evaluated_update() {
        // p=1, g=1, lr=0.1, t=1: m_hat=1, v_hat=1, p -> 1 - 0.1/(1+eps).
        let mut adam = Adam::new(AdamConfig::with_lr(0.1));
        let mut p = Tensor::scalar(1.0);
        let mut pairs = [("p", &mut p)];
        adam.step_pairs(&mut pairs, &[vec![1.0]]).unwrap();
        let expected = 1.0 - 0.1 * (1.0 / (1.0 + 1e-8));
        assert!((p.data()[0] - expected).abs() < 1e-12, "{}", p.data()[0]);
        assert!((p.data()[0] - 0.9).abs() < 1e-8);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged_but_decays_moments() {
        let mut adam = Adam::new(AdamConfig::with_lr(0.1));
        let mut p = Tensor::scalar(2.0);
        let mut pairs = [("p", &mut p)];
        adam.step_pairs(&mut pairs, &[vec![1.0]]).unwrap();
        let after_one = p.data()[0];
        let m_before = adam.m[0][0];
        let mut pairs = [("p", &mut p)];
        adam.step_pairs(&mut pairs, &[vec![0.0]]).unwrap();
        assert!(adam.m[0][0] < m_before);
        assert_ne!(p.data()[0], after_one); // moments keep moving the weight
        let mut q = Tensor::scalar(2.0);
        let mut adam2 = Adam::new(AdamConfig::with_lr(0.1));
        let mut pairs = [("q", &mut q)];
        adam2.step_pairs(&mut pairs, &[vec![0.0]]).unwrap();
        assert_eq!(q.data()[0], 2.0); // zero gradient from scratch: no motion
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut adam = Adam::new(AdamConfig::with_lr(0.01));
            let mut p = Tensor::from_vec(vec![0.5, -0.25, 1.75]);
            for step in 0..50 {
                let g: Vec<f64> = p.data().iter().map(|v| 2.0 * v + step as f64 * 0.01).collect();
                let mut pairs = [("p", &mut p)];
                adam.step_pairs(&mut pairs, &[g]).unwrap();
            }
            p.data().to_vec()
        };
        let a = run();
        let b = run();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn nan_gradient_names_the_parameter() {
        let mut adam = Adam::new(AdamConfig::with_lr(0.1));
        let mut p = Tensor::scalar(1.0);
        let mut pairs = [("blocks.3.conv_d.weight", &mut p)];
        let err = adam.step_pairs(&mut pairs, &[vec![f64::NAN]]).unwrap_err();
        assert!(err.to_string().contains("blocks.3.conv_d.weight"), "{err}");
    }

    #[test]
    fn clip_rescales_only_above_threshold() {
        let mut grads = vec![vec![3.0, 4.0]]; // norm 5
        let norm = clip_global_norm(&mut grads, 5.0);
        assert_eq!(norm, 5.0);
        assert_eq!(grads[0], vec![3.0, 4.0]);
        let mut grads = vec![vec![6.0, 8.0]]; // norm 10
        clip_global_norm(&mut grads, 5.0);
        assert!((grads[0][0] - 3.0).abs() < 1e-12);
        assert!((grads[0][1] - 4.0).abs() < 1e-12);
    }
}
