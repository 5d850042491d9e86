use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First-order optimizer over a list of parameter buffers. The buffer list
/// must be passed in the same order on every step.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        hyper: AdamHyper,
        step: i32,
        first: Vec<Vec<f64>>,
        second: Vec<Vec<f64>>,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, hyper: AdamHyper) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                hyper,
                step: 0,
                first: Vec::new(),
                second: Vec::new(),
            },
        }
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), grads.len(), "parameter/gradient buffer count");
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pi, gi) in p.iter_mut().zip(g.iter()) {
                        *pi -= *lr * gi;
                    }
                }
            }
            Optimizer::Adam {
                lr,
                hyper,
                step,
                first,
                second,
            } => {
                if first.is_empty() {
                    *first = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                    *second = first.clone();
                }
                *step += 1;
                let c1 = 1.0 - libm::pow(hyper.beta1, f64::from(*step));
                let c2 = 1.0 - libm::pow(hyper.beta2, f64::from(*step));
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(first.iter_mut())
                    .zip(second.iter_mut())
                {
                    for i in 0..p.len() {
                        let gi = g[i];
                        m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * gi;
                        v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * gi * gi;
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        p[i] -= *lr * m_hat / (math::sqrt(v_hat) + hyper.epsilon);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step_is_exactly_minus_lr_grad() {
        let mut p = vec![1.5, -0.25, 3.0];
        let g = vec![0.1, -2.0, 0.0];
        let before = p.clone();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.03, AdamHyper::default());
        opt.step(&mut [&mut p], &[&g]);
        for i in 0..3 {
            assert_eq!(p[i], before[i] - 0.03 * g[i]);
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = vec![0.0, 0.0];
        let g = vec![3.0, -0.5];
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, AdamHyper::default());
        opt.step(&mut [&mut p], &[&g]);
        // Bias correction makes the first update lr * g / (|g| + eps).
        assert!((p[0] + 0.01).abs() < 1e-9);
        assert!((p[1] - 0.01).abs() < 1e-9);
    }

    #[test]
    fn zero_learning_rate_leaves_params_bitwise_unchanged() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut p = vec![0.7, -1.25, 0.0, -0.0];
            let before = p.clone();
            let mut opt = Optimizer::new(kind, 0.0, AdamHyper::default());
            for _ in 0..5 {
                opt.step(&mut [&mut p], &[&[1.0, -3.0, 0.5, 2.0]]);
            }
            let a: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = before.iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b, "{kind:?}");
        }
    }
}
