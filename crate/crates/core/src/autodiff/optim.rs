//! First-order optimizers over a [`ParamStore`].

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::params::ParamStore;
use super::tensor::Tensor;

/// Optimizer choice as it appears in run configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Stateful optimizer bound to the layout of one store. Statistics are kept
/// per parameter in registration order, so the store must not grow between
/// steps.
#[derive(Debug, Clone)]
pub enum Optimizer<S: Scalar> {
    Sgd {
        lr: S,
    },
    Adam {
        lr: S,
        beta1: S,
        beta2: S,
        eps: S,
        t: u64,
        m: Vec<Tensor<S>>,
        v: Vec<Tensor<S>>,
    },
}

impl<S: Scalar> Optimizer<S> {
    pub fn sgd(lr: f64) -> Self {
        Optimizer::Sgd { lr: S::c(lr) }
    }

    /// Adam with the conventional defaults beta1=0.9, beta2=0.999, eps=1e-8.
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr: S::c(lr),
            beta1: S::c(0.9),
            beta2: S::c(0.999),
            eps: S::c(1e-8),
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        match kind {
            OptimizerKind::Sgd => Self::sgd(lr),
            OptimizerKind::Adam => Self::adam(lr),
        }
    }

    /// Apply one update from the gradients currently accumulated in `store`.
    pub fn step(&mut self, store: &mut ParamStore<S>) {
        match self {
            Optimizer::Sgd { lr } => {
                let lr = *lr;
                for i in 0..store.len() {
                    let id = super::params::ParamId(i);
                    let grad = store.grad(id).clone();
                    let value = store.value_mut(id);
                    for (v, &g) in value.data_mut().iter_mut().zip(grad.data().iter()) {
                        *v -= lr * g;
                    }
                }
            }
            Optimizer::Adam { lr, beta1, beta2, eps, t, m, v } => {
                if m.is_empty() {
                    for (_, _, value) in store.iter() {
                        m.push(Tensor::zeros(value.shape()));
                        v.push(Tensor::zeros(value.shape()));
                    }
                }
                assert_eq!(
                    m.len(),
                    store.len(),
                    "optimizer state built for {} parameters, store has {}",
                    m.len(),
                    store.len()
                );
                *t += 1;
                let (b1, b2) = (*beta1, *beta2);
                let one = S::one();
                // Bias correction: m_hat = m / (1 - b1^t), v_hat = v / (1 - b2^t).
                let c1 = one - b1.powi(*t as i32);
                let c2 = one - b2.powi(*t as i32);
                let (lr, eps) = (*lr, *eps);
                for i in 0..store.len() {
                    let id = super::params::ParamId(i);
                    let grad = store.grad(id).clone();
                    let (mi, vi) = (&mut m[i], &mut v[i]);
                    let value = store.value_mut(id);
                    for j in 0..grad.numel() {
                        let g = grad.data()[j];
                        let md = &mut mi.data_mut()[j];
                        *md = b1 * *md + (one - b1) * g;
                        let vd = &mut vi.data_mut()[j];
                        *vd = b2 * *vd + (one - b2) * g * g;
                        let m_hat = *md / c1;
                        let v_hat = *vd / c2;
                        value.data_mut()[j] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
    }
}
