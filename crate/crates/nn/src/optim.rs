//! Adam and Nadam updates.

use crate::params::{Gradients, ParamStore};
use crate::tensor::Tensor;
use crate::{NnError, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Nadam,
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        Self {
            kind,
            lr,
            beta1: BETA1,
            beta2: BETA2,
            eps: EPSILON,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// `m <- b1 m + (1 - b1) g`, `v <- b2 v + (1 - b2) g^2`, then
    /// `w <- w - lr * m_hat / (sqrt(v_hat) + eps)`. Nadam replaces `m_hat`
    /// with `b1 m_hat + (1 - b1) g / (1 - b1^t)`.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<()> {
        if grads.tensors().len() != store.len() || self.m.len() != store.len() {
            return Err(NnError::ShapeMismatch {
                op: "optimizer",
                expected: vec![store.len()],
                got: vec![grads.tensors().len()],
            });
        }
        for (id, g) in store.ids().zip(grads.tensors()) {
            if g.shape() != store.get(id).shape() {
                return Err(NnError::ShapeMismatch {
                    op: "optimizer",
                    expected: store.get(id).shape().to_vec(),
                    got: g.shape().to_vec(),
                });
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for (i, id) in store.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let g = grads.tensors()[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let w = store.get_mut(id).data_mut();
            for j in 0..g.len() {
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                let direction = match self.kind {
                    OptimizerKind::Adam => m_hat,
                    OptimizerKind::Nadam => b1 * m_hat + (1.0 - b1) * g[j] / c1,
                };
                w[j] -= self.lr * direction / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm.is_finite() {
        grads.scale(max_norm / norm);
    }
    norm
}
