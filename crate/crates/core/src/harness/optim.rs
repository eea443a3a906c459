//! First-order optimizers over a model's parameter tensors.

use crate::grad::{Model, Tensor};

use super::config::OptimizerKind;

#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd { lr: f64 },
    /// Adam with `(β1, β2, ε) = (0.9, 0.999, 1e-8)`.
    Adam { lr: f64, t: i32, m: Vec<Tensor>, v: Vec<Tensor> },
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam { lr, t: 0, m: Vec::new(), v: Vec::new() },
        }
    }

    /// Apply one update with `grads` given in [`Model::params`] order.
    pub fn step<M: Model>(&mut self, model: &mut M, grads: &[Tensor]) {
        let params = model.params_mut();
        debug_assert_eq!(params.len(), grads.len());
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.into_iter().zip(grads) {
                    p.scaled_add(-*lr, g);
                }
            }
            Optimizer::Adam { lr, t, m, v } => {
                if m.is_empty() {
                    *m = grads.iter().map(|g| Tensor::zeros(g.raw_dim())).collect();
                    *v = m.clone();
                }
                *t += 1;
                let c1 = 1.0 - BETA1.powi(*t);
                let c2 = 1.0 - BETA2.powi(*t);
                for (((p, g), m), v) in params.into_iter().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                    ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                        *m = BETA1 * *m + (1.0 - BETA1) * g;
                        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                        *p -= *lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
                    });
                }
            }
        }
    }
}
