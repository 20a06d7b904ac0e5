use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{ParamSet, Scalar};
use crate::{Error, Result};

/// Optimizer family and hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// `g' = g + wd*p; v = mu*v + g'; p -= lr*v`.
    SgdMomentum { momentum: f64, weight_decay: f64 },
    /// Bias-corrected Adam.
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
        weight_decay: f64,
    },
}

impl OptimizerKind {
    pub fn sgd(momentum: f64, weight_decay: f64) -> Self {
        Self::SgdMomentum { momentum, weight_decay }
    }

    pub fn adam(beta1: f64, beta2: f64) -> Self {
        Self::Adam {
            beta1,
            beta2,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Per-parameter optimizer buffers. Buffers are created on the first step
/// and must keep the parameter shapes afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer<T> {
    pub kind: OptimizerKind,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
    steps: u64,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update with learning rate `lr`. Fails without touching
    /// any parameter if a gradient is non-finite or shapes disagree.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &[Vec<T>], lr: f64) -> Result<()> {
        if !(lr >= 0.0) {
            return Err(Error::Config(format!("learning rate must be >= 0, got {lr}")));
        }
        if grads.len() != params.len() {
            return Err(Error::Dimension {
                op: "optimizer",
                axis: "param count",
                expected: params.len(),
                got: grads.len(),
            });
        }
        for (p, g) in params.params.iter().zip(grads) {
            if g.len() != p.value.numel() {
                return Err(Error::Dimension {
                    op: "optimizer",
                    axis: "numel",
                    expected: p.value.numel(),
                    got: g.len(),
                });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {}", p.name)));
            }
        }
        if self.first.is_empty() {
            self.first = params.params.iter().map(|p| vec![T::zero(); p.value.numel()]).collect();
            if matches!(self.kind, OptimizerKind::Adam { .. }) {
                self.second = self.first.clone();
            }
        } else if self.first.len() != params.len()
            || self.first.iter().zip(&params.params).any(|(b, p)| b.len() != p.value.numel())
        {
            return Err(Error::Dimension {
                op: "optimizer",
                axis: "buffer",
                expected: self.first.len(),
                got: params.len(),
            });
        }
        self.steps += 1;
        let lr = T::lit(lr);
        match self.kind {
            OptimizerKind::SgdMomentum { momentum, weight_decay } => {
                let (mu, wd) = (T::lit(momentum), T::lit(weight_decay));
                for ((p, g), v) in params.params.iter_mut().zip(grads).zip(&mut self.first) {
                    for ((w, &gi), vi) in p.value.data_mut().iter_mut().zip(g).zip(v.iter_mut()) {
                        let gd = gi + wd * *w;
                        *vi = mu * *vi + gd;
                        *w -= lr * *vi;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps, weight_decay } => {
                let (b1, b2, e, wd) = (T::lit(beta1), T::lit(beta2), T::lit(eps), T::lit(weight_decay));
                let t = self.steps as i32;
                let c1 = T::one() - b1.powi(t);
                let c2 = T::one() - b2.powi(t);
                for (((p, g), m), v) in params
                    .params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    for (((w, &gi), mi), vi) in p.value.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        let gd = gi + wd * *w;
                        *mi = b1 * *mi + (T::one() - b1) * gd;
                        *vi = b2 * *vi + (T::one() - b2) * gd * gd;
                        let mhat = *mi / c1;
                        let vhat = *vi / c2;
                        *w -= lr * mhat / (vhat.sqrt() + e);
                    }
                }
            }
        }
        Ok(())
    }
}
