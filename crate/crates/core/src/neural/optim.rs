use serde::{Deserialize, Serialize};

use super::{NeuralError, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimiserKind {
    /// `v ← m·v + g`, `w ← w − lr·v`.
    SgdMomentum { lr: f64, momentum: f64 },
    /// Adam with decoupled weight decay applied before the moment update.
    Adamw {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default = "default_weight_decay")]
        weight_decay: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_weight_decay() -> f64 {
    0.01
}

impl Default for OptimiserKind {
    fn default() -> Self {
        OptimiserKind::SgdMomentum {
            lr: 1e-3,
            momentum: 0.5,
        }
    }
}

impl OptimiserKind {
    pub fn adamw(lr: f64) -> Self {
        OptimiserKind::Adamw {
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            weight_decay: default_weight_decay(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            OptimiserKind::SgdMomentum { lr, momentum } => {
                if !(lr > 0.0 && lr.is_finite()) {
                    return Err(format!("learning rate must be positive, got {lr}"));
                }
                if !(0.0..1.0).contains(&momentum) {
                    return Err(format!("momentum must be in [0, 1), got {momentum}"));
                }
            }
            OptimiserKind::Adamw {
                lr,
                beta1,
                beta2,
                eps,
                weight_decay,
            } => {
                if !(lr > 0.0 && lr.is_finite()) {
                    return Err(format!("learning rate must be positive, got {lr}"));
                }
                if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
                    return Err("betas must be in [0, 1)".into());
                }
                if !(eps > 0.0) || weight_decay < 0.0 {
                    return Err("eps must be positive and weight decay non-negative".into());
                }
            }
        }
        Ok(())
    }
}

/// Per-node optimiser buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimiserState<T> {
    kind: OptimiserKind,
    first: Vec<T>,
    second: Vec<T>,
    steps: u64,
}

impl<T: Scalar> OptimiserState<T> {
    pub fn new(kind: OptimiserKind, len: usize) -> Self {
        let second = match kind {
            OptimiserKind::Adamw { .. } => vec![T::zero(); len],
            OptimiserKind::SgdMomentum { .. } => Vec::new(),
        };
        OptimiserState {
            kind,
            first: vec![T::zero(); len],
            second,
            steps: 0,
        }
    }

    pub fn kind(&self) -> OptimiserKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Clears momentum and moment estimates and the step counter.
    pub fn reset(&mut self) {
        self.first.iter_mut().for_each(|v| *v = T::zero());
        self.second.iter_mut().for_each(|v| *v = T::zero());
        self.steps = 0;
    }

    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<(), NeuralError> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(NeuralError::ShapeMismatch(format!(
                "optimiser sized for {} parameters, got {} parameters and {} gradients",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        self.steps += 1;
        match self.kind {
            OptimiserKind::SgdMomentum { lr, momentum } => {
                let (lr, m) = (T::of(lr), T::of(momentum));
                for ((w, v), &g) in params.iter_mut().zip(&mut self.first).zip(grads) {
                    *v = m * *v + g;
                    *w = *w - lr * *v;
                }
            }
            OptimiserKind::Adamw {
                lr,
                beta1,
                beta2,
                eps,
                weight_decay,
            } => {
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let decay = 1.0 - lr * weight_decay;
                for (((w, m), v), &g) in params.iter_mut().zip(&mut self.first).zip(&mut self.second).zip(grads) {
                    let g = g.as_f64();
                    let mf = beta1 * m.as_f64() + (1.0 - beta1) * g;
                    let vf = beta2 * v.as_f64() + (1.0 - beta2) * g * g;
                    *m = T::of(mf);
                    *v = T::of(vf);
                    let update = lr * (mf / c1) / ((vf / c2).sqrt() + eps);
                    *w = T::of(w.as_f64() * decay - update);
                }
            }
        }
        Ok(())
    }
}
