use ndarray::{Array2, Zip};

use super::OptimizerKind;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const RMSPROP_DECAY: f64 = 0.9;
pub const EPS: f64 = 1e-8;

/// Moment accumulators mirroring the parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub kind: OptimizerKind,
    /// Adam first moment; unused by RMSProp.
    pub m: Vec<Array2<f64>>,
    /// Adam second moment or RMSProp running mean square.
    pub v: Vec<Array2<f64>>,
    pub t: u64,
}

impl OptState {
    pub fn new(kind: OptimizerKind, tensors: &[Array2<f64>]) -> Self {
        let zeros = || tensors.iter().map(|t| Array2::zeros(t.raw_dim())).collect();
        OptState {
            kind,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    /// One update of every tensor with `trainable[i]` (all when `None`).
    pub fn step(
        &mut self,
        params: &mut [Array2<f64>],
        grads: &[Array2<f64>],
        lr: f64,
        trainable: Option<&[bool]>,
    ) {
        self.t += 1;
        let t = self.t as i32;
        for i in 0..params.len() {
            if trainable.is_some_and(|m| !m[i]) {
                continue;
            }
            match self.kind {
                OptimizerKind::Adam => {
                    let c1 = 1.0 - ADAM_BETA1.powi(t);
                    let c2 = 1.0 - ADAM_BETA2.powi(t);
                    Zip::from(&mut params[i])
                        .and(&mut self.m[i])
                        .and(&mut self.v[i])
                        .and(&grads[i])
                        .for_each(|p, m, v, &g| {
                            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
                        });
                }
                OptimizerKind::RmsProp => {
                    Zip::from(&mut params[i])
                        .and(&mut self.v[i])
                        .and(&grads[i])
                        .for_each(|p, v, &g| {
                            *v = RMSPROP_DECAY * *v + (1.0 - RMSPROP_DECAY) * g * g;
                            *p -= lr * g / (v.sqrt() + EPS);
                        });
                }
            }
        }
    }
}

/// Scales `grads` so their joint L2 norm is at most `max_norm`; returns the norm before scaling.
pub fn clip_global_norm(grads: &mut [Array2<f64>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .map(|g| g.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.mapv_inplace(|v| v * s);
        }
    }
    norm
}
