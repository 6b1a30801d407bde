//! Adam with L2-coupled weight decay and per-group learning rates.
//!
//! The decay is folded into the gradient (`g <- g + wd * p`) before the
//! moment updates, matching the classic coupled formulation. Betas and
//! epsilon default to 0.9 / 0.999 / 1e-8; weight decay to 1e-4.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{Group, ModelParams};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub weight_decay: T,
}

impl<T: Scalar> Default for AdamConfig<T> {
    fn default() -> Self {
        Self {
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            eps: T::from_f64(1e-8),
            weight_decay: T::from_f64(1e-4),
        }
    }
}

/// Per-group learning rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupLr<T> {
    pub main: T,
    pub encoder: T,
}

/// First/second moments aligned with the model's stable tensor order.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(model: &ModelParams<T>) -> Self {
        let shapes: Vec<Tensor<T>> = model
            .tensors()
            .into_iter()
            .map(|(_, _, t)| t.zeros_like())
            .collect();
        Self {
            m: shapes.clone(),
            v: shapes,
            step: 0,
        }
    }
}

/// One optimizer step. The step counter increments once per call.
pub fn adam_step<T: Scalar>(
    model: &mut ModelParams<T>,
    grads: &ModelParams<T>,
    state: &mut AdamState<T>,
    cfg: &AdamConfig<T>,
    lr: GroupLr<T>,
) -> Result<()> {
    if lr.main <= T::zero() || lr.encoder <= T::zero() {
        return Err(Error::Argument("learning rates must be positive".into()));
    }
    let grad_tensors = grads.tensors();
    let mut params = model.tensors_mut();
    if params.len() != grad_tensors.len() || params.len() != state.m.len() {
        return Err(Error::Dimension {
            context: "optimizer tensor list",
            expected: state.m.len(),
            got: params.len(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = T::one() - cfg.beta1.powi(t);
    let bc2 = T::one() - cfg.beta2.powi(t);
    let one = T::one();

    for (idx, (name, group, param)) in params.iter_mut().enumerate() {
        let (gname, _, grad) = &grad_tensors[idx];
        debug_assert_eq!(name, gname);
        let rate = match group {
            Group::Main => lr.main,
            Group::Encoder => lr.encoder,
        };
        let m = state.m[idx].data_mut();
        let v = state.v[idx].data_mut();
        for ((p, &g0), (mi, vi)) in param
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(m.iter_mut().zip(v.iter_mut()))
        {
            let g = g0 + cfg.weight_decay * *p;
            *mi = cfg.beta1 * *mi + (one - cfg.beta1) * g;
            *vi = cfg.beta2 * *vi + (one - cfg.beta2) * g * g;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *p = *p - rate * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Stepped learning-rate schedule: multiplied by `decay` once every
/// `every` epochs (epochs 0..every-1 use the base rate).
pub fn lr_at_epoch<T: Scalar>(base: T, decay: T, every: usize, epoch: usize) -> T {
    base * decay.powi((epoch / every.max(1)) as i32)
}
