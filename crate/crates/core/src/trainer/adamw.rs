//! AdamW with bias correction and decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::error::{HecvlError, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

/// First/second moment accumulators, one per parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
}

impl OptimizerState {
    pub fn new<'a>(blocks: impl IntoIterator<Item = &'a Matrix>) -> Self {
        let m: Vec<Matrix> = blocks
            .into_iter()
            .map(|b| Matrix::zeros(b.rows(), b.cols()))
            .collect();
        Self {
            step: 0,
            v: m.clone(),
            m,
        }
    }
}

/// One update of every block:
///
/// ```text
/// m ← β1 m + (1-β1) g          v ← β2 v + (1-β2) g²
/// θ ← θ(1 - lr·wd) - lr · m̂ / (√v̂ + ε)
/// ```
///
/// with `m̂ = m / (1-β1^t)`, `v̂ = v / (1-β2^t)`. Gradients are checked for
/// finiteness before anything is modified.
pub fn adamw_step(
    params: &mut [&mut Matrix],
    grads: &[&Matrix],
    state: &mut OptimizerState,
    hp: &AdamW,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len()
    {
        return Err(HecvlError::Contract(format!(
            "adamw: {} parameter blocks, {} gradient blocks, {} moment blocks",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(HecvlError::Shape {
                op: "adamw_step",
                left_rows: p.rows(),
                left_cols: p.cols(),
                right_rows: g.rows(),
                right_cols: g.cols(),
            });
        }
        if !g.is_finite() {
            return Err(HecvlError::NonFinite {
                context: format!("gradient block {i}"),
            });
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hp.beta1.powi(t);
    let bc2 = 1.0 - hp.beta2.powi(t);
    let decay = 1.0 - hp.lr * hp.weight_decay;

    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (((theta, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
            *mi = hp.beta1 * *mi + (1.0 - hp.beta1) * gi;
            *vi = hp.beta2 * *vi + (1.0 - hp.beta2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *theta = *theta * decay - hp.lr * m_hat / (v_hat.sqrt() + hp.eps);
        }
    }
    Ok(())
}
