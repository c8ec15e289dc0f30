use serde::{Deserialize, Serialize};

use super::ParamGrads;
use crate::error::{Error, Result};
use crate::qnet::NetworkParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global-norm clip applied before the moment update; `None` disables it.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(10.0),
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr >= 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.clip_norm.is_none_or(|c| c > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid Adam configuration {self:?}")))
        }
    }
}

/// First and second moments per parameter tensor, in canonical tensor order.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &NetworkParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.named_tensors().iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamReport {
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    pub clipped: bool,
}

/// One bias-corrected Adam update, in place. Non-finite gradients are rejected
/// before anything is modified.
pub fn adam_step(
    params: &mut NetworkParams,
    grads: &ParamGrads,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<AdamReport> {
    cfg.validate()?;
    let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
    let g = grads.tensors();
    let shapes_ok = g.len() == names.len()
        && state.m.len() == names.len()
        && state.v.len() == names.len()
        && params
            .named_tensors()
            .iter()
            .zip(&g)
            .zip(&state.m)
            .all(|(((_, p), g), m)| p.shape() == g.shape() && m.len() == p.len());
    if !shapes_ok {
        return Err(Error::shape("adam_step", "parameters, gradients and moments disagree"));
    }
    for (name, t) in names.iter().zip(&g) {
        if let Some((i, &v)) = t.data().iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                tensor: name.clone(),
                index: i,
                value: v,
            });
        }
    }
    let grad_norm = grads.global_norm();
    let scale = match cfg.clip_norm {
        Some(c) if grad_norm > c => c / grad_norm,
        _ => 1.0,
    };

    state.step += 1;
    let step = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(step);
    let bc2 = 1.0 - cfg.beta2.powi(step);
    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(g)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for (((w, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            let gi = gi * scale;
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            let update = cfg.lr * (*mi / bc1) / ((*vi / bc2).sqrt() + cfg.eps);
            if update != 0.0 {
                *w -= update;
            }
        }
    }
    Ok(AdamReport {
        grad_norm,
        clipped: scale < 1.0,
    })
}
