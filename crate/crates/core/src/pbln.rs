//! Potential-based layer normalization.
//!
//! The postsynaptic potential of a layer at one time step is standardized over
//! all of its `C·H·W` elements, then mapped back into the neuron's operating
//! range with a per-channel scale and shift:
//!
//! ```text
//! x̂ = (x − mean) / sqrt(var + ε)
//! y[c] = λ[c]·x̂[c] + β[c]           λ₀ = V_th − V_reset,  β₀ = V_reset
//! u' = α·u + (1 − α)·y
//! ```
//!
//! Statistics are per sample and per step. There is no batch axis and no
//! running average, so a single observation is normalized on its own.

use crate::error::{Error, Result};
use crate::lif::{lif_step, LifLayerState, LifParams};
use crate::numerics::{mean_var_raw, Tensor};

pub const DEFAULT_EPSILON: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct PbLnParams {
    /// Scale, one entry per channel.
    pub lambda: Tensor,
    /// Shift, one entry per channel.
    pub beta: Tensor,
    pub epsilon: f64,
}

impl PbLnParams {
    pub fn channels(&self) -> usize {
        self.lambda.len()
    }
}

/// Values retained by [`pbln_forward`] for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct PbLnCache {
    pub shape: Vec<usize>,
    pub mean: f64,
    pub variance: f64,
    pub inv_std: f64,
    pub x_hat: Vec<f64>,
}

pub fn pbln_init(lif: &LifParams, channels: usize) -> Result<PbLnParams> {
    if channels == 0 {
        return Err(Error::invalid("pbLN needs at least one channel"));
    }
    lif.validate()?;
    Ok(PbLnParams {
        lambda: Tensor::full(&[channels], lif.v_th - lif.v_reset),
        beta: Tensor::full(&[channels], lif.v_reset),
        epsilon: DEFAULT_EPSILON,
    })
}

/// Normalizes `x` (channel-major, `lambda.len()` equal groups). Returns
/// `(mean, variance, 1/sqrt(variance + eps))`.
pub(crate) fn normalize_raw(
    x: &[f64],
    lambda: &[f64],
    beta: &[f64],
    eps: f64,
    x_hat: &mut [f64],
    y: &mut [f64],
) -> (f64, f64, f64) {
    let (mean, var) = mean_var_raw(x);
    let inv_std = 1.0 / (var + eps).sqrt();
    let group = x.len() / lambda.len();
    for (c, (&l, &b)) in lambda.iter().zip(beta).enumerate() {
        let r = c * group..(c + 1) * group;
        for ((xh, yy), &xv) in x_hat[r.clone()].iter_mut().zip(&mut y[r.clone()]).zip(&x[r]) {
            *xh = (xv - mean) * inv_std;
            *yy = l * *xh + b;
        }
    }
    (mean, var, inv_std)
}

/// Overwrites `grad_x`; accumulates into `grad_lambda` / `grad_beta`.
pub(crate) fn backward_raw(
    grad_y: &[f64],
    x_hat: &[f64],
    inv_std: f64,
    lambda: &[f64],
    grad_x: &mut [f64],
    grad_lambda: &mut [f64],
    grad_beta: &mut [f64],
) {
    let n = grad_y.len();
    let group = n / lambda.len();
    let mut sum_g = 0.0;
    let mut sum_gx = 0.0;
    for c in 0..lambda.len() {
        let mut gl = 0.0;
        let mut gb = 0.0;
        for i in c * group..(c + 1) * group {
            let gy = grad_y[i];
            gl += gy * x_hat[i];
            gb += gy;
            let gh = lambda[c] * gy;
            grad_x[i] = gh;
            sum_g += gh;
            sum_gx += gh * x_hat[i];
        }
        grad_lambda[c] += gl;
        grad_beta[c] += gb;
    }
    let m1 = sum_g / n as f64;
    let m2 = sum_gx / n as f64;
    for (gx, &xh) in grad_x.iter_mut().zip(x_hat) {
        *gx = inv_std * (*gx - m1 - xh * m2);
    }
}

fn check_channels(x: &Tensor, p: &PbLnParams) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Empty("pbln_forward"));
    }
    if x.shape()[0] != p.channels() || p.beta.len() != p.channels() {
        return Err(Error::shape(
            "pbln",
            format!(
                "input {:?} has {} channels, parameters have {} / {}",
                x.shape(),
                x.shape()[0],
                p.lambda.len(),
                p.beta.len()
            ),
        ));
    }
    Ok(())
}

pub fn pbln_forward(x: &Tensor, p: &PbLnParams) -> Result<(Tensor, PbLnCache)> {
    check_channels(x, p)?;
    let mut x_hat = vec![0.0; x.len()];
    let mut y = vec![0.0; x.len()];
    let (mean, variance, inv_std) =
        normalize_raw(x.data(), p.lambda.data(), p.beta.data(), p.epsilon, &mut x_hat, &mut y);
    Ok((
        Tensor::from_parts(x.shape().to_vec(), y),
        PbLnCache {
            shape: x.shape().to_vec(),
            mean,
            variance,
            inv_std,
            x_hat,
        },
    ))
}

/// Gradients of the normalization-plus-affine map: `(grad_x, grad_lambda, grad_beta)`.
pub fn pbln_backward(grad_y: &Tensor, cache: &PbLnCache, p: &PbLnParams) -> Result<(Tensor, Tensor, Tensor)> {
    if grad_y.shape() != cache.shape.as_slice() || cache.x_hat.len() != grad_y.len() {
        return Err(Error::shape(
            "pbln_backward",
            format!(
                "grad {:?} does not match cached forward {:?}",
                grad_y.shape(),
                cache.shape
            ),
        ));
    }
    if cache.shape[0] != p.channels() {
        return Err(Error::shape(
            "pbln_backward",
            format!("cache has {} channels, parameters {}", cache.shape[0], p.channels()),
        ));
    }
    let c = p.channels();
    let mut gx = vec![0.0; grad_y.len()];
    let mut gl = vec![0.0; c];
    let mut gb = vec![0.0; c];
    backward_raw(
        grad_y.data(),
        &cache.x_hat,
        cache.inv_std,
        p.lambda.data(),
        &mut gx,
        &mut gl,
        &mut gb,
    );
    Ok((
        Tensor::from_parts(cache.shape.clone(), gx),
        Tensor::from_parts(vec![c], gl),
        Tensor::from_parts(vec![c], gb),
    ))
}

/// One LIF step driven by the normalized potential instead of the raw one.
pub fn pbln_lif_step(state: &LifLayerState, x: &Tensor, lif: &LifParams, p: &PbLnParams) -> Result<LifLayerState> {
    let (y, _) = pbln_forward(x, p)?;
    lif_step(state, &y, lif)
}
