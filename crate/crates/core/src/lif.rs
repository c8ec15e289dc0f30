//! Leaky integrate-and-fire dynamics in discrete time.
//!
//! One step integrates, then spikes, then resets:
//!
//! ```text
//! a  = α·u + (1 − α)·x        α = 1 − 1/τ
//! o  = H(a − V_th)            H(0) = 1
//! u' = V_reset where o = 1, otherwise a
//! ```
//!
//! Training replaces `dH/da` by the arctangent surrogate
//! `2τ / (4 + (π·τ·(a − V_th))²)`, which peaks at 1 for τ = 2 exactly on threshold.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    /// Membrane time constant, ≥ 1.
    pub tau: f64,
    pub v_th: f64,
    pub v_reset: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            tau: 2.0,
            v_th: 1.0,
            v_reset: 0.0,
        }
    }
}

impl LifParams {
    pub fn new(tau: f64, v_th: f64, v_reset: f64) -> Result<Self> {
        let p = Self { tau, v_th, v_reset };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau >= 1.0) {
            return Err(Error::invalid(format!("tau must be >= 1, got {}", self.tau)));
        }
        if !(self.v_th.is_finite() && self.v_reset.is_finite() && self.v_th > self.v_reset) {
            return Err(Error::invalid(format!(
                "need v_th > v_reset, got v_th={} v_reset={}",
                self.v_th, self.v_reset
            )));
        }
        Ok(())
    }

    /// Per-step retention of membrane potential.
    pub fn alpha(&self) -> f64 {
        1.0 - 1.0 / self.tau
    }

    /// Surrogate derivative of the spike with respect to the potential `u`.
    #[inline]
    pub fn surrogate(&self, u: f64) -> f64 {
        let z = PI * self.tau * (u - self.v_th);
        2.0 * self.tau / (4.0 + z * z)
    }

    /// Smooth spike whose derivative is exactly [`LifParams::surrogate`].
    #[inline]
    pub fn smooth_spike(&self, u: f64) -> f64 {
        0.5 + (0.5 * PI * self.tau * (u - self.v_th)).atan() / PI
    }
}

/// Membrane potentials and spikes of one layer after a step.
#[derive(Clone, Debug, PartialEq)]
pub struct LifLayerState {
    pub u: Tensor,
    pub o: Tensor,
}

impl LifLayerState {
    /// All potentials at `v_reset`, no spikes.
    pub fn resting(shape: &[usize], params: &LifParams) -> Self {
        Self {
            u: Tensor::full(shape, params.v_reset),
            o: Tensor::zeros(shape),
        }
    }
}

/// Raw step over slices. `pre` receives the pre-reset potential, `spikes` the
/// Heaviside output; `u` is updated in place.
#[inline]
pub(crate) fn step_raw(u: &mut [f64], drive: &[f64], params: &LifParams, pre: &mut [f64], spikes: &mut [f64]) {
    let alpha = params.alpha();
    let gain = 1.0 - alpha;
    for i in 0..u.len() {
        let a = alpha * u[i] + gain * drive[i];
        pre[i] = a;
        if a >= params.v_th {
            spikes[i] = 1.0;
            u[i] = params.v_reset;
        } else {
            spikes[i] = 0.0;
            u[i] = a;
        }
    }
}

pub fn lif_step(state: &LifLayerState, x: &Tensor, params: &LifParams) -> Result<LifLayerState> {
    if state.u.shape() != x.shape() || state.o.shape() != x.shape() {
        return Err(Error::shape(
            "lif_step",
            format!("state {:?} vs input {:?}", state.u.shape(), x.shape()),
        ));
    }
    let mut u = state.u.data().to_vec();
    let mut pre = vec![0.0; u.len()];
    let mut o = vec![0.0; u.len()];
    step_raw(&mut u, x.data(), params, &mut pre, &mut o);
    Ok(LifLayerState {
        u: Tensor::from_parts(x.shape().to_vec(), u),
        o: Tensor::from_parts(x.shape().to_vec(), o),
    })
}

/// Elementwise `1.0` where `u ≥ v_th`, else `0.0`.
pub fn heaviside_spike(u: &Tensor, v_th: f64) -> Tensor {
    u.map(|v| if v >= v_th { 1.0 } else { 0.0 })
}

pub fn surrogate_grad(u: &Tensor, params: &LifParams) -> Tensor {
    u.map(|v| params.surrogate(v))
}
