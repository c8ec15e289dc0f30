//! Backpropagation through space and time over a recorded forward window.
//!
//! Per layer and step, with `a` the pre-reset potential and `s` the emitted spike:
//!
//! ```text
//! ∂L/∂a_t = ∂L/∂s_t · σ'(a_t) + ∂L/∂u_t · (1 − H(a_t − V_th))
//! ∂L/∂u_{t−1} = α · ∂L/∂a_t          (recurrence through the leak)
//! ∂L/∂y_t     = (1 − α) · ∂L/∂a_t    (into pbLN, then the synapses)
//! ```
//!
//! The reset is detached: a neuron that fired passes no gradient back through
//! its stored potential. A spike at step `t` only feeds the layer above at the
//! same step, so the sweep runs backwards in time and, within each step, from
//! the top layer down, keeping one step of spike gradients per layer.

use super::ParamGrads;
use crate::error::{Error, Result};
use crate::numerics::{linear_grad_input_raw, linear_grad_weights_raw};
use crate::pbln::backward_raw as pbln_backward_raw;
use crate::qnet::{build_synapses, layer_norms, Architecture, ForwardTrace, NetworkParams, Synapse};

fn check(trace: &ForwardTrace, grad_q: &[f64], params: &NetworkParams, arch: &Architecture) -> Result<()> {
    params.check(arch)?;
    let mismatch = |d: String| Err(Error::shape("bptt", d));
    if grad_q.len() != arch.n_actions {
        return mismatch(format!("{} Q-gradients for {} actions", grad_q.len(), arch.n_actions));
    }
    if trace.time_window != arch.time_window || trace.layers.len() != arch.conv_specs.len() + 1 {
        return mismatch("trace was not produced by this architecture".to_string());
    }
    if trace.frames.shape() != arch.input_shape {
        return mismatch(format!("trace frames {:?}", trace.frames.shape()));
    }
    let shapes = arch.conv_output_shapes()?;
    for (l, layer) in trace.layers.iter().enumerate() {
        let want: Vec<usize> = match shapes.get(l) {
            Some(s) => s.to_vec(),
            None => vec![arch.fc_width],
        };
        if layer.shape != want || layer.potential.len() != arch.time_window || layer.spikes.len() != arch.time_window {
            return mismatch(format!("layer `{}` trace inconsistent with architecture", layer.name));
        }
        let normed = layer_norms(params)[l].is_some();
        let need = if !normed {
            0
        } else if layer.static_input {
            1
        } else {
            arch.time_window
        };
        if layer.norm.len() != need {
            return mismatch(format!(
                "layer `{}` carries {} pbLN caches, expected {need}",
                layer.name,
                layer.norm.len()
            ));
        }
    }
    Ok(())
}

/// Gradients of a scalar loss with respect to every parameter, given
/// `grad_q = ∂L/∂q` for the Q-values this trace produced.
pub fn bptt(trace: &ForwardTrace, grad_q: &[f64], params: &NetworkParams, arch: &Architecture) -> Result<ParamGrads> {
    let mut grads = ParamGrads::zeros_like(params);
    bptt_accumulate(trace, grad_q, params, arch, &mut grads)?;
    Ok(grads)
}

/// Synaptic weight gradients and, when normalized, `(λ, β)` gradients.
type LayerGrads<'a> = (&'a mut [f64], Option<(&'a mut [f64], &'a mut [f64])>);

/// Gradient buffers of layer `l`.
fn layer_grads(grads: &mut ParamGrads, l: usize) -> LayerGrads<'_> {
    if l < grads.conv_kernels.len() {
        let norm = grads.conv_lambda[l].as_mut().zip(grads.conv_beta[l].as_mut());
        (
            grads.conv_kernels[l].data_mut(),
            norm.map(|(a, b)| (a.data_mut(), b.data_mut())),
        )
    } else {
        let norm = grads.fc_lambda.as_mut().zip(grads.fc_beta.as_mut());
        (
            grads.fc_weights.data_mut(),
            norm.map(|(a, b)| (a.data_mut(), b.data_mut())),
        )
    }
}

/// As [`bptt`], adding into an existing gradient buffer.
pub fn bptt_accumulate(
    trace: &ForwardTrace,
    grad_q: &[f64],
    params: &NetworkParams,
    arch: &Architecture,
    grads: &mut ParamGrads,
) -> Result<()> {
    check(trace, grad_q, params, arch)?;
    let lif = arch.lif;
    let alpha = lif.alpha();
    let gain = 1.0 - alpha;
    let steps = arch.time_window;
    let n_layers = trace.layers.len();
    let top = n_layers - 1;
    let (synapses, _) = build_synapses(params, arch)?;
    let norms = layer_norms(params);
    let sizes: Vec<usize> = trace.layers.iter().map(|l| l.neurons()).collect();
    let widest = sizes.iter().copied().max().unwrap_or(0);

    // q = (1/T) Σ_t W·s_t
    let gq: Vec<f64> = grad_q.iter().map(|g| g / steps as f64).collect();
    for s in &trace.layers[top].spikes {
        linear_grad_weights_raw(s, &gq, grads.readout_weights.data_mut());
    }
    let mut from_readout = vec![0.0; sizes[top]];
    linear_grad_input_raw(params.readout_weights.data(), &gq, &mut from_readout);

    // ∂L/∂s of each layer at the current step, and ∂L/∂u carried back from t + 1.
    let mut g_s: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
    let mut g_u: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
    let mut g_y = vec![0.0; widest];
    let mut g_x = vec![0.0; widest];
    let mut g_y_sum: Vec<Vec<f64>> = trace
        .layers
        .iter()
        .map(|l| {
            if l.static_input {
                vec![0.0; l.neurons()]
            } else {
                Vec::new()
            }
        })
        .collect();

    for t in (0..steps).rev() {
        g_s[top].copy_from_slice(&from_readout);
        for l in (0..n_layers).rev() {
            let layer = &trace.layers[l];
            let n = sizes[l];
            let a = &layer.potential[t];
            let (gs, gu, gy) = (&g_s[l], &mut g_u[l], &mut g_y[..n]);
            for i in 0..n {
                let carry = if a[i] >= lif.v_th { 0.0 } else { gu[i] };
                let ga = gs[i] * lif.surrogate(a[i]) + carry;
                gu[i] = alpha * ga;
                gy[i] = gain * ga;
            }
            if layer.static_input {
                for (s, g) in g_y_sum[l].iter_mut().zip(gy.iter()) {
                    *s += g;
                }
                continue;
            }
            let (g_w, g_norm) = layer_grads(grads, l);
            let gx: &[f64] = match (norms[l], g_norm) {
                (Some(p), Some((gl, gb))) => {
                    let c = &layer.norm[t];
                    pbln_backward_raw(gy, &c.x_hat, c.inv_std, p.lambda.data(), &mut g_x[..n], gl, gb);
                    &g_x[..n]
                }
                _ => gy,
            };
            let input = &trace.layers[l - 1].spikes[t];
            let g_in = &mut g_s[l - 1];
            g_in.fill(0.0);
            match &synapses[l] {
                Synapse::Conv(geom, k) => {
                    geom.grad_kernels(input, gx, g_w);
                    geom.grad_input(k, gx, g_in);
                }
                Synapse::Dense { weights, .. } => {
                    linear_grad_weights_raw(input, gx, g_w);
                    linear_grad_input_raw(weights, gx, g_in);
                }
            }
        }
    }

    // Layers driven by the frames see one PSP for the whole window.
    for (l, layer) in trace.layers.iter().enumerate().filter(|(_, l)| l.static_input) {
        let n = sizes[l];
        let (g_w, g_norm) = layer_grads(grads, l);
        let gx: &[f64] = match (norms[l], g_norm) {
            (Some(p), Some((gl, gb))) => {
                let c = &layer.norm[0];
                pbln_backward_raw(&g_y_sum[l], &c.x_hat, c.inv_std, p.lambda.data(), &mut g_x[..n], gl, gb);
                &g_x[..n]
            }
            _ => &g_y_sum[l],
        };
        match &synapses[l] {
            Synapse::Conv(geom, _) => geom.grad_kernels(trace.frames.data(), gx, g_w),
            Synapse::Dense { .. } => linear_grad_weights_raw(trace.frames.data(), gx, g_w),
        }
    }
    Ok(())
}
