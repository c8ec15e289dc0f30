use serde::{Deserialize, Serialize};

use super::{Architecture, NetworkParams};
use crate::error::{Error, Result};
use crate::lif::{step_raw, LifParams};
use crate::numerics::{linear_forward_raw, ConvGeometry, Tensor};
use crate::pbln::{normalize_raw, PbLnCache, PbLnParams};

/// What a layer emits downstream after each step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpikeMode {
    /// Binary Heaviside spikes: the network as deployed.
    #[default]
    Heaviside,
    /// The arctangent sigmoid whose derivative is the training surrogate.
    /// Reset still follows the hard threshold. Used to check gradients by
    /// finite differences.
    Smooth,
}

/// Per-layer record of one forward window.
#[derive(Clone, Debug)]
pub struct LayerTrace {
    pub name: String,
    /// Neuron layout, `[C, H, W]` for conv layers and `[N]` for the FC layer.
    pub shape: Vec<usize>,
    /// True when the layer is fed by the frames, so its PSP is the same at every step
    /// and `psp`/`norm` hold a single entry.
    pub static_input: bool,
    /// Postsynaptic potential `x_t` per step.
    pub psp: Vec<Vec<f64>>,
    /// pbLN caches per step (empty when the layer is not normalized).
    pub norm: Vec<PbLnCache>,
    /// Pre-reset potential after integrating step `t`.
    pub potential: Vec<Vec<f64>>,
    /// Emitted spikes after step `t`.
    pub spikes: Vec<Vec<f64>>,
}

impl LayerTrace {
    pub fn neurons(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Everything backpropagation through time needs from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub frames: Tensor,
    pub layers: Vec<LayerTrace>,
    pub q: Tensor,
    pub time_window: usize,
    pub lif: LifParams,
    pub mode: SpikeMode,
}

pub(crate) enum Synapse<'a> {
    Conv(ConvGeometry, &'a [f64]),
    Dense { rows: usize, weights: &'a [f64] },
}

impl Synapse<'_> {
    pub fn apply(&self, input: &[f64], out: &mut [f64]) {
        match self {
            Synapse::Conv(g, k) => g.forward(input, k, out),
            Synapse::Dense { rows, weights } => linear_forward_raw(input, weights, *rows, out),
        }
    }
}

/// Synapses feeding each layer in forward order, plus the neuron shape of each layer.
pub(crate) fn build_synapses<'a>(
    params: &'a NetworkParams,
    arch: &Architecture,
) -> Result<(Vec<Synapse<'a>>, Vec<Vec<usize>>)> {
    let mut syn = Vec::new();
    let mut shapes = Vec::new();
    let mut shape = arch.input_shape;
    for (spec, k) in arch.conv_specs.iter().zip(&params.conv_kernels) {
        let g = ConvGeometry::new(spec, shape)?;
        shape = [g.o, g.oh, g.ow];
        shapes.push(shape.to_vec());
        syn.push(Synapse::Conv(g, k.data()));
    }
    syn.push(Synapse::Dense {
        rows: arch.fc_width,
        weights: params.fc_weights.data(),
    });
    shapes.push(vec![arch.fc_width]);
    Ok((syn, shapes))
}

pub(crate) fn layer_norms(params: &NetworkParams) -> Vec<Option<&PbLnParams>> {
    params
        .conv_pbln
        .iter()
        .map(Option::as_ref)
        .chain(std::iter::once(params.fc_pbln.as_ref()))
        .collect()
}

/// Runs one inference window with binary spikes. See [`forward_with`].
pub fn forward(frames: &Tensor, params: &NetworkParams, arch: &Architecture) -> Result<(Tensor, ForwardTrace)> {
    forward_with(frames, params, arch, SpikeMode::Heaviside)
}

/// Q-values only.
pub fn q_values(frames: &Tensor, params: &NetworkParams, arch: &Architecture) -> Result<Tensor> {
    Simulator::default().q_values(frames, params, arch)
}

/// Simulates `T` steps. Potentials start at `V_reset`; the frames drive the
/// first layer at every step; each later layer integrates the spikes its
/// predecessor emitted in the same step. The Q-values are the time average of
/// the readout applied to the FC spikes.
pub fn forward_with(
    frames: &Tensor,
    params: &NetworkParams,
    arch: &Architecture,
    mode: SpikeMode,
) -> Result<(Tensor, ForwardTrace)> {
    let mut sim = Simulator::default();
    sim.forward_with(frames, params, arch, mode)?;
    let trace = sim.recorded.take().expect("trace recorded above");
    Ok((trace.q.clone(), trace))
}

/// Buffers reused across simulations. Results are identical to [`forward_with`]
/// and [`q_values`]; a simulator only saves reallocating (and re-faulting) the
/// window's potentials and spikes, which otherwise dominates a training update.
#[derive(Clone, Debug, Default)]
pub struct Simulator {
    recorded: Option<ForwardTrace>,
    /// Single-step slots for Q-only runs.
    probe: Option<ForwardTrace>,
    u: Vec<Vec<f64>>,
    drive: Vec<Vec<f64>>,
}

impl Simulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Recorded Heaviside window; the trace is valid until the next call.
    pub fn forward(&mut self, frames: &Tensor, params: &NetworkParams, arch: &Architecture) -> Result<&ForwardTrace> {
        self.forward_with(frames, params, arch, SpikeMode::Heaviside)
    }

    pub fn forward_with(
        &mut self,
        frames: &Tensor,
        params: &NetworkParams,
        arch: &Architecture,
        mode: SpikeMode,
    ) -> Result<&ForwardTrace> {
        simulate(
            frames,
            params,
            arch,
            mode,
            &mut self.recorded,
            &mut self.u,
            &mut self.drive,
            true,
        )?;
        Ok(self.recorded.as_ref().expect("simulate fills the slot"))
    }

    /// Q-values without keeping the window.
    pub fn q_values(&mut self, frames: &Tensor, params: &NetworkParams, arch: &Architecture) -> Result<Tensor> {
        simulate(
            frames,
            params,
            arch,
            SpikeMode::Heaviside,
            &mut self.probe,
            &mut self.u,
            &mut self.drive,
            false,
        )?;
        Ok(self.probe.as_ref().expect("simulate fills the slot").q.clone())
    }
}

fn blank_trace(
    frames: &Tensor,
    arch: &Architecture,
    shapes: &[Vec<usize>],
    norms: &[Option<&PbLnParams>],
    slots: usize,
    mode: SpikeMode,
) -> ForwardTrace {
    let layers = arch
        .layer_names()
        .into_iter()
        .zip(shapes)
        .enumerate()
        .map(|(l, (name, shape))| {
            let n: usize = shape.iter().product();
            let static_input = l == 0;
            let psp_slots = if static_input { 1 } else { slots };
            let cache = || PbLnCache {
                shape: shape.clone(),
                mean: 0.0,
                variance: 0.0,
                inv_std: 0.0,
                x_hat: vec![0.0; n],
            };
            LayerTrace {
                name,
                shape: shape.clone(),
                static_input,
                psp: vec![vec![0.0; n]; psp_slots],
                norm: if norms[l].is_some() {
                    (0..psp_slots).map(|_| cache()).collect()
                } else {
                    Vec::new()
                },
                potential: vec![vec![0.0; n]; slots],
                spikes: vec![vec![0.0; n]; slots],
            }
        })
        .collect();
    ForwardTrace {
        frames: frames.clone(),
        layers,
        q: Tensor::zeros(&[arch.n_actions]),
        time_window: arch.time_window,
        lif: arch.lif,
        mode,
    }
}

fn fits(
    trace: &ForwardTrace,
    arch: &Architecture,
    shapes: &[Vec<usize>],
    norms: &[Option<&PbLnParams>],
    slots: usize,
) -> bool {
    trace.layers.len() == shapes.len()
        && trace.q.len() == arch.n_actions
        && trace.frames.shape() == arch.input_shape
        && trace
            .layers
            .iter()
            .zip(shapes)
            .zip(norms)
            .all(|((layer, shape), norm)| {
                let psp_slots = if layer.static_input { 1 } else { slots };
                layer.shape == *shape
                    && layer.potential.len() == slots
                    && layer.psp.len() == psp_slots
                    && layer.norm.len() == if norm.is_some() { psp_slots } else { 0 }
            })
}

fn normalize_into(x: &[f64], p: &PbLnParams, cache: &mut PbLnCache, y: &mut [f64]) {
    let (mean, variance, inv_std) = normalize_raw(x, p.lambda.data(), p.beta.data(), p.epsilon, &mut cache.x_hat, y);
    cache.mean = mean;
    cache.variance = variance;
    cache.inv_std = inv_std;
}

/// One window into `slot`. With `record` every step keeps its own potentials
/// and spikes; otherwise all steps share one slot and only `q` is meaningful.
#[allow(clippy::too_many_arguments)]
fn simulate(
    frames: &Tensor,
    params: &NetworkParams,
    arch: &Architecture,
    mode: SpikeMode,
    slot: &mut Option<ForwardTrace>,
    u: &mut Vec<Vec<f64>>,
    drive: &mut Vec<Vec<f64>>,
    record: bool,
) -> Result<()> {
    arch.validate()?;
    params.check(arch)?;
    if frames.shape() != arch.input_shape {
        return Err(Error::shape(
            "forward",
            format!(
                "frames {:?}, architecture expects {:?}",
                frames.shape(),
                arch.input_shape
            ),
        ));
    }
    let (synapses, shapes) = build_synapses(params, arch)?;
    let norms = layer_norms(params);
    let lif = arch.lif;
    let steps = arch.time_window;
    let slots = if record { steps } else { 1 };
    let n_layers = synapses.len();

    if !slot.as_ref().is_some_and(|t| fits(t, arch, &shapes, &norms, slots)) {
        *slot = Some(blank_trace(frames, arch, &shapes, &norms, slots, mode));
    }
    let trace = slot.as_mut().expect("slot filled above");
    trace.frames.data_mut().copy_from_slice(frames.data());
    trace.time_window = steps;
    trace.lif = lif;
    trace.mode = mode;
    u.resize_with(n_layers, Vec::new);
    drive.resize_with(n_layers, Vec::new);
    for (l, s) in shapes.iter().enumerate() {
        let n = s.iter().product();
        u[l].clear();
        u[l].resize(n, lif.v_reset);
        drive[l].resize(n, 0.0);
    }

    let layers = &mut trace.layers;
    synapses[0].apply(frames.data(), &mut layers[0].psp[0]);
    match norms[0] {
        Some(p) => {
            let l0 = &mut layers[0];
            normalize_into(&l0.psp[0], p, &mut l0.norm[0], &mut drive[0]);
        }
        None => drive[0].copy_from_slice(&layers[0].psp[0]),
    }

    let n_actions = arch.n_actions;
    let readout = params.readout_weights.data();
    let mut q = vec![0.0; n_actions];
    let mut row = vec![0.0; n_actions];

    for t in 0..steps {
        let k = if record { t } else { 0 };
        for l in 0..n_layers {
            let (prev, cur) = layers.split_at_mut(l);
            let cur = &mut cur[0];
            if l > 0 {
                synapses[l].apply(&prev[l - 1].spikes[k], &mut cur.psp[k]);
                match norms[l] {
                    Some(p) => normalize_into(&cur.psp[k], p, &mut cur.norm[k], &mut drive[l]),
                    None => drive[l].copy_from_slice(&cur.psp[k]),
                }
            }
            let (a, s) = (&mut cur.potential[k], &mut cur.spikes[k]);
            step_raw(&mut u[l], &drive[l], &lif, a, s);
            if mode == SpikeMode::Smooth {
                for (si, &ai) in s.iter_mut().zip(a.iter()) {
                    *si = lif.smooth_spike(ai);
                }
            }
        }
        linear_forward_raw(&layers[n_layers - 1].spikes[k], readout, n_actions, &mut row);
        for (qi, r) in q.iter_mut().zip(&row) {
            *qi += r;
        }
    }
    for qi in &mut q {
        *qi /= steps as f64;
    }
    if !q.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("forward produced non-finite Q-values"));
    }
    trace.q.data_mut().copy_from_slice(&q);
    Ok(())
}
