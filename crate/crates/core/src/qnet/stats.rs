use serde::{Deserialize, Serialize};

use super::ForwardTrace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerFiring {
    pub name: String,
    pub neurons: usize,
    /// Fraction of neurons with at least one spike in the window.
    pub active_fraction: f64,
    /// Spikes per neuron per step.
    pub mean_rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FiringStats {
    pub layers: Vec<LayerFiring>,
}

impl FiringStats {
    pub fn fraction(&self, name: &str) -> Option<f64> {
        self.layers.iter().find(|l| l.name == name).map(|l| l.active_fraction)
    }
}

/// A neuron counts as having fired at step `t` when its pre-reset potential
/// reached threshold, which is also what the Heaviside output reports.
pub fn firing_stats(trace: &ForwardTrace) -> FiringStats {
    let v_th = trace.lif.v_th;
    let layers = trace
        .layers
        .iter()
        .map(|layer| {
            let n = layer.neurons();
            let mut active = vec![false; n];
            let mut spikes = 0usize;
            for pot in &layer.potential {
                for (i, &a) in pot.iter().enumerate() {
                    if a >= v_th {
                        active[i] = true;
                        spikes += 1;
                    }
                }
            }
            let steps = layer.potential.len().max(1);
            LayerFiring {
                name: layer.name.clone(),
                neurons: n,
                active_fraction: active.iter().filter(|&&a| a).count() as f64 / n as f64,
                mean_rate: spikes as f64 / (n * steps) as f64,
            }
        })
        .collect();
    FiringStats { layers }
}
