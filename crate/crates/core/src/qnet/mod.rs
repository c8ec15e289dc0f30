//! The spiking deep Q network: conv layers with pbLN, a spiking FC layer and
//! a time-averaged linear readout of the FC spikes.

mod arch;
pub mod checkpoint;
mod forward;
mod params;
mod stats;

pub use arch::{Architecture, PbLnPlacement};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use forward::{forward, forward_with, q_values, ForwardTrace, LayerTrace, Simulator, SpikeMode};
pub use params::{init_bound, init_params, NetworkParams};
pub use stats::{firing_stats, FiringStats, LayerFiring};

pub(crate) use forward::{build_synapses, layer_norms, Synapse};
