//! TD loss, surrogate-gradient backpropagation through time, and Adam.

mod adam;
mod bptt;
mod grads;
mod td;

pub use adam::{adam_step, AdamConfig, AdamReport, AdamState};
pub use bptt::{bptt, bptt_accumulate};
pub use grads::ParamGrads;
pub use td::{td_gradients, td_loss, td_target, TdLoss};
