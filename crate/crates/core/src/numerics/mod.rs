//! Dense `f64` kernels with explicit adjoints. Everything the network needs
//! (convolution, weighted sums, layer statistics) lives here; there is no
//! autodiff graph.

mod conv;
mod linear;
mod stats;
mod tensor;

pub use conv::{conv2d_backward, conv2d_forward, ConvSpec};
pub use linear::{linear_backward, linear_forward};
pub use stats::mean_and_variance;
pub use tensor::Tensor;

pub(crate) use conv::ConvGeometry;
pub(crate) use linear::{
    forward_raw as linear_forward_raw, grad_input_raw as linear_grad_input_raw,
    grad_weights_raw as linear_grad_weights_raw,
};
pub(crate) use stats::mean_var_raw;
