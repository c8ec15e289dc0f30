//! Spiking deep Q networks trained directly with surrogate gradients, with
//! potential-based layer normalization (pbLN) against spike vanishing.

pub mod cli;
pub mod envs;
pub mod error;
pub mod learn;
pub mod lif;
pub mod numerics;
pub mod pbln;
pub mod qnet;
pub mod rl;
pub mod theory;

pub use error::{Error, Result};
