//! Desk-scale pixel environments and frame stacking.

mod catch;
mod gridview;
mod preprocess;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub use catch::{Catch, CatchSpec, CatchState};
pub use gridview::{GridView, GridViewSpec};
pub use preprocess::{preprocess, FrameStack, StackedFrames};

/// Result of one environment transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    /// Frame after the transition, `[1, H, W]` with values in `[0, 1]`.
    pub observation: Tensor,
    pub reward: f64,
    pub terminal: bool,
}

/// Single-agent episodic environment with pixel observations.
pub trait Environment {
    fn n_actions(&self) -> usize;

    /// `[1, H, W]`
    fn frame_shape(&self) -> [usize; 3];

    /// Starts a new episode using the environment's own seeded generator.
    fn reset(&mut self) -> Tensor;

    fn step(&mut self, action: usize) -> Result<Step>;

    fn observe(&self) -> Tensor;

    /// Reseeds the spawn generator; the next `reset` is fully determined by `seed`.
    fn seed(&mut self, seed: u64);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Catch,
    GridView,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Catch => "catch",
            EnvKind::GridView => "gridview",
        }
    }

    pub fn make(self, seed: u64) -> Box<dyn Environment> {
        match self {
            EnvKind::Catch => Box::new(Catch::new(CatchSpec::default(), seed)),
            EnvKind::GridView => Box::new(GridView::new(GridViewSpec::default(), seed)),
        }
    }
}

impl std::str::FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "catch" => Ok(EnvKind::Catch),
            "gridview" => Ok(EnvKind::GridView),
            _ => Err(Error::invalid(format!(
                "unknown environment `{s}` (expected catch or gridview)"
            ))),
        }
    }
}

fn invalid_action(action: usize, n: usize) -> Error {
    Error::invalid(format!("action {action} outside 0..{n}"))
}
