//! Configuration and command dispatch behind the `sdqn` binary.

mod config;
mod run;

pub use config::{
    resolve, Command, EvalSettings, NetPreset, Overrides, PbLnMode, RunConfig, SweepSettings, TheorySettings,
    DEFAULT_OUT_ROOT, OUT_DIR_ENV, RESOLVED_FILE,
};
pub use run::{run, RunStatus, CHECKPOINT_FILE, METRICS_FILE, SUMMARY_FILE};
