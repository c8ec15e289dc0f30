//! DQN harness: replay, ε-greedy acting, target sync, training and evaluation.

mod eval;
mod metrics;
mod policy;
mod replay;
mod train;

pub use eval::{evaluate, evaluate_policy, EvalResult};
pub use metrics::{metrics_csv, EvalPoint, MetricsRow, RunSummary, FIRING_COLUMNS, METRICS_VERSION};
pub use policy::{epsilon_greedy, EpsilonSchedule};
pub use replay::{ReplayBuffer, Transition};
pub use train::{train, TrainConfig, TrainOutcome, Trainer};
