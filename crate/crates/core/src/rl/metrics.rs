use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::EvalResult;

pub const METRICS_VERSION: u32 = 1;
pub const FIRING_COLUMNS: [&str; 4] = ["fire_frac_conv1", "fire_frac_conv2", "fire_frac_conv3", "fire_frac_fc"];

/// One row of the training log. Absent values are written as empty fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub frame: usize,
    /// Episodes completed so far.
    pub episode: usize,
    /// Mean return of the episodes completed since the previous row.
    pub episode_return: Option<f64>,
    /// Mean TD loss of the updates since the previous row.
    pub loss: Option<f64>,
    pub epsilon: f64,
    /// Mean active fraction while acting since the previous row, conv1..conv3.
    pub fire_frac_conv: [Option<f64>; 3],
    pub fire_frac_fc: Option<f64>,
}

fn field(out: &mut String, v: Option<f64>) {
    out.push(',');
    if let Some(v) = v {
        write!(out, "{v}").unwrap();
    }
}

/// CSV text with a versioned comment line before the column header.
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = format!("# sdqn-metrics v{METRICS_VERSION}\nframe,episode,return,loss,epsilon");
    for c in FIRING_COLUMNS {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for r in rows {
        write!(out, "{},{}", r.frame, r.episode).unwrap();
        field(&mut out, r.episode_return);
        field(&mut out, r.loss);
        field(&mut out, Some(r.epsilon));
        for f in r.fire_frac_conv {
            field(&mut out, f);
        }
        field(&mut out, r.fire_frac_fc);
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub frame: usize,
    pub result: EvalResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub frames: usize,
    pub episodes: usize,
    pub updates: usize,
    pub target_syncs: usize,
    pub mean_train_return_last_100: Option<f64>,
    pub evals: Vec<EvalPoint>,
    pub final_eval: Option<EvalResult>,
    pub stopped_early: bool,
}
