//! Monte-Carlo checks of the spike-vanishing analysis: binary spike moments,
//! the subthreshold potential variance, the firing-rate bound, and the
//! layer-wise firing sweep over random-init networks.

mod firing;
mod lemma;
mod moments;
mod theorem;

use serde::{Deserialize, Serialize};

pub use firing::{compare_firing, firing_sweep, natural_observation, FiringSweep, InputSource, SweepConfig};
pub use lemma::{predicted_variance, psi, verify_lemma1, weight_variance, LemmaConfig, WeightDraw, MIN_TRIALS};
pub use moments::verify_spike_moments;
pub use theorem::{epsilon_bound, verify_theorem1, verify_theorem1_sweep};

/// Slack for floating-point rounding in otherwise exact comparisons.
pub const FP_SLACK: f64 = 1e-12;

/// One predicted-versus-measured comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryCheck {
    pub label: String,
    pub predicted: f64,
    pub empirical: f64,
    pub standard_error: f64,
    pub pass: bool,
}

impl TheoryCheck {
    /// Passes when `|empirical − predicted| ≤ 3·SE`.
    pub fn two_sided(label: impl Into<String>, predicted: f64, empirical: f64, se: f64) -> Self {
        Self {
            label: label.into(),
            predicted,
            empirical,
            standard_error: se,
            pass: (empirical - predicted).abs() <= 3.0 * se + FP_SLACK,
        }
    }

    /// Passes when `empirical ≤ bound + 3·SE`.
    pub fn upper_bound(label: impl Into<String>, bound: f64, empirical: f64, se: f64) -> Self {
        Self {
            label: label.into(),
            predicted: bound,
            empirical,
            standard_error: se,
            pass: empirical <= bound + 3.0 * se + FP_SLACK,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub name: String,
    /// Every input that determines the result, seed included.
    pub config: serde_json::Value,
    pub checks: Vec<TheoryCheck>,
    pub pass: bool,
}

impl TheoryReport {
    pub fn new(name: impl Into<String>, config: serde_json::Value, checks: Vec<TheoryCheck>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self {
            name: name.into(),
            config,
            checks,
            pass,
        }
    }
}

/// Population mean and variance with the standard error of each.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleMoments {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    /// `sqrt((m₄ − s⁴)/n)`, the large-sample standard error of the variance.
    pub se_variance: f64,
}

pub fn sample_moments(x: &[f64]) -> SampleMoments {
    let n = x.len();
    let (mean, variance) = crate::numerics::mean_var_raw(x);
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n as f64;
    SampleMoments {
        n,
        mean,
        variance,
        se_mean: (variance / n as f64).sqrt(),
        se_variance: ((m4 - variance * variance).max(0.0) / n as f64).sqrt(),
    }
}
