use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sample_moments, TheoryCheck, TheoryReport};
use crate::error::{Error, Result};

/// Fewest trials a verification may use.
pub const MIN_TRIALS: usize = 10_000;

/// How synaptic weights are drawn within one simulated trial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightDraw {
    /// A fresh weight at every step, so the per-step drives are uncorrelated
    /// and the variance is exactly the sum of the per-step terms.
    #[default]
    PerStep,
    /// One weight per synapse for the whole trial. The drives then share `W`
    /// and the cross terms `2·c_i·c_j·p²·D(W)` add to the variance.
    PerTrial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaConfig {
    pub tau: f64,
    /// Weights are `U(−k, k)`.
    pub k: f64,
    /// Bernoulli rate of each input spike.
    pub p: f64,
    /// The potential `u_{t+1}` is measured after integrating inputs `0..=t`.
    pub t: usize,
    pub trials: usize,
    /// Synapses per neuron. Values above 1 scale the prediction linearly and
    /// go beyond the scalar derivation.
    pub fan_in: usize,
    pub weights: WeightDraw,
    pub seed: u64,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self {
            tau: 2.0,
            k: 1.0,
            p: 0.5,
            t: 3,
            trials: 100_000,
            fan_in: 1,
            weights: WeightDraw::PerStep,
            seed: 0,
        }
    }
}

impl LemmaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau >= 1.0) {
            return Err(Error::invalid(format!("tau must be >= 1, got {}", self.tau)));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::invalid(format!("k must be positive, got {}", self.k)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::invalid(format!("p must lie in [0, 1], got {}", self.p)));
        }
        if self.trials < MIN_TRIALS {
            return Err(Error::invalid(format!(
                "need at least {MIN_TRIALS} trials, got {}",
                self.trials
            )));
        }
        if self.fan_in == 0 {
            return Err(Error::invalid("need at least one synapse"));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        1.0 - 1.0 / self.tau
    }
}

/// `D(W) = k²/3` for `W ~ U(−k, k)`.
pub fn weight_variance(k: f64) -> f64 {
    k * k / 3.0
}

/// `ψ(i, j) = (1 − α)²·α^{2(j − i)}`
pub fn psi(alpha: f64, i: usize, j: usize) -> f64 {
    (1.0 - alpha).powi(2) * alpha.powi(2 * (j - i) as i32)
}

/// `fan_in · D(W) · Σ_{i=0..t} ψ(i, t)·p`
pub fn predicted_variance(cfg: &LemmaConfig) -> f64 {
    let a = cfg.alpha();
    let s: f64 = (0..=cfg.t).map(|i| psi(a, i, cfg.t) * cfg.p).sum();
    cfg.fan_in as f64 * weight_variance(cfg.k) * s
}

/// Exact variance when each synapse keeps one weight for the whole trial.
fn shared_weight_variance(cfg: &LemmaConfig) -> f64 {
    let a = cfg.alpha();
    let c: Vec<f64> = (0..=cfg.t).map(|i| (1.0 - a) * a.powi((cfg.t - i) as i32)).collect();
    let mut s = 0.0;
    for (i, ci) in c.iter().enumerate() {
        for (j, cj) in c.iter().enumerate() {
            s += ci * cj * if i == j { cfg.p } else { cfg.p * cfg.p };
        }
    }
    cfg.fan_in as f64 * weight_variance(cfg.k) * s
}

/// Draws `trials` subthreshold potentials `u_{t+1}` (no threshold, no reset,
/// `u_0 = 0`). Trials are generated sequentially from one seeded stream.
pub(crate) fn simulate(cfg: &LemmaConfig, threshold: Option<f64>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dist = Uniform::new_inclusive(-cfg.k, cfg.k);
    let a = cfg.alpha();
    let mut shared = vec![0.0; cfg.fan_in];
    let mut potentials = Vec::with_capacity(cfg.trials);
    let mut fired = Vec::with_capacity(cfg.trials);
    let mut inputs = Vec::with_capacity(cfg.trials);
    for _ in 0..cfg.trials {
        if cfg.weights == WeightDraw::PerTrial {
            for w in shared.iter_mut() {
                *w = dist.sample(&mut rng);
            }
        }
        let mut u = 0.0;
        let mut n_in = 0.0;
        let mut last = 0.0;
        for _ in 0..=cfg.t {
            let mut x = 0.0;
            for w_shared in &shared {
                let w = match cfg.weights {
                    WeightDraw::PerStep => dist.sample(&mut rng),
                    WeightDraw::PerTrial => *w_shared,
                };
                if rng.gen_bool(cfg.p) {
                    x += w;
                    n_in += 1.0;
                }
            }
            u = a * u + (1.0 - a) * x;
            last = 0.0;
            if let Some(v_th) = threshold {
                if u >= v_th {
                    last = 1.0;
                    u = 0.0;
                }
            }
        }
        potentials.push(u);
        fired.push(last);
        inputs.push(n_in);
    }
    (potentials, fired, inputs)
}

/// Compares the empirical variance of the subthreshold potential with the
/// closed form `D(u_{t+1}) = D(W)·Σ_i ψ(i, t)·E[o_i]`.
pub fn verify_lemma1(cfg: &LemmaConfig) -> Result<TheoryReport> {
    cfg.validate()?;
    let (u, _, _) = simulate(cfg, None);
    let m = sample_moments(&u);
    let predicted = predicted_variance(cfg);
    let mut checks = vec![
        TheoryCheck::two_sided(format!("D(u_{})", cfg.t + 1), predicted, m.variance, m.se_variance),
        TheoryCheck::two_sided(format!("E(u_{})", cfg.t + 1), 0.0, m.mean, m.se_mean),
    ];
    if cfg.weights == WeightDraw::PerTrial {
        checks.push(TheoryCheck::two_sided(
            format!("D(u_{}) with shared weights", cfg.t + 1),
            shared_weight_variance(cfg),
            m.variance,
            m.se_variance,
        ));
    }
    let mut config = serde_json::to_value(cfg)?;
    config["extrapolation"] = serde_json::Value::Bool(cfg.fan_in > 1);
    Ok(TheoryReport::new("lemma-potential-variance", config, checks))
}
