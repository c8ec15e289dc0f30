use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{sample_moments, TheoryCheck, TheoryReport};
use crate::error::{Error, Result};

/// Samples `trials` Bernoulli(`p`) spikes and checks `E[o²] = E[o] = p` and
/// `D(o) = E(o)(1 − E(o)) = p(1 − p)`.
pub fn verify_spike_moments(p: f64, trials: usize, seed: u64) -> Result<TheoryReport> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("p must lie in [0, 1], got {p}")));
    }
    if trials < 2 {
        return Err(Error::invalid("need at least two trials"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let o: Vec<f64> = (0..trials).map(|_| if rng.gen_bool(p) { 1.0 } else { 0.0 }).collect();
    let sq: Vec<f64> = o.iter().map(|v| v * v).collect();
    let m = sample_moments(&o);
    let m2 = sample_moments(&sq);
    let checks = vec![
        TheoryCheck::two_sided("E[o]", p, m.mean, m.se_mean),
        TheoryCheck::two_sided("E[o^2]", p, m2.mean, m2.se_mean),
        TheoryCheck::two_sided("E[o^2] - E[o]", 0.0, m2.mean - m.mean, 0.0),
        TheoryCheck::two_sided("D(o)", p * (1.0 - p), m.variance, m.se_variance),
        TheoryCheck::two_sided("D(o) - E(o)(1-E(o))", 0.0, m.variance - m.mean * (1.0 - m.mean), 0.0),
    ];
    Ok(TheoryReport::new(
        "spike-moments",
        json!({ "p": p, "trials": trials, "seed": seed }),
        checks,
    ))
}
