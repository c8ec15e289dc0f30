use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Argmax with probability `1 − ε` (lowest index on ties), otherwise a
/// uniformly random action. Exactly one uniform draw is consumed per call,
/// plus one more for the random action.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &Tensor, epsilon: f64, rng: &mut R) -> Result<usize> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    let u: f64 = rng.gen();
    if u < epsilon {
        Ok(rng.gen_range(0..q.len()))
    } else {
        Ok(q.argmax())
    }
}

/// Linear decay from `start` to `end` over `decay_frames`, constant afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_frames: usize,
}

impl EpsilonSchedule {
    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.start) || !unit.contains(&self.end) || self.end > self.start {
            return Err(Error::invalid(format!(
                "epsilon schedule needs 0 ≤ end ≤ start ≤ 1, got {} → {}",
                self.start, self.end
            )));
        }
        Ok(())
    }

    pub fn value(&self, frame: usize) -> f64 {
        if frame >= self.decay_frames {
            return self.end;
        }
        let f = frame as f64 / self.decay_frames as f64;
        (self.start + (self.end - self.start) * f).max(self.end)
    }
}
