use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{TheoryCheck, TheoryReport};
use crate::envs::{EnvKind, FrameStack};
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::qnet::{firing_stats, forward, init_params, Architecture};

/// Where the observations fed to the random-init networks come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum InputSource {
    /// Stacked frames from uniformly random play.
    Env(EnvKind),
    /// Smooth random images with dense intensities.
    Natural,
    Zeros,
}

impl InputSource {
    pub fn name(self) -> &'static str {
        match self {
            InputSource::Env(k) => k.name(),
            InputSource::Natural => "natural",
            InputSource::Zeros => "zeros",
        }
    }
}

impl From<InputSource> for String {
    fn from(s: InputSource) -> String {
        s.name().to_string()
    }
}

impl TryFrom<String> for InputSource {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl std::str::FromStr for InputSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural" => Ok(InputSource::Natural),
            "zeros" => Ok(InputSource::Zeros),
            other => other.parse().map(InputSource::Env),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Network template; the pbLN placement is overridden per sweep.
    pub arch: Architecture,
    pub source: InputSource,
    pub n_seeds: usize,
    pub base_seed: u64,
    /// Observations per seed; fractions are averaged over them.
    pub observations: usize,
}

impl SweepConfig {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_seeds as u64).map(|i| self.base_seed + i).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiringSweep {
    pub source: InputSource,
    pub pbln: bool,
    pub layers: Vec<String>,
    pub seeds: Vec<u64>,
    pub observations: usize,
    /// Active fraction per seed, per layer.
    pub per_seed: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Population standard deviation across seeds.
    pub std: Vec<f64>,
}

/// A `[C, H, W]` image made of a few Gaussian blobs, one image repeated over
/// the stacked channels, intensities clipped to `[0, 1]`.
pub fn natural_observation<R: Rng + ?Sized>(shape: [usize; 3], rng: &mut R) -> Tensor {
    let [c, h, w] = shape;
    let mut img = vec![0.0; h * w];
    for _ in 0..6 {
        let cy = rng.gen_range(0.0..h as f64);
        let cx = rng.gen_range(0.0..w as f64);
        let s = rng.gen_range(1.5..(h.max(w) as f64 / 3.0).max(2.0));
        let amp = rng.gen_range(0.2..0.8);
        for y in 0..h {
            for x in 0..w {
                let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                img[y * w + x] += amp * (-d2 / (2.0 * s * s)).exp();
            }
        }
    }
    let mut data = Vec::with_capacity(c * h * w);
    for _ in 0..c {
        data.extend(img.iter().map(|v| v.clamp(0.0, 1.0)));
    }
    Tensor::from_parts(vec![c, h, w], data)
}

fn observations(source: InputSource, shape: [usize; 3], n: usize, seed: u64) -> Result<Vec<Tensor>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match source {
        InputSource::Zeros => Ok(vec![Tensor::zeros(&shape); n]),
        InputSource::Natural => Ok((0..n).map(|_| natural_observation(shape, &mut rng)).collect()),
        InputSource::Env(kind) => {
            let mut env = kind.make(seed);
            let fs = env.frame_shape();
            if fs[1..] != shape[1..] {
                return Err(Error::shape(
                    "firing_sweep",
                    format!("{} frames {fs:?} do not fit input {shape:?}", kind.name()),
                ));
            }
            let mut stack = FrameStack::new(shape[0])?;
            let mut obs = vec![stack.reset(env.reset())?.to_tensor()];
            while obs.len() < n {
                let step = env.step(rng.gen_range(0..env.n_actions()))?;
                if step.terminal {
                    obs.push(stack.reset(env.reset())?.to_tensor());
                } else {
                    obs.push(stack.push(step.observation)?.to_tensor());
                }
            }
            Ok(obs)
        }
    }
}

/// Per-layer active fractions of random-init networks, one network per seed,
/// averaged over `observations` inputs drawn with the same seed. The weights
/// for a given seed are the same with and without pbLN.
pub fn firing_sweep(cfg: &SweepConfig, with_pbln: bool) -> Result<FiringSweep> {
    if cfg.n_seeds < 10 {
        return Err(Error::invalid(format!(
            "firing sweep needs at least 10 seeds, got {}",
            cfg.n_seeds
        )));
    }
    if cfg.observations == 0 {
        return Err(Error::invalid("firing sweep needs at least one observation"));
    }
    let arch = cfg.arch.clone().with_pbln(with_pbln);
    let layers = arch.layer_names();
    let mut per_seed = Vec::with_capacity(cfg.n_seeds);
    for seed in cfg.seeds() {
        let params = init_params(&arch, seed)?;
        let mut acc = vec![0.0; layers.len()];
        for obs in observations(cfg.source, arch.input_shape, cfg.observations, seed)? {
            let (_, trace) = forward(&obs, &params, &arch)?;
            for (a, l) in acc.iter_mut().zip(firing_stats(&trace).layers) {
                *a += l.active_fraction;
            }
        }
        per_seed.push(
            acc.into_iter()
                .map(|a| a / cfg.observations as f64)
                .collect::<Vec<f64>>(),
        );
    }
    let (mean, std) = (0..layers.len())
        .map(|l| {
            let col: Vec<f64> = per_seed.iter().map(|s| s[l]).collect();
            let (m, v) = crate::numerics::mean_var_raw(&col);
            (m, v.sqrt())
        })
        .unzip();
    Ok(FiringSweep {
        source: cfg.source,
        pbln: with_pbln,
        layers,
        seeds: cfg.seeds(),
        observations: cfg.observations,
        per_seed,
        mean,
        std,
    })
}

fn at_least(label: &str, required: f64, count: f64) -> TheoryCheck {
    TheoryCheck {
        label: label.into(),
        predicted: required,
        empirical: count,
        standard_error: 0.0,
        pass: count >= required,
    }
}

/// The depth-wise contrast between a sweep without pbLN (`off`) and one with
/// it (`on`) over the same seeds and inputs:
/// without pbLN the conv fractions strictly decrease with depth in at least
/// 90% of seeds and the last conv layer stays below 1% on every seed; with
/// pbLN the last conv layer fires, at 10× or more the unnormalized fraction
/// on every seed.
pub fn compare_firing(off: &FiringSweep, on: &FiringSweep) -> Result<TheoryReport> {
    if off.pbln || !on.pbln || off.seeds != on.seeds || off.layers != on.layers || off.source != on.source {
        return Err(Error::invalid("compare_firing needs matching off/on sweeps"));
    }
    let n_conv = off.layers.iter().filter(|n| n.starts_with("conv")).count();
    if n_conv == 0 {
        return Err(Error::invalid("no conv layers to compare"));
    }
    let last = n_conv - 1;
    let n = off.seeds.len() as f64;
    let decreasing = off
        .per_seed
        .iter()
        .filter(|f| f[..n_conv].windows(2).all(|w| w[0] > w[1]))
        .count() as f64;
    let worst_last = off.per_seed.iter().map(|f| f[last]).fold(0.0, f64::max);
    let boosted = off
        .per_seed
        .iter()
        .zip(&on.per_seed)
        .filter(|(a, b)| b[last] > 0.0 && b[last] >= 10.0 * a[last])
        .count() as f64;
    let name = &off.layers[last];
    let checks = vec![
        at_least(
            "seeds with strictly decreasing conv fractions (no pbLN)",
            (0.9 * n).ceil(),
            decreasing,
        ),
        TheoryCheck {
            label: format!("max {name} fraction without pbLN < 0.01"),
            predicted: 0.01,
            empirical: worst_last,
            standard_error: 0.0,
            pass: worst_last < 0.01,
        },
        at_least(
            &format!("seeds with {name}(pbLN) >= 10x {name}(no pbLN) > 0"),
            n,
            boosted,
        ),
    ];
    let config = json!({
        "source": off.source,
        "seeds": off.seeds,
        "observations": off.observations,
        "layers": off.layers,
    });
    Ok(TheoryReport::new("firing-contrast", config, checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_never_fire() {
        let cfg = SweepConfig {
            arch: Architecture::desk_deep(3),
            source: InputSource::Zeros,
            n_seeds: 10,
            base_seed: 0,
            observations: 1,
        };
        for pbln in [false, true] {
            let s = firing_sweep(&cfg, pbln).unwrap();
            assert!(s.per_seed.iter().flatten().all(|&f| f == 0.0));
        }
        assert!(firing_sweep(&SweepConfig { n_seeds: 3, ..cfg }, true).is_err());
    }

    #[test]
    fn natural_images_are_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = natural_observation([4, 24, 24], &mut rng);
        assert!(t.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(t.data().iter().filter(|&&v| v > 0.05).count() > 100);
    }
}
